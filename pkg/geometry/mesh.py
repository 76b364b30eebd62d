"""
Triangle Meshes and Landmarks
=============================
Immutable surface carriers used as registration references and targets.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from config import GeometryConfig
from errors import GeometryError

logger = logging.getLogger("GPMorph.Geometry")


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class TriangleMesh:
    """
    Triangle surface with a per-triangle area cache.

    Degenerate triangles (area below GeometryConfig.DEGENERATE_AREA) are
    dropped at construction. Watertightness is not required.

    Args:
        vertices: (N, 3) vertex positions in millimetres.
        triangles: (M, 3) vertex indices.
    """

    def __init__(self, vertices, triangles):
        vertices = np.asarray(vertices, dtype=np.float64)
        if vertices.size == 0:
            vertices = np.zeros((0, 3))
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise GeometryError(f"vertices must have shape (N, 3), got {vertices.shape}")
        if not np.all(np.isfinite(vertices)):
            raise GeometryError("mesh vertices must be finite")

        triangles = np.asarray(triangles, dtype=np.int64)
        if triangles.size == 0:
            triangles = np.zeros((0, 3), dtype=np.int64)
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise GeometryError(f"triangles must have shape (M, 3), got {triangles.shape}")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise GeometryError("triangle vertex index out of range")

        areas = self._triangle_areas(vertices, triangles)
        keep = areas > GeometryConfig.DEGENERATE_AREA
        if not np.all(keep):
            logger.warning(f"Dropping {int(np.sum(~keep))} degenerate triangle(s)")
            triangles = triangles[keep]
            areas = areas[keep]

        self._vertices = _frozen(vertices.copy())
        self._triangles = _frozen(triangles.copy())
        self._areas = _frozen(areas)

    @staticmethod
    def _triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
        if len(triangles) == 0:
            return np.zeros(0)
        a, b, c = (vertices[triangles[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    # ========================================
    # Properties
    # ========================================

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def triangles(self) -> np.ndarray:
        return self._triangles

    @property
    def areas(self) -> np.ndarray:
        """Per-triangle areas in mm^2."""
        return self._areas

    @property
    def n_vertices(self) -> int:
        return len(self._vertices)

    @property
    def n_triangles(self) -> int:
        return len(self._triangles)

    @property
    def is_empty(self) -> bool:
        return self.n_triangles == 0

    def corners(self) -> np.ndarray:
        """Triangle corner positions, shape (M, 3, 3)."""
        return self._vertices[self._triangles]

    def surface_area(self) -> float:
        return float(self._areas.sum())

    def with_vertices(self, vertices) -> "TriangleMesh":
        """Same connectivity, new vertex positions."""
        return TriangleMesh(vertices, self._triangles)

    def translated(self, offset: Sequence[float]) -> "TriangleMesh":
        return self.with_vertices(self._vertices + np.asarray(offset, dtype=np.float64))

    # ========================================
    # Factories
    # ========================================

    @classmethod
    def sphere(cls, radius: float = 1.0, n_lat: int = 16, n_lon: int = 32,
               center: Sequence[float] = (0.0, 0.0, 0.0)) -> "TriangleMesh":
        """
        Latitude/longitude tessellated sphere.

        Args:
            radius: Sphere radius.
            n_lat: Number of latitude bands (>= 2); there are n_lat - 1 rings.
            n_lon: Vertices per ring (>= 3).
            center: Sphere center.

        Returns:
            Mesh with 2 + (n_lat - 1) * n_lon vertices.
        """
        if n_lat < 2 or n_lon < 3:
            raise GeometryError("sphere needs n_lat >= 2 and n_lon >= 3")
        theta = np.linspace(0.0, np.pi, n_lat + 1)[1:-1]
        phi = np.arange(n_lon) * (2.0 * np.pi / n_lon)
        st, ct = np.sin(theta)[:, None], np.cos(theta)[:, None]
        rings = np.stack([st * np.cos(phi), st * np.sin(phi), ct * np.ones_like(phi)], axis=-1)
        vertices = np.vstack([[0.0, 0.0, 1.0], rings.reshape(-1, 3), [0.0, 0.0, -1.0]])
        vertices = radius * vertices + np.asarray(center, dtype=np.float64)

        def ring(k: int, j) -> np.ndarray:
            return 1 + k * n_lon + np.mod(j, n_lon)

        j = np.arange(n_lon)
        south = len(vertices) - 1
        faces = [np.stack([np.zeros(n_lon, dtype=np.int64), ring(0, j), ring(0, j + 1)], axis=1)]
        for k in range(n_lat - 2):
            a, b = ring(k, j), ring(k, j + 1)
            c, d = ring(k + 1, j), ring(k + 1, j + 1)
            faces.append(np.stack([a, c, b], axis=1))
            faces.append(np.stack([b, c, d], axis=1))
        last = n_lat - 2
        faces.append(np.stack([np.full(n_lon, south), ring(last, j + 1), ring(last, j)], axis=1))
        return cls(vertices, np.vstack(faces))

    def __repr__(self) -> str:
        return f"TriangleMesh(vertices={self.n_vertices}, triangles={self.n_triangles})"


# ========================================
# Landmarks
# ========================================

@dataclass(frozen=True)
class Landmark:
    """Named point, e.g. a clicked anatomical landmark."""
    name: str
    point: Tuple[float, float, float]

    def __post_init__(self):
        point = tuple(float(v) for v in self.point)
        if len(point) != 3 or not all(np.isfinite(point)):
            raise GeometryError(f"landmark '{self.name}' needs three finite coordinates")
        object.__setattr__(self, "point", point)


def check_unique_names(landmarks: Iterable[Landmark]) -> List[Landmark]:
    """Return the landmarks as a list, rejecting duplicate names."""
    landmarks = list(landmarks)
    seen = set()
    for landmark in landmarks:
        if landmark.name in seen:
            raise GeometryError(f"duplicate landmark name '{landmark.name}'")
        seen.add(landmark.name)
    return landmarks


def landmark_points(landmarks: Sequence[Landmark]) -> np.ndarray:
    """Stack landmark positions into an (L, 3) array."""
    if not landmarks:
        return np.zeros((0, 3))
    return np.array([lm.point for lm in landmarks], dtype=np.float64)
