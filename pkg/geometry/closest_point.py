"""
Closest-Point Queries
=====================
Exact point-to-triangle-set queries.

Candidates come from a cKDTree over triangle centroids. Any triangle whose
centroid is farther than (best candidate distance + largest centroid-to-corner
radius) cannot contain a closer point, so a ball query with that radius yields
every triangle that may win; the exact region-classification distance then
picks the minimum.

The centroid KD-tree stands in for an axis-aligned bounding-box hierarchy.
Answers are identical (the ball search never misses a candidate); only the
pruning differs, which matters on meshes with very uneven triangle sizes.
"""

from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

from config import GeometryConfig
from errors import GeometryError
from .mesh import TriangleMesh

_BATCH = 2048


def _dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", u, v)


def closest_points_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray,
                                c: np.ndarray) -> np.ndarray:
    """
    Closest point on triangle (a, b, c) to p, row by row.

    Vertex, edge and face Voronoi regions are classified from the same dot
    products, so the result is exact up to rounding.

    Args:
        p, a, b, c: (K, 3) arrays.

    Returns:
        (K, 3) closest points.
    """
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = _dot(ab, ap), _dot(ac, ap)
    bp = p - b
    d3, d4 = _dot(ab, bp), _dot(ac, bp)
    cp = p - c
    d5, d6 = _dot(ab, cp), _dot(ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    with np.errstate(divide="ignore", invalid="ignore"):
        # vertex a
        m = (d1 <= 0) & (d2 <= 0)
        out[m] = a[m]
        done |= m
        # vertex b
        m = ~done & (d3 >= 0) & (d4 <= d3)
        out[m] = b[m]
        done |= m
        # edge ab
        m = ~done & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        t = d1[m] / (d1[m] - d3[m])
        out[m] = a[m] + t[:, None] * ab[m]
        done |= m
        # vertex c
        m = ~done & (d6 >= 0) & (d5 <= d6)
        out[m] = c[m]
        done |= m
        # edge ac
        m = ~done & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        t = d2[m] / (d2[m] - d6[m])
        out[m] = a[m] + t[:, None] * ac[m]
        done |= m
        # edge bc
        m = ~done & (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
        t = (d4[m] - d3[m]) / ((d4[m] - d3[m]) + (d5[m] - d6[m]))
        out[m] = b[m] + t[:, None] * (c[m] - b[m])
        done |= m
        # face interior
        m = ~done
        denom = 1.0 / (va[m] + vb[m] + vc[m])
        v = vb[m] * denom
        w = vc[m] * denom
        out[m] = a[m] + v[:, None] * ab[m] + w[:, None] * ac[m]
    return out


class ClosestPointIndex:
    """
    Spatial index answering exact nearest-point-on-surface queries.

    Immutable after construction; queries are pure and thread-safe.

    Args:
        mesh: Nonempty triangle mesh.
    """

    def __init__(self, mesh: TriangleMesh):
        if mesh.is_empty:
            raise GeometryError("cannot build a closest-point index over an empty mesh")
        corners = mesh.corners()
        self._a = corners[:, 0].copy()
        self._b = corners[:, 1].copy()
        self._c = corners[:, 2].copy()
        centroids = corners.mean(axis=1)
        self._radius = float(np.max(np.linalg.norm(corners - centroids[:, None, :], axis=2)))
        self._tree = cKDTree(centroids)
        self._n_triangles = len(corners)
        self.mesh = mesh

    def query(self, points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Closest surface points for a batch of queries.

        Returns:
            (closest points (Q, 3), distances (Q,), triangle indices (Q,)).
            Ties go to the lowest triangle index.
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        closest = np.empty_like(points)
        distances = np.empty(len(points))
        triangles = np.empty(len(points), dtype=np.int64)
        for start in range(0, len(points), _BATCH):
            stop = min(start + _BATCH, len(points))
            cp, d, t = self._query_batch(points[start:stop])
            closest[start:stop], distances[start:stop], triangles[start:stop] = cp, d, t
        return closest, distances, triangles

    def _exact(self, points: np.ndarray, qi: np.ndarray, ti: np.ndarray):
        cp = closest_points_on_triangles(points[qi], self._a[ti], self._b[ti], self._c[ti])
        diff = points[qi] - cp
        return cp, _dot(diff, diff)

    def _query_batch(self, points: np.ndarray):
        q = len(points)
        k = min(GeometryConfig.CANDIDATES, self._n_triangles)
        _, cand = self._tree.query(points, k=k)
        cand = np.asarray(cand).reshape(q, -1)

        qi = np.repeat(np.arange(q), cand.shape[1])
        _, d2 = self._exact(points, qi, cand.ravel())
        upper = np.sqrt(d2.reshape(q, -1).min(axis=1))
        radius = (upper + self._radius) * (1.0 + 1e-9) + 1e-12

        lists = self._tree.query_ball_point(points, r=radius)
        counts = np.fromiter((len(lst) for lst in lists), dtype=np.int64, count=q)
        qi = np.repeat(np.arange(q), counts)
        ti = np.concatenate([np.asarray(lst, dtype=np.int64) for lst in lists])
        cp, d2 = self._exact(points, qi, ti)

        order = np.lexsort((ti, d2, qi))
        first = np.searchsorted(qi[order], np.arange(q))
        best = order[first]
        return cp[best], np.sqrt(d2[best]), ti[best]


def closest_point(index: ClosestPointIndex, x) -> Tuple[np.ndarray, float]:
    """Closest point on the indexed surface to a single point x, and its distance."""
    cp, d, _ = index.query(np.asarray(x, dtype=np.float64).reshape(1, 3))
    return cp[0], float(d[0])
