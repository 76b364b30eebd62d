"""
Surface-to-surface distances used by registration checks and model metrics.
"""

from typing import Tuple

import numpy as np

from config import ShapeModelConfig
from .closest_point import ClosestPointIndex
from .mesh import TriangleMesh
from .sampling import sample_surface_points


def _one_sided(mesh_a: TriangleMesh, mesh_b: TriangleMesh, n_samples: int,
               seed: int) -> Tuple[float, float]:
    points = sample_surface_points(mesh_a, n_samples, seed)
    _, distances, _ = ClosestPointIndex(mesh_b).query(points)
    return float(np.mean(distances)), float(np.max(distances))


def surface_distance(mesh_a: TriangleMesh, mesh_b: TriangleMesh,
                     n_samples: int = ShapeModelConfig.DISTANCE_SAMPLES, seed: int = 0,
                     symmetric: bool = False) -> Tuple[float, float]:
    """
    Mean and max closest-point distance from area-uniform samples on A to B.

    With symmetric=True both directions are measured and the larger mean and
    the larger max are reported.
    """
    mean_ab, max_ab = _one_sided(mesh_a, mesh_b, n_samples, seed)
    if not symmetric:
        return mean_ab, max_ab
    mean_ba, max_ba = _one_sided(mesh_b, mesh_a, n_samples, seed)
    return max(mean_ab, mean_ba), max(max_ab, max_ba)


def symmetric_mean_distance(mesh_a: TriangleMesh, mesh_b: TriangleMesh,
                            n_samples: int = ShapeModelConfig.DISTANCE_SAMPLES,
                            seed: int = 0) -> float:
    return surface_distance(mesh_a, mesh_b, n_samples, seed, symmetric=True)[0]
