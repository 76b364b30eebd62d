"""
Area-uniform surface sampling.
"""

from typing import Tuple, Union

import numpy as np

from errors import GeometryError
from .mesh import TriangleMesh


def sample_surface_points(mesh: TriangleMesh, n: int, seed: int = 0,
                          return_triangles: bool = False
                          ) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """
    Draw n points uniformly with respect to surface area.

    A triangle is chosen with probability proportional to its area, then a
    point is drawn uniformly inside it (square-root barycentric trick).

    Args:
        mesh: Nonempty mesh.
        n: Number of points (>= 1).
        seed: Random seed; identical seeds give identical points.
        return_triangles: Also return the triangle index of every point.

    Returns:
        (n, 3) points, optionally with the (n,) triangle indices.
    """
    if n < 1:
        raise GeometryError(f"sample count must be at least 1, got {n}")
    if mesh.is_empty:
        raise GeometryError("cannot sample an empty mesh")

    rng = np.random.default_rng(seed)
    probabilities = mesh.areas / mesh.areas.sum()
    triangles = rng.choice(mesh.n_triangles, size=n, p=probabilities)
    r1 = rng.random(n)
    r2 = rng.random(n)
    s = np.sqrt(r1)
    u, v, w = 1.0 - s, s * (1.0 - r2), s * r2

    corners = mesh.corners()[triangles]
    points = u[:, None] * corners[:, 0] + v[:, None] * corners[:, 1] + w[:, None] * corners[:, 2]
    if return_triangles:
        return points, triangles
    return points
