"""
GPMorph Geometry Module
=======================
Mesh and volumetric-image carriers, exact closest-point queries, trilinear
interpolation, surface distances and the PLY / MetaImage / landmark formats.
"""

from .mesh import TriangleMesh, Landmark, check_unique_names, landmark_points
from .closest_point import ClosestPointIndex, closest_point, closest_points_on_triangles
from .sampling import sample_surface_points
from .image import ScalarImage, interpolate, image_gradient
from .distance import surface_distance, symmetric_mean_distance
from .io import (
    read_ply, write_ply,
    read_metaimage, write_metaimage, read_mask,
    read_landmarks, write_landmarks,
)

__all__ = [
    "TriangleMesh",
    "Landmark",
    "check_unique_names",
    "landmark_points",
    "ClosestPointIndex",
    "closest_point",
    "closest_points_on_triangles",
    "sample_surface_points",
    "ScalarImage",
    "interpolate",
    "image_gradient",
    "surface_distance",
    "symmetric_mean_distance",
    "read_ply",
    "write_ply",
    "read_metaimage",
    "write_metaimage",
    "read_mask",
    "read_landmarks",
    "write_landmarks",
]
