"""
GPMorph Test Fixtures
=====================
Synthetic geometry shared by the test modules: tessellated spheres,
axis-scaled sphere families in correspondence, smooth blob images and small
models built on them.
"""

import numpy as np
import pytest

from geometry import ScalarImage, TriangleMesh
from kernels import DeformationFieldSet, empirical, gauss
from lowrank import build_lowrank, explicit, surface

# reference material, not part of the test suite
collect_ignore = ["examples"]


# ========================================
# Meshes
# ========================================

@pytest.fixture
def sphere():
    """Radius-10 sphere, 16 latitude bands x 32 longitudes."""
    return TriangleMesh.sphere(radius=10.0, n_lat=16, n_lon=32)


@pytest.fixture
def small_sphere():
    """Coarse radius-10 sphere (fewer than 200 triangles) for brute-force checks."""
    return TriangleMesh.sphere(radius=10.0, n_lat=8, n_lon=12)


def _scaled(mesh: TriangleMesh, factors) -> TriangleMesh:
    return mesh.with_vertices(mesh.vertices * (1.0 + np.asarray(factors, dtype=np.float64)))


@pytest.fixture
def scaled_sphere():
    """Factory: sphere vertices multiplied per axis by 1 + factors."""
    return _scaled


@pytest.fixture
def scaling_set(small_sphere):
    """Six axis-scaled copies of the small sphere as a deformation-field set."""
    rng = np.random.default_rng(7)
    factors = rng.normal(0.0, 0.1, size=(6, 3))
    meshes = [_scaled(small_sphere, f) for f in factors]
    return DeformationFieldSet.from_meshes(small_sphere, meshes)


@pytest.fixture
def scaling_model(small_sphere, scaling_set):
    """Rank-3 model of axis scalings: empirical kernel on the reference vertices."""
    kernel = empirical(scaling_set)
    n = small_sphere.n_vertices
    return build_lowrank(kernel, None, explicit(small_sphere.vertices), n, 3)


@pytest.fixture
def smooth_model(sphere):
    """Gaussian-kernel model on the sphere surface: gauss(1, 5), 120 points, rank 10."""
    return build_lowrank(gauss(1.0, 5.0), None, surface(sphere, seed=3), 120, 10)


# ========================================
# Images
# ========================================

def blob_voxels(dims, center, width: float) -> np.ndarray:
    """exp(-|x - c|^2 / (2 width^2)) sampled at integer voxel centers."""
    axes = [np.arange(d, dtype=np.float64) for d in dims]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    diff = grid - np.asarray(center, dtype=np.float64)
    return np.exp(-np.sum(diff * diff, axis=-1) / (2.0 * width ** 2))


@pytest.fixture
def blob_image():
    """Factory: unit-spacing blob image with the given dims, center and width."""
    def make(dims=(24, 24, 24), center=(11.5, 11.5, 11.5), width=4.0) -> ScalarImage:
        return ScalarImage(blob_voxels(dims, center, width))
    return make
