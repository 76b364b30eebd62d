"""
Geometry Tests
==============
Meshes, closest points, surface sampling and distances, trilinear image
interpolation and the PLY / MetaImage / landmark file formats.
"""

import numpy as np
import pytest

from errors import FileFormatError, GeometryError
from geometry import (
    ClosestPointIndex,
    Landmark,
    ScalarImage,
    TriangleMesh,
    closest_point,
    read_landmarks,
    read_metaimage,
    read_ply,
    sample_surface_points,
    surface_distance,
    symmetric_mean_distance,
    write_landmarks,
    write_metaimage,
    write_ply,
)


def _segment_closest(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return a + t * ab


def _triangle_closest(p, a, b, c):
    """Plane projection when it falls inside the triangle, else the nearest edge point."""
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n)
    q = p - np.dot(p - a, n) * n
    inside = all(np.dot(np.cross(v1 - v0, q - v0), n) >= 0.0
                 for v0, v1 in ((a, b), (b, c), (c, a)))
    if inside:
        return q
    candidates = [_segment_closest(p, a, b), _segment_closest(p, b, c), _segment_closest(p, c, a)]
    return min(candidates, key=lambda x: np.linalg.norm(p - x))


# ========================================
# Meshes
# ========================================

def test_sphere_counts_and_area():
    mesh = TriangleMesh.sphere(radius=2.0, n_lat=32, n_lon=64)
    assert mesh.n_vertices == 2 + 31 * 64
    assert mesh.n_triangles == 2 * 64 + 2 * 30 * 64
    assert mesh.surface_area() == pytest.approx(4.0 * np.pi * 4.0, rel=0.03)


def test_degenerate_triangles_are_dropped():
    vertices = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0]]
    mesh = TriangleMesh(vertices, [[0, 1, 2], [0, 1, 3]])
    assert mesh.n_triangles == 1
    assert mesh.areas[0] == pytest.approx(0.5)


def test_bad_triangle_index_rejected():
    with pytest.raises(GeometryError):
        TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 3]])


def test_mesh_arrays_are_read_only(small_sphere):
    with pytest.raises(ValueError):
        small_sphere.vertices[0, 0] = 1.0


def test_landmark_needs_three_coordinates():
    with pytest.raises(GeometryError):
        Landmark("tip", (1.0, 2.0))


# ========================================
# Closest points
# ========================================

def test_closest_point_matches_exhaustive_search(small_sphere):
    assert small_sphere.n_triangles <= 200
    rng = np.random.default_rng(0)
    queries = rng.normal(size=(60, 3)) * 8.0
    cp, dist, _ = ClosestPointIndex(small_sphere).query(queries)
    corners = small_sphere.corners()
    for q, got, d in zip(queries, cp, dist):
        best = min(np.linalg.norm(q - _triangle_closest(q, *tri)) for tri in corners)
        assert d == pytest.approx(best, abs=1e-9)
        assert np.linalg.norm(q - got) == pytest.approx(best, abs=1e-9)


def test_closest_point_of_surface_point_is_itself(small_sphere):
    index = ClosestPointIndex(small_sphere)
    vertex = small_sphere.vertices[5]
    cp, d = closest_point(index, vertex)
    assert d == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(cp, vertex, atol=1e-12)


def test_closest_point_index_rejects_empty_mesh():
    with pytest.raises(GeometryError):
        ClosestPointIndex(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3))))


# ========================================
# Sampling and distances
# ========================================

def test_surface_samples_are_seeded_and_on_surface(sphere):
    a = sample_surface_points(sphere, 500, seed=4)
    b = sample_surface_points(sphere, 500, seed=4)
    c = sample_surface_points(sphere, 500, seed=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    _, distances, _ = ClosestPointIndex(sphere).query(a)
    assert np.max(distances) < 1e-9


def test_surface_samples_with_triangles(small_sphere):
    points, triangles = sample_surface_points(small_sphere, 50, return_triangles=True)
    assert points.shape == (50, 3)
    assert triangles.shape == (50,)
    assert triangles.max() < small_sphere.n_triangles


def test_triangles_are_hit_in_proportion_to_area():
    # four disjoint right triangles with legs 1..4
    vertices, triangles = [], []
    for k in range(1, 5):
        z = float(k)
        vertices += [[0.0, 0.0, z], [k, 0.0, z], [0.0, k, z]]
        triangles.append([3 * k - 3, 3 * k - 2, 3 * k - 1])
    mesh = TriangleMesh(vertices, triangles)
    n = 100_000
    _, hits = sample_surface_points(mesh, n, seed=11, return_triangles=True)
    counts = np.bincount(hits, minlength=4)
    p = mesh.areas / mesh.areas.sum()
    sigma = np.sqrt(n * p * (1.0 - p))
    assert np.all(np.abs(counts - n * p) <= 3.0 * sigma)


def test_single_triangle_sample_mean_is_the_centroid():
    corners = np.array([[1.0, 2.0, 0.0], [9.0, 3.0, 1.0], [4.0, 8.0, -2.0]])
    mesh = TriangleMesh(corners, [[0, 1, 2]])
    points = sample_surface_points(mesh, 10_000, seed=2)
    longest = max(np.linalg.norm(corners[i] - corners[j]) for i, j in ((0, 1), (1, 2), (2, 0)))
    assert np.linalg.norm(points.mean(axis=0) - corners.mean(axis=0)) <= 0.02 * longest
    _, distances, _ = ClosestPointIndex(mesh).query(points)
    assert np.max(distances) < 1e-9


def test_sample_count_must_be_positive(small_sphere):
    with pytest.raises(GeometryError):
        sample_surface_points(small_sphere, 0)


def test_concentric_sphere_distance():
    inner = TriangleMesh.sphere(radius=1.0, n_lat=16, n_lon=32)
    outer = TriangleMesh.sphere(radius=1.1, n_lat=16, n_lon=32)
    mean, maximum = surface_distance(inner, outer, n_samples=2000)
    assert mean == pytest.approx(0.1, abs=0.02)
    assert maximum >= mean


def test_symmetric_distance_of_mesh_to_itself(sphere):
    assert symmetric_mean_distance(sphere, sphere, n_samples=500) == pytest.approx(0.0, abs=1e-9)


def test_symmetric_distance_takes_larger_direction(sphere):
    shifted = sphere.translated((0.0, 0.0, 3.0))
    forward, _ = surface_distance(sphere, shifted, n_samples=800, seed=2)
    backward, _ = surface_distance(shifted, sphere, n_samples=800, seed=2)
    both, _ = surface_distance(sphere, shifted, n_samples=800, seed=2, symmetric=True)
    assert both == pytest.approx(max(forward, backward))


# ========================================
# Images
# ========================================

def _linear_image(mask=None) -> ScalarImage:
    spacing, origin = np.array([1.0, 0.5, 2.0]), np.array([-1.0, 0.0, 3.0])
    axes = [origin[d] + np.arange(n) * spacing[d] for d, n in enumerate((6, 7, 5))]
    x, y, z = np.meshgrid(*axes, indexing="ij")
    return ScalarImage(2.0 * x + 3.0 * y - z + 1.0, spacing, origin, mask=mask, out_of_domain_value=-7.0)


def test_trilinear_is_exact_for_linear_images():
    image = _linear_image()
    rng = np.random.default_rng(1)
    low = np.array([-1.0, 0.0, 3.0])
    high = low + np.array([5.0, 3.0, 8.0])
    points = rng.uniform(low + 0.01, high - 0.01, size=(200, 3))
    values, gradients = image.interpolate_with_gradient(points)
    expected = 2.0 * points[:, 0] + 3.0 * points[:, 1] - points[:, 2] + 1.0
    np.testing.assert_allclose(values, expected, atol=1e-10)
    np.testing.assert_allclose(gradients, np.tile([2.0, 3.0, -1.0], (200, 1)), atol=1e-10)


def test_outside_points_get_the_out_of_domain_value():
    image = _linear_image()
    values, gradients = image.interpolate_with_gradient([[100.0, 0.0, 3.0], [-1.5, 0.0, 3.0]])
    np.testing.assert_array_equal(values, [-7.0, -7.0])
    np.testing.assert_array_equal(gradients, np.zeros((2, 3)))


def test_voxel_center_order_and_mask():
    mask = np.zeros((6, 7, 5), dtype=bool)
    mask[1:3, 2:5, 0:2] = True
    image = _linear_image(mask)
    centers = image.voxel_centers()
    assert centers.shape == (6 * 7 * 5, 3)
    np.testing.assert_allclose(centers[0], [-1.0, 0.0, 3.0])
    np.testing.assert_allclose(centers[1], [-1.0, 0.0, 5.0])
    assert len(image.domain_points()) == int(mask.sum())
    # masked-out voxel center reads as out of domain
    assert image.interpolate(centers[:1])[0] == -7.0


def test_image_rejects_bad_spacing():
    with pytest.raises(GeometryError):
        ScalarImage(np.zeros((2, 2, 2)), spacing=(1.0, 0.0, 1.0))


# ========================================
# File formats
# ========================================

def test_ply_write_read(tmp_path, small_sphere):
    path = write_ply(tmp_path / "sphere.ply", small_sphere)
    mesh = read_ply(path)
    np.testing.assert_array_equal(mesh.vertices, small_sphere.vertices)
    np.testing.assert_array_equal(mesh.triangles, small_sphere.triangles)
    first = path.read_bytes()
    write_ply(path, mesh)
    assert path.read_bytes() == first


def test_ply_rejects_other_files(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_text("solid cube\n")
    with pytest.raises(FileFormatError):
        read_ply(path)


def test_metaimage_write_read(tmp_path):
    voxels = np.arange(4 * 3 * 2, dtype=np.float64).reshape(4, 3, 2)
    image = ScalarImage(voxels, spacing=(0.5, 1.0, 2.0), origin=(1.0, -2.0, 0.0))
    path = write_metaimage(tmp_path / "image.mhd", image)
    assert (tmp_path / "image.raw").exists()
    loaded = read_metaimage(path)
    assert loaded.dims == (4, 3, 2)
    np.testing.assert_array_equal(loaded.voxels, voxels)
    np.testing.assert_array_equal(loaded.spacing, [0.5, 1.0, 2.0])
    np.testing.assert_array_equal(loaded.origin, [1.0, -2.0, 0.0])


def test_landmarks_write_read(tmp_path):
    landmarks = [Landmark("nose", (1.0, 2.0, 3.0)), Landmark("chin", (0.25, -1.0, 4.5))]
    path = write_landmarks(tmp_path / "lm.csv", landmarks)
    assert read_landmarks(path) == landmarks


def test_landmarks_reject_duplicates_and_bad_header(tmp_path):
    duplicate = tmp_path / "dup.csv"
    duplicate.write_text("name,x,y,z\na,0,0,0\na,1,1,1\n")
    with pytest.raises(FileFormatError):
        read_landmarks(duplicate)
    header = tmp_path / "header.csv"
    header.write_text("label,x,y,z\na,0,0,0\n")
    with pytest.raises(FileFormatError):
        read_landmarks(header)
