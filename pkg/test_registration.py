"""
Registration Tests
==================
Optimizers on a quadratic energy, analytic energy gradients against finite
differences, and surface, image and landmark-constrained fits.
"""

import numpy as np
import pytest

from errors import CoefficientError, DivergenceError, UsageError
from geometry import ScalarImage, TriangleMesh, surface_distance
from kernels import DeformationFieldSet, ScalarConstant, diag, empirical
from lowrank import build_lowrank, explicit
from regression import ObservationSet
from registration import (
    LBFGS,
    Energy,
    GradientDescent,
    ImageEnergy,
    ModelSampling,
    StochasticGradientDescent,
    SurfaceEnergy,
    energy_and_gradient,
    fit,
    hybrid_fit,
    make_optimizer,
    resample_target,
    surface_fitter,
    warp_mesh,
    warp_points,
)
from shapemodel import discretize


class QuadraticEnergy(Energy):
    """data = mean_p |alpha - c_p|^2; the minimizer of data + eta |alpha|^2 is mean(c) / (1 + eta)."""

    def __init__(self, centers: np.ndarray, eta: float):
        n, r = centers.shape
        sampling = ModelSampling(np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 3, r)))
        super().__init__(sampling, eta)
        self.centers = centers

    def data_and_gradient(self, alpha, indices=None):
        centers = self.centers if indices is None else self.centers[indices]
        diff = alpha[None, :] - centers
        return float(np.mean(np.sum(diff * diff, axis=1))), 2.0 * diff.mean(axis=0)

    def with_model(self, sampling):
        return self


@pytest.fixture
def quadratic():
    centers = np.random.default_rng(3).normal(1.0, 0.5, size=(40, 4))
    return QuadraticEnergy(centers, eta=0.1)


def _numeric_gradient(energy: Energy, alpha: np.ndarray, h: float = 1e-6) -> np.ndarray:
    gradient = np.empty_like(alpha)
    for i in range(len(alpha)):
        step = np.zeros_like(alpha)
        step[i] = h
        plus = energy_and_gradient(energy, alpha + step)[0]
        minus = energy_and_gradient(energy, alpha - step)[0]
        gradient[i] = (plus - minus) / (2.0 * h)
    return gradient


@pytest.fixture
def translation_model():
    """Rank-3 model of rigid translations on a 24^3 voxel domain."""
    points = np.random.default_rng(0).uniform(0.0, 23.0, size=(50, 3))
    return build_lowrank(diag(np.eye(3), ScalarConstant(1.0)), None, explicit(points), 50, 3)


# ========================================
# Optimizers
# ========================================

def test_lbfgs_reaches_the_minimizer(quadratic):
    result = fit(quadratic, LBFGS(), max_iters=100, tol=1e-10)
    expected = quadratic.centers.mean(axis=0) / 1.1
    np.testing.assert_allclose(result.alpha, expected, atol=1e-6)
    assert result.converged
    assert result.total == pytest.approx(result.data + 0.1 * result.regularizer)
    assert result.trace[0] >= result.trace[-1]


def test_gradient_descent_with_backtracking_is_monotone(quadratic):
    result = fit(quadratic, GradientDescent(step=10.0), max_iters=60, tol=1e-12)
    assert all(b <= a for a, b in zip(result.trace, result.trace[1:]))
    np.testing.assert_allclose(result.alpha, quadratic.centers.mean(axis=0) / 1.1, atol=1e-4)


def test_fixed_large_step_diverges(quadratic):
    with pytest.raises(DivergenceError):
        fit(quadratic, GradientDescent(step=10.0, backtracking=False), max_iters=50)


def test_full_batch_sgd_equals_gradient_descent(quadratic):
    sgd = fit(quadratic, StochasticGradientDescent(batch=100, step=0.1, decay=None), max_iters=30, tol=0.0)
    gd = fit(quadratic, GradientDescent(step=0.1, backtracking=False), max_iters=30, tol=0.0)
    np.testing.assert_array_equal(sgd.alpha, gd.alpha)
    assert sgd.trace == gd.trace


def test_mini_batch_sgd_approaches_the_minimizer(quadratic):
    result = fit(quadratic, StochasticGradientDescent(batch=8, step=0.2, decay=50.0), max_iters=400, tol=0.0,
                 seed=5)
    np.testing.assert_allclose(result.alpha, quadratic.centers.mean(axis=0) / 1.1, atol=0.1)


def test_sgd_step_schedule():
    sgd = StochasticGradientDescent(batch=4, step=0.5, decay=10.0)
    assert sgd.step_size(0) == 0.5
    assert sgd.step_size(10) == pytest.approx(0.25)
    assert StochasticGradientDescent(batch=4, step=0.5, decay=None).step_size(1000) == 0.5


def test_rank_zero_returns_immediately():
    energy = QuadraticEnergy(np.zeros((5, 0)), eta=1.0)
    result = fit(energy)
    assert result.alpha.shape == (0,)
    assert result.iterations == 0
    assert result.converged


def test_make_optimizer():
    assert isinstance(make_optimizer("lbfgs"), LBFGS)
    assert make_optimizer("sgd", seed=4, batch=16).seed == 4
    with pytest.raises(UsageError):
        make_optimizer("adam")
    with pytest.raises(UsageError):
        GradientDescent(step=0.0)


def test_fit_argument_checks(quadratic):
    with pytest.raises(UsageError):
        fit(quadratic, max_iters=-1)
    with pytest.raises(CoefficientError):
        fit(quadratic, init=np.zeros(3))
    with pytest.raises(UsageError):
        QuadraticEnergy(np.zeros((3, 2)), eta=-1.0)


# ========================================
# Energy gradients
# ========================================

def _assert_gradient_matches(energy: Energy, alpha: np.ndarray) -> None:
    _, gradient = energy_and_gradient(energy, alpha)
    numeric = _numeric_gradient(energy, alpha, h=1e-7)
    assert np.linalg.norm(gradient - numeric) <= 1e-4 * np.linalg.norm(gradient) + 1e-9


def test_surface_energy_gradient(smooth_model, sphere):
    target = TriangleMesh.sphere(radius=9.0, n_lat=12, n_lon=20)
    energy = SurfaceEnergy.create(smooth_model, sphere, target, eta=1e-3, n_points=300, seed=1)
    rng = np.random.default_rng(2)
    for _ in range(20):
        _assert_gradient_matches(energy, 0.3 * rng.normal(size=smooth_model.rank))


def test_frozen_surface_energy_uses_fixed_correspondences(smooth_model, sphere):
    target = TriangleMesh.sphere(radius=9.0, n_lat=12, n_lon=20)
    energy = SurfaceEnergy.create(smooth_model, sphere, target, n_points=100)
    alpha = np.full(smooth_model.rank, 0.2)
    energy.refresh(alpha)
    assert energy.frozen
    frozen_value = energy.data_term(alpha)
    energy.release()
    assert not energy.frozen
    assert energy.data_term(alpha) == pytest.approx(frozen_value)


def test_image_energy_gradient(translation_model, blob_image):
    reference = blob_image()
    target = blob_image(center=(12.5, 11.0, 12.0))
    energy = ImageEnergy.create(translation_model, reference, target, eta=1e-3, n_points=500, seed=3)
    rng = np.random.default_rng(4)
    for _ in range(20):
        _assert_gradient_matches(energy, rng.uniform(-0.6, 0.6, size=3))


# ========================================
# Surface fitting
# ========================================

def test_surface_fit_recovers_known_coefficients(scaling_model, small_sphere):
    truth = np.array([1.0, -0.8, 0.5])
    target = warp_mesh(scaling_model, small_sphere, truth)
    energy = SurfaceEnergy.create(scaling_model, small_sphere, target, eta=1e-4, n_points=None)
    result = fit(energy, LBFGS(), max_iters=200, tol=1e-10)
    assert np.max(np.abs(result.alpha - truth)) <= 0.05
    assert result.data < 1e-3


def test_surface_fit_recovers_a_model_sample(scaled_sphere):
    reference = TriangleMesh.sphere(radius=10.0, n_lat=24, n_lon=42)
    assert reference.n_vertices == 968
    factors = np.random.default_rng(21).normal(0.0, 0.1, size=(6, 3))
    fields = DeformationFieldSet.from_meshes(reference, [scaled_sphere(reference, f) for f in factors])
    gp = build_lowrank(empirical(fields), None, explicit(reference.vertices, seed=1), 200, 3)
    truth = gp.sample_coefficients(seed=5)
    target = warp_mesh(gp, reference, truth)

    energy = SurfaceEnergy.create(gp, reference, target, eta=1e-6, n_points=None)
    result = fit(energy, LBFGS(), max_iters=300, tol=1e-12)
    assert np.max(np.abs(result.alpha - truth)) <= 0.05 * np.max(np.abs(truth))
    distance, _ = surface_distance(warp_mesh(gp, reference, result.alpha), target, n_samples=2000)
    assert distance <= 0.01 * 10.0


def test_hybrid_fit_matches_landmarks(scaling_model, small_sphere):
    truth = np.array([1.0, -0.8, 0.5])
    target = warp_mesh(scaling_model, small_sphere, truth)
    chosen = [0, 10, 40]
    observations = ObservationSet(small_sphere.vertices[chosen],
                                  target.vertices[chosen] - small_sphere.vertices[chosen])
    energy = SurfaceEnergy.create(scaling_model, small_sphere, target, eta=1e-4, n_points=None)
    result = hybrid_fit(scaling_model, observations, energy, LBFGS(), max_iters=100, tol=1e-10)
    warped = warp_points(result.model, small_sphere.vertices[chosen], result.alpha)
    np.testing.assert_allclose(warped, target.vertices[chosen], atol=1e-3)


def test_landmarks_keep_a_mirrored_start_off_the_decoy(translation_model, small_sphere):
    shift = np.array([15.0, 0.0, 0.0])
    truth = np.linalg.solve(translation_model.scaled_basis(np.zeros((1, 3)))[0], shift)
    # the mirrored coefficients put the reference around a smaller decoy sphere
    wanted = small_sphere.translated(shift)
    decoy = TriangleMesh.sphere(radius=8.0, n_lat=8, n_lon=12, center=-shift)
    target = TriangleMesh(np.vstack([wanted.vertices, decoy.vertices]),
                          np.vstack([wanted.triangles, decoy.triangles + wanted.n_vertices]))
    chosen = [0, 30, 60]
    observations = ObservationSet(small_sphere.vertices[chosen], np.tile(shift, (3, 1)), noise_variance=0.01)
    energy = SurfaceEnergy.create(translation_model, small_sphere, target, eta=1e-4, n_points=None)

    plain = fit(energy, LBFGS(), init=-truth, max_iters=100, tol=1e-10)
    hybrid = hybrid_fit(translation_model, observations, energy, LBFGS(), init=-truth, max_iters=100, tol=1e-10)

    plain_distance, _ = surface_distance(warp_mesh(translation_model, small_sphere, plain.alpha), target,
                                         n_samples=2000)
    hybrid_distance, _ = surface_distance(warp_mesh(hybrid.model, small_sphere, hybrid.alpha), target,
                                          n_samples=2000)
    assert plain_distance > 1.0
    assert hybrid_distance < 0.1
    assert hybrid_distance < plain_distance


def test_hybrid_fit_without_landmarks_is_plain_fit(smooth_model, sphere):
    target = TriangleMesh.sphere(radius=10.5, n_lat=10, n_lon=16)
    energy = SurfaceEnergy.create(smooth_model, sphere, target, n_points=200)
    plain = fit(energy, LBFGS(), max_iters=20)
    hybrid = hybrid_fit(smooth_model, ObservationSet.empty(), energy, LBFGS(), max_iters=20)
    np.testing.assert_array_equal(plain.alpha, hybrid.alpha)


def test_surface_fitter_closure(scaling_model, small_sphere):
    target = warp_mesh(scaling_model, small_sphere, np.array([0.5, 0.5, -0.5]))
    fitter = surface_fitter(small_sphere, eta=1e-4, tol=1e-10)
    fitted = fitter(scaling_model, target)
    assert fitted.n_vertices == small_sphere.n_vertices
    assert np.max(np.linalg.norm(fitted.vertices - target.vertices, axis=1)) < 0.1


def test_discrete_model_needs_its_own_points(scaling_model, small_sphere):
    model = discretize(scaling_model, small_sphere.vertices, small_sphere.triangles)
    with pytest.raises(UsageError):
        warp_points(model, small_sphere.vertices[:5], np.zeros(model.rank))


# ========================================
# Image fitting
# ========================================

def test_resample_with_zero_coefficients_returns_target(translation_model, blob_image):
    reference = blob_image()
    target = blob_image(center=(10.0, 12.0, 11.0))
    resampled = resample_target(translation_model, np.zeros(3), reference, target)
    np.testing.assert_allclose(resampled.voxels, target.voxels, atol=1e-12)


def test_image_fit_recovers_translation(translation_model, blob_image):
    reference = blob_image()
    target = blob_image(center=(13.0, 10.5, 12.3))
    energy = ImageEnergy.create(translation_model, reference, target, eta=1e-6, n_points=4000)
    result = fit(energy, LBFGS(), max_iters=200, tol=1e-10)

    before = resample_target(translation_model, np.zeros(3), reference, target)
    after = resample_target(translation_model, result.alpha, reference, target)
    error_before = np.mean(np.abs(before.voxels - reference.voxels))
    error_after = np.mean(np.abs(after.voxels - reference.voxels))
    assert error_after * 10.0 <= error_before
    shift = translation_model.displacements(np.zeros((1, 3)), result.alpha)[0]
    np.testing.assert_allclose(shift, [1.5, -1.0, 0.8], atol=0.1)


def test_image_energy_needs_points():
    image = ScalarImage(np.ones((3, 3, 3)))
    sampling = ModelSampling(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3, 2)))
    with pytest.raises(UsageError):
        ImageEnergy(sampling, image, image, eta=0.1)
