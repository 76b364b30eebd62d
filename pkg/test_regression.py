"""
Regression Tests
================
Observation sets, landmark pairing, full-space posteriors and the
coefficient-space posterior of low-rank models.
"""

import numpy as np
import pytest

from errors import ObservationError
from geometry import Landmark
from kernels import ZeroMean, gauss
from lowrank import build_lowrank, explicit
from regression import ObservationSet, observations_from_landmarks, posterior_full, posterior_lowrank


@pytest.fixture
def grid_points():
    """3 x 3 x 2 grid with spacing 2: gauss(1, 2) is well conditioned on it."""
    axes = np.meshgrid([0.0, 2.0, 4.0], [0.0, 2.0, 4.0], [0.0, 2.0], indexing="ij")
    return np.stack([a.ravel() for a in axes], axis=1)


# ========================================
# Observation sets
# ========================================

def test_observation_set_validation():
    with pytest.raises(ObservationError):
        ObservationSet(np.zeros((3, 3)), np.zeros((2, 3)))
    with pytest.raises(ObservationError):
        ObservationSet(np.zeros((1, 3)), np.zeros((1, 3)), noise_variance=-1.0)
    with pytest.raises(ObservationError):
        ObservationSet([[np.nan, 0.0, 0.0]], [[0.0, 0.0, 0.0]])


def test_repeated_observations():
    points = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
    same = ObservationSet(points, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    assert len(same) == 2
    np.testing.assert_array_equal(same.points, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    with pytest.raises(ObservationError):
        ObservationSet(points, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]])
    noisy = ObservationSet(points, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]], noise_variance=0.1)
    assert len(noisy) == 3


def test_landmark_pairing():
    reference = [Landmark("a", (0.0, 0.0, 0.0)), Landmark("b", (1.0, 1.0, 1.0)), Landmark("c", (5.0, 0.0, 0.0))]
    target = [Landmark("b", (1.0, 2.0, 1.0)), Landmark("a", (0.5, 0.0, 0.0)), Landmark("z", (9.0, 9.0, 9.0))]
    observations = observations_from_landmarks(reference, target, noise_variance=0.5)
    assert len(observations) == 2
    assert observations.noise_variance == 0.5
    np.testing.assert_array_equal(observations.points, [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    np.testing.assert_array_equal(observations.values, [[0.5, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_landmarks_without_shared_names():
    with pytest.raises(ObservationError):
        observations_from_landmarks([Landmark("a", (0.0, 0.0, 0.0))], [Landmark("b", (0.0, 0.0, 0.0))])
    assert observations_from_landmarks([], []).is_empty


# ========================================
# Full-space posterior
# ========================================

def test_noise_free_posterior_interpolates():
    kernel = gauss(1.0, 3.0)
    points = np.array([[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [0.0, 4.0, 1.0]])
    values = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.5], [0.2, 0.2, 0.2]])
    mean, posterior = posterior_full(ZeroMean(3), kernel, ObservationSet(points, values))
    np.testing.assert_allclose(mean(points), values, atol=1e-6)
    assert np.max(np.abs(posterior.diagonal(points))) < 1e-6
    assert posterior.mean() is mean
    far = np.array([[60.0, 60.0, 60.0]])
    np.testing.assert_allclose(mean(far), np.zeros((1, 3)), atol=1e-12)
    np.testing.assert_allclose(posterior.diagonal(far)[0], np.eye(3), atol=1e-12)


def test_posterior_kernel_is_consistent(grid_points):
    kernel = gauss(1.0, 2.0)
    observations = ObservationSet(grid_points[:4], np.ones((4, 3)), noise_variance=0.01)
    _, posterior = posterior_full(ZeroMean(3), kernel, observations)
    blocks = posterior.cross(grid_points, grid_points)
    diagonal = posterior.diagonal(grid_points)
    np.testing.assert_allclose(blocks[np.arange(18), np.arange(18)], diagonal, atol=1e-12)
    K = posterior.matrix(grid_points)
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    assert np.linalg.eigvalsh(K).min() > -1e-9


def test_one_dimensional_worked_example():
    kernel = gauss(1.0, 1.0, output_dim=1)
    mean, posterior = posterior_full(ZeroMean(1), kernel, ObservationSet([[0.0]], [[1.0]]))
    x = np.array([[1.0]])
    assert mean(x)[0, 0] == pytest.approx(np.exp(-1.0), abs=1e-12)
    assert posterior.diagonal(x)[0, 0, 0] == pytest.approx(1.0 - np.exp(-2.0), abs=1e-12)


def test_conditioning_twice_equals_conditioning_once(grid_points):
    kernel = gauss(1.0, 2.0)
    rng = np.random.default_rng(12)
    first = ObservationSet(grid_points[:3], rng.normal(size=(3, 3)), noise_variance=0.05)
    second = ObservationSet(grid_points[5:8], rng.normal(size=(3, 3)), noise_variance=0.05)

    mean_1, kernel_1 = posterior_full(ZeroMean(3), kernel, first)
    mean_12, kernel_12 = posterior_full(mean_1, kernel_1, second)
    mean_both, kernel_both = posterior_full(ZeroMean(3), kernel, first.concatenate(second))

    X = grid_points[8:]
    np.testing.assert_allclose(mean_12(X), mean_both(X), atol=1e-9)
    np.testing.assert_allclose(kernel_12.cross(X, X), kernel_both.cross(X, X), atol=1e-9)


def test_conditioning_only_removes_variance(grid_points):
    kernel = gauss(1.0, 2.0)
    observations = ObservationSet(grid_points[[1, 6, 13]], np.ones((3, 3)), noise_variance=0.01)
    _, posterior = posterior_full(ZeroMean(3), kernel, observations)
    reduction = kernel.matrix(grid_points) - posterior.matrix(grid_points)
    assert np.linalg.eigvalsh((reduction + reduction.T) / 2.0).min() >= -1e-9


def test_empty_observations_return_the_prior():
    kernel, mean = gauss(1.0, 1.0), ZeroMean(3)
    got_mean, got_kernel = posterior_full(mean, kernel, ObservationSet.empty())
    assert got_mean is mean
    assert got_kernel is kernel


def test_observation_dimension_must_match_kernel():
    observations = ObservationSet(np.zeros((1, 3)), np.zeros((1, 2)))
    with pytest.raises(ObservationError):
        posterior_full(ZeroMean(3), gauss(1.0, 1.0), observations)


# ========================================
# Coefficient-space posterior
# ========================================

def test_lowrank_posterior_recovers_coefficients():
    points = np.random.default_rng(4).uniform(-1.0, 1.0, size=(30, 3))
    gp = build_lowrank(gauss(1.0, 1.0), None, explicit(points), 30, 6)
    truth = np.array([1.0, -0.5, 0.3, 2.0, -1.2, 0.7])
    observed = points[:10]
    observations = ObservationSet(observed, gp.displacements(observed, truth), noise_variance=1e-8)
    alpha_bar, Sigma, posterior = posterior_lowrank(gp, observations)
    np.testing.assert_allclose(alpha_bar, truth, atol=1e-3)
    assert Sigma.shape == (6, 6)
    assert np.linalg.eigvalsh(Sigma).max() < 1e-3
    np.testing.assert_allclose(posterior.mean_at(observed), observations.values, atol=1e-4)


def test_lowrank_posterior_without_observations(smooth_model):
    alpha_bar, Sigma, posterior = posterior_lowrank(smooth_model, ObservationSet.empty())
    np.testing.assert_array_equal(alpha_bar, np.zeros(smooth_model.rank))
    np.testing.assert_array_equal(Sigma, np.eye(smooth_model.rank))
    assert posterior is smooth_model


def test_lowrank_posterior_shrinks_variance(smooth_model, sphere):
    observed = sphere.vertices[:3]
    observations = ObservationSet(observed, np.ones((3, 3)), noise_variance=0.01)
    _, Sigma, posterior = posterior_lowrank(smooth_model, observations)
    assert np.linalg.eigvalsh(Sigma).max() <= 1.0 + 1e-12
    assert posterior.eigenvalues.sum() < smooth_model.eigenvalues.sum()
    assert posterior.total_variance < smooth_model.total_variance


def test_full_rank_posteriors_agree(grid_points):
    kernel = gauss(1.0, 2.0)
    gp = build_lowrank(kernel, None, explicit(grid_points), 18, 54)
    assert gp.rank == 54
    values = np.random.default_rng(8).normal(size=(5, 3))
    observations = ObservationSet(grid_points[[0, 4, 8, 11, 17]], values, noise_variance=1e-4)

    _, _, lowrank_posterior = posterior_lowrank(gp, observations)
    full_mean, full_kernel = posterior_full(ZeroMean(3), kernel, observations)

    np.testing.assert_allclose(lowrank_posterior.mean_at(grid_points), full_mean(grid_points), atol=1e-6)
    np.testing.assert_allclose(lowrank_posterior.covariance(grid_points, grid_points),
                               full_kernel.cross(grid_points, grid_points), atol=1e-6)


def test_lowrank_model_of_posterior_kernel_carries_its_mean(grid_points):
    values = np.random.default_rng(9).normal(size=(4, 3))
    observations = ObservationSet(grid_points[:4], values, noise_variance=1e-4)
    _, posterior = posterior_full(ZeroMean(3), gauss(1.0, 2.0), observations)
    gp = build_lowrank(posterior, None, explicit(grid_points), 18, 10)
    np.testing.assert_allclose(gp.mean_at(grid_points[:4]), values, atol=1e-3)
