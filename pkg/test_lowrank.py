"""
Low-Rank Model Tests
====================
Domain samplers, eigensolvers, Nyström construction, rank selection, the
accuracy bounds, the projection-error experiment and model files.
"""

import math

import numpy as np
import pytest

from analytic import AnalyticSpectrum
from errors import (
    CholeskyError,
    CoefficientError,
    FileFormatError,
    InsufficientRankError,
    InsufficientSpectrumError,
    UsageError,
)
from geometry import ScalarImage
from kernels import (
    BumpWeight,
    DeformationFieldSet,
    ScalarConstant,
    block_matrix,
    diag,
    empirical,
    gauss,
    kernel_from_text,
    localize,
    ones,
)
from lowrank import (
    build_lowrank,
    choose_rank,
    confidence_for_tau,
    dense_eigh,
    eigenfunction_bound,
    eigenvalue_bound,
    eigenvalue_sum_bound,
    explicit,
    gaussian_1d,
    image_box,
    interval_1d,
    jittered_cholesky,
    load_lowrank,
    points_for_eigenvalue_accuracy,
    projection_error_experiment,
    randomized_eigh,
    save_lowrank,
    select_model,
    surface,
    tau_for_confidence,
    total_variance,
)


@pytest.fixture
def spread_points():
    """Six well-separated points, so gauss(1, 1) has a well-conditioned Gram matrix."""
    return np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0],
                     [0.0, 0.0, 3.0], [3.0, 3.0, 0.0], [0.0, 3.0, 3.0]])


# ========================================
# Samplers
# ========================================

def test_interval_sampler_is_stratified():
    x = interval_1d(2.0, 4.0, seed=1).sample(50)
    assert x.shape == (50, 1)
    assert np.all((x >= 2.0) & (x <= 4.0))
    strata = np.floor((x[:, 0] - 2.0) / 2.0 * 50).astype(int)
    np.testing.assert_array_equal(np.sort(strata), np.arange(50))


def test_samplers_are_seeded():
    np.testing.assert_array_equal(gaussian_1d(2.0, seed=3).sample(20), gaussian_1d(2.0, seed=3).sample(20))
    assert not np.array_equal(gaussian_1d(2.0, seed=3).sample(20), gaussian_1d(2.0, seed=4).sample(20))


def test_explicit_sampler():
    pts = np.arange(30, dtype=float).reshape(10, 3)
    sampler = explicit(pts, seed=2)
    np.testing.assert_array_equal(sampler.sample(None), pts)
    np.testing.assert_array_equal(sampler.sample(10), pts)
    subset = sampler.sample(4)
    assert len(np.unique(subset, axis=0)) == 4
    with pytest.raises(UsageError):
        sampler.sample(11)


def test_image_box_sampler_respects_mask():
    mask = np.zeros((5, 5, 5), dtype=bool)
    mask[1:3, 1:3, 1:3] = True
    image = ScalarImage(np.ones((5, 5, 5)), mask=mask)
    points = image_box(image, seed=0).sample(6)
    allowed = {tuple(p) for p in image.domain_points()}
    assert all(tuple(p) in allowed for p in points)
    with pytest.raises(UsageError):
        image_box(image.with_mask(np.zeros((5, 5, 5), dtype=bool)))


# ========================================
# Linear algebra
# ========================================

def test_randomized_solver_matches_dense_on_low_rank_matrix():
    A = np.random.default_rng(0).normal(size=(200, 10))
    K = A @ A.T
    dense_values, dense_vectors = dense_eigh(K, 5)
    values, vectors = randomized_eigh(K, 5, oversampling=10, power_iters=2)
    np.testing.assert_allclose(values, dense_values, rtol=1e-8)
    overlap = np.abs(np.sum(vectors * dense_vectors, axis=0))
    np.testing.assert_allclose(overlap, np.ones(5), atol=1e-6)


def test_randomized_solver_matches_dense_on_kernel_gram():
    X = interval_1d(0.0, 1.0, seed=0).sample(200)
    K = gauss(1.0, 0.3, output_dim=1).matrix(X)
    dense_values, dense_vectors = dense_eigh(K, 8)
    values, vectors = randomized_eigh(K, 8, oversampling=10, power_iters=2)
    np.testing.assert_allclose(values, dense_values, rtol=1e-6)
    overlap = np.abs(np.sum(vectors * dense_vectors, axis=0))
    np.testing.assert_allclose(overlap, np.ones(8), atol=1e-6)


def test_jittered_cholesky():
    K = np.ones((5, 5))
    L, jitter = jittered_cholesky(K)
    assert jitter > 0
    np.testing.assert_allclose(L @ L.T, K + jitter * np.eye(5), atol=1e-12)
    with pytest.raises(CholeskyError):
        jittered_cholesky(np.diag([1.0, -1.0]))


# ========================================
# Nyström construction
# ========================================

def test_full_rank_model_reproduces_kernel_at_nystrom_points(spread_points):
    kernel = gauss(1.0, 1.0)
    gp = build_lowrank(kernel, None, explicit(spread_points), 6, 18)
    assert gp.rank == 18
    covariance = gp.covariance(spread_points, spread_points)
    np.testing.assert_allclose(covariance, kernel.cross(spread_points, spread_points), atol=1e-8)


def test_eigenfunctions_have_unit_empirical_norm(smooth_model):
    basis = smooth_model.basis(smooth_model.points)
    norms = np.sum(basis ** 2, axis=(0, 1)) / smooth_model.n
    np.testing.assert_allclose(norms, np.ones(smooth_model.rank), rtol=1e-8)


def test_eigenvalues_descend_and_follow_sign_convention(smooth_model):
    assert np.all(np.diff(smooth_model.eigenvalues) <= 0)
    basis = smooth_model.basis(smooth_model.points).reshape(-1, smooth_model.rank)
    pivots = basis[np.argmax(np.abs(basis), axis=0), np.arange(smooth_model.rank)]
    assert np.all(pivots > 0)


def test_build_is_deterministic(sphere):
    a = build_lowrank(gauss(1.0, 5.0), None, surface(sphere, seed=3), 120, 10)
    b = build_lowrank(gauss(1.0, 5.0), None, surface(sphere, seed=3), 120, 10)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_rank_is_reduced_below_eigenvalue_cutoff(spread_points):
    gp = build_lowrank(ones(), None, explicit(spread_points), 6, 5)
    assert gp.rank == 1
    assert gp.eigenvalues[0] == pytest.approx(3.0)


def test_constant_identity_kernel_has_rank_three(spread_points):
    kernel = diag(2.5 * np.eye(3), ScalarConstant(1.0))
    gp = build_lowrank(kernel, None, explicit(spread_points), 6, 10)
    assert gp.rank == 3
    np.testing.assert_allclose(gp.eigenvalues, [2.5, 2.5, 2.5], rtol=1e-10)
    far = np.array([[40.0, -7.0, 2.0]])
    np.testing.assert_allclose(gp.covariance(far[0], spread_points[2]), 2.5 * np.eye(3), atol=1e-10)


def test_empirical_kernel_rank_is_below_field_count(small_sphere):
    fields = np.random.default_rng(6).normal(size=(5, small_sphere.n_vertices, 3))
    kernel = empirical(DeformationFieldSet(small_sphere.vertices, fields))
    gp = build_lowrank(kernel, None, explicit(small_sphere.vertices), small_sphere.n_vertices, 10)
    assert gp.rank == 4


def test_impossible_rank(spread_points):
    with pytest.raises(InsufficientRankError):
        build_lowrank(gauss(1.0, 1.0), None, explicit(spread_points), 6, 19)
    with pytest.raises(UsageError):
        build_lowrank(gauss(1.0, 1.0), None, explicit(spread_points), 6, 0)


def test_displacements_are_mean_plus_scaled_basis(smooth_model):
    rng = np.random.default_rng(5)
    alpha = rng.normal(size=smooth_model.rank)
    x = rng.uniform(-10.0, 10.0, size=(7, 3))
    expected = smooth_model.mean_at(x) + smooth_model.scaled_basis(x) @ alpha
    np.testing.assert_allclose(smooth_model.displacements(x, alpha), expected, atol=1e-12)
    np.testing.assert_allclose(smooth_model.instance(alpha).warp(x), x + expected, atol=1e-12)
    with pytest.raises(CoefficientError):
        smooth_model.displacements(x, alpha[:-1])


def test_samples_are_seeded(smooth_model):
    np.testing.assert_array_equal(smooth_model.sample_coefficients(9), smooth_model.sample_coefficients(9))


def test_sample_covariance_converges_to_mercer_sum(smooth_model, sphere):
    x = sphere.vertices[[0, 40, 200]]
    count = 3000
    samples = np.array([smooth_model.sample(seed)(x).ravel() for seed in range(count)])
    empirical_cov = samples.T @ samples / count
    expected = block_matrix(smooth_model.covariance(x, x))
    variances = np.diag(expected)
    standard_error = np.sqrt((np.outer(variances, variances) + expected ** 2) / count)
    assert np.all(np.abs(empirical_cov - expected) <= 4.0 * standard_error + 1e-12)


def test_expected_truncation_error_is_the_tail_sum(smooth_model):
    r = 4
    short = smooth_model.truncated(r)
    X = smooth_model.points
    tail = smooth_model.eigenvalues[r:].sum()

    rng = np.random.default_rng(3)
    count = 1000
    errors = np.empty(count)
    for k in range(count):
        alpha = rng.standard_normal(smooth_model.rank)
        diff = smooth_model.displacements(X, alpha) - short.displacements(X, alpha[:r])
        errors[k] = np.mean(np.sum(diff * diff, axis=1))
    spread = math.sqrt(2.0 * np.sum(smooth_model.eigenvalues[r:] ** 2) / count)
    assert abs(errors.mean() - tail) <= 4.0 * spread

    full_trace = np.trace(smooth_model.covariance(X, X), axis1=2, axis2=3).diagonal()
    short_trace = np.trace(short.covariance(X, X), axis1=2, axis2=3).diagonal()
    assert np.mean(full_trace - short_trace) == pytest.approx(tail, rel=1e-8)


def test_truncated_mercer_sum_reconstructs_kernel():
    s = 2.0
    kernel = gauss(s, 0.5, output_dim=1)
    gp = select_model(kernel, interval_1d(0.0, 1.0, seed=0), 0.999, n=200)
    rng = np.random.default_rng(4)
    x, y = rng.uniform(0.0, 1.0, size=(50, 1)), rng.uniform(0.0, 1.0, size=(50, 1))
    error = np.abs(gp.covariance(x, y) - kernel.cross(x, y))
    assert error.max() <= 1e-2 * s


def test_truncation(smooth_model):
    small = smooth_model.truncated(4)
    assert small.rank == 4
    np.testing.assert_array_equal(small.eigenvalues, smooth_model.eigenvalues[:4])
    with pytest.raises(UsageError):
        smooth_model.truncated(11)


# ========================================
# Rank selection
# ========================================

def test_choose_rank():
    eigenvalues = [0.5, 0.3, 0.1, 0.05]
    assert choose_rank(eigenvalues, 1.0, 0.7) == 2
    assert choose_rank(eigenvalues, 1.0, 0.85) == 3
    with pytest.raises(InsufficientSpectrumError) as info:
        choose_rank(eigenvalues, 1.0, 0.99)
    assert str(info.value).startswith("insufficient spectrum")


def test_total_variance():
    sampler = interval_1d(0.0, 1.0)
    assert total_variance(gauss(2.0, 1.0), explicit(np.zeros((3, 3))), 3) == pytest.approx(6.0)
    localized = localize(BumpWeight([0.0], 1.0), gauss(1.0, 1.0, output_dim=1))
    x = sampler.sample(400)[:, 0]
    assert total_variance(localized, sampler, 400) == pytest.approx(np.mean(np.exp(-2.0 * x * x)))


def test_total_variance_matches_closed_form_spectrum():
    spectrum = AnalyticSpectrum(1.0, 1.0)
    closed_form = sum(spectrum.probability_eigenvalue(i) for i in range(200))
    kernel = gauss(1.0, 1.0, output_dim=1)
    assert total_variance(kernel, gaussian_1d(1.0), 100) == pytest.approx(closed_form, rel=0.01)
    gp = build_lowrank(kernel, None, gaussian_1d(1.0, seed=0), 400, 30, method="dense")
    assert gp.eigenvalues.sum() == pytest.approx(closed_form, rel=0.01)


def test_select_model_keeps_smallest_sufficient_rank():
    kernel = gauss(1.0, 0.5, output_dim=1)
    gp = select_model(kernel, interval_1d(0.0, 1.0), 0.99, n=200, max_rank=50)
    assert gp.eigenvalues.sum() / gp.total_variance > 0.99
    assert gp.eigenvalues[:-1].sum() / gp.total_variance <= 0.99


# ========================================
# Accuracy bounds
# ========================================

def test_eigenvalue_bound_values():
    tau = math.log(200.0)
    assert tau_for_confidence(0.99) == pytest.approx(tau)
    assert confidence_for_tau(tau) == pytest.approx(0.99)
    assert eigenvalue_bound(1.0, tau, 1000) == pytest.approx(0.206, abs=0.001)
    assert eigenvalue_bound(1.0, tau, 200) == pytest.approx(0.460, abs=0.001)
    assert eigenvalue_sum_bound(1.0, tau, 1000) == pytest.approx(8.0 * tau / 1000)


def test_eigenfunction_bound():
    tau = math.log(200.0)
    min_n, bound = eigenfunction_bound(1.0, tau, 10000, 0.5)
    assert min_n == math.floor(128.0 * tau / 0.25) + 1
    assert bound == pytest.approx(32.0 * tau / (0.25 * 10000))


def test_points_for_eigenvalue_accuracy():
    tau = math.log(200.0)
    n = points_for_eigenvalue_accuracy(1.0, tau, 0.1)
    assert eigenvalue_bound(1.0, tau, n) <= 0.1
    assert eigenvalue_bound(1.0, tau, n - 1) > 0.1


def test_bounds_reject_bad_arguments():
    with pytest.raises(UsageError):
        eigenvalue_bound(0.0, 1.0, 10)
    with pytest.raises(UsageError):
        tau_for_confidence(1.0)
    with pytest.raises(UsageError):
        eigenfunction_bound(1.0, 1.0, 10, 0.0)


# ========================================
# Projection error
# ========================================

def test_smooth_kernel_projection_error_is_small():
    kernel = gauss(1.0, 0.5, output_dim=1)
    gp = select_model(kernel, interval_1d(0.0, 1.0, seed=0), 0.99, n=200)
    error = projection_error_experiment(kernel, gp, interval_1d(0.0, 1.0, seed=1), 200, 20, seed=0)
    assert error <= 0.015


def test_near_white_kernel_projection_error_is_large():
    smooth = select_model(gauss(1.0, 0.5, output_dim=1), interval_1d(0.0, 1.0, seed=0), 0.99, n=200)
    kernel = gauss(1.0, 0.005, output_dim=1)
    gp = build_lowrank(kernel, None, interval_1d(0.0, 1.0, seed=0), 200, smooth.rank)
    error = projection_error_experiment(kernel, gp, interval_1d(0.0, 1.0, seed=1), 200, 20, seed=0)
    assert error > 0.01


# ========================================
# Model files
# ========================================

def test_save_and_load_reproduce_the_model(tmp_path, smooth_model):
    path = save_lowrank(smooth_model, tmp_path / "model.gpm")
    assert (tmp_path / "model.points.bin").exists()
    loaded = load_lowrank(path)
    assert loaded.rank == smooth_model.rank
    x = np.random.default_rng(1).uniform(-10.0, 10.0, size=(9, 3))
    alpha = np.linspace(-1.0, 1.0, smooth_model.rank)
    np.testing.assert_array_equal(loaded.displacements(x, alpha), smooth_model.displacements(x, alpha))


def test_in_memory_empirical_model_cannot_be_saved(tmp_path, scaling_model):
    with pytest.raises(UsageError):
        save_lowrank(scaling_model, tmp_path / "model.gpm")


def test_load_rejects_other_manifests(tmp_path):
    path = tmp_path / "model.gpm"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(FileFormatError):
        load_lowrank(path)


def test_model_from_kernel_text_survives_files(tmp_path):
    kernel = kernel_from_text("sum(gauss(1, 0.3, 1), scale(0.5, gauss(1, 0.05, 1)))")
    gp = build_lowrank(kernel, None, interval_1d(0.0, 1.0), 80, 12)
    loaded = load_lowrank(save_lowrank(gp, tmp_path / "one_d.gpm"))
    x = np.linspace(0.0, 1.0, 11)[:, None]
    np.testing.assert_allclose(loaded.basis(x), gp.basis(x), rtol=0, atol=0)
