"""
Analytic Spectrum Tests
=======================
Closed-form eigenpairs of the 1D Gaussian kernel under a Gaussian measure and
the Nyström comparison built on them.
"""

import csv
import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss

from analytic import AnalyticSpectrum, compare_to_nystrom, write_comparison_csv, write_spectrum_csv
from errors import UsageError
from kernels import gauss
from lowrank import build_lowrank, gaussian_1d, interval_1d


def _expectation(f, s2: float, degree: int = 120) -> float:
    """E[f(Y)] for Y ~ N(0, s2) by Gauss-Hermite quadrature."""
    nodes, weights = hermegauss(degree)
    return float(np.sum(weights * f(math.sqrt(s2) * nodes)) / math.sqrt(2.0 * math.pi))


@pytest.fixture
def nystrom_1d():
    """Dense Nyström model of exp(-(x - y)^2) under N(0, 1), n = 1000, rank 10."""
    kernel = gauss(1.0, 1.0, output_dim=1)
    return build_lowrank(kernel, None, gaussian_1d(1.0, seed=0), 1000, 10, method="dense")


# ========================================
# Closed form
# ========================================

@pytest.mark.parametrize("sigma,s2", [(1.0, 1.0), (0.5, 2.0), (3.0, 0.25)])
def test_probability_eigenvalues_sum_to_kernel_variance(sigma, s2):
    spectrum = AnalyticSpectrum(sigma, s2)
    assert spectrum.total_variance() == pytest.approx(1.0, rel=1e-12)
    partial = sum(spectrum.probability_eigenvalue(i) for i in range(400))
    assert partial == pytest.approx(1.0, rel=1e-9)


def test_unit_bandwidth_constants():
    spectrum = AnalyticSpectrum(1.0, 1.0)
    assert spectrum.decay_ratio == pytest.approx(0.5)
    assert spectrum.probability_eigenvalue(0) == pytest.approx(0.5)
    assert spectrum.probability_eigenvalue(3) == pytest.approx(0.0625)


def test_decay_ratio_direction():
    # wider measure decays slower, wider kernel decays faster
    ratios = [AnalyticSpectrum(1.0, s2).decay_ratio for s2 in (0.25, 1.0, 4.0)]
    assert ratios[0] < ratios[1] < ratios[2]
    ratios = [AnalyticSpectrum(sigma, 1.0).decay_ratio for sigma in (0.2, 1.0, 3.0)]
    assert ratios[0] > ratios[1] > ratios[2]
    narrow, wide = AnalyticSpectrum(1.0, 0.25), AnalyticSpectrum(1.0, 4.0)
    assert narrow.probability_eigenvalue(5) < wide.probability_eigenvalue(5)


@pytest.mark.parametrize("sigma,s2", [(1.0, 1.0), (0.7, 1.5)])
def test_normalized_eigenfunctions_are_orthonormal(sigma, s2):
    spectrum = AnalyticSpectrum(sigma, s2)
    for i in range(6):
        for j in range(i, 6):
            inner = _expectation(lambda y: spectrum.normalized_eigenfunction(i, y)
                                 * spectrum.normalized_eigenfunction(j, y), s2)
            assert inner == pytest.approx(1.0 if i == j else 0.0, abs=1e-8)


def test_raw_and_normalized_eigenfunctions_are_proportional():
    spectrum = AnalyticSpectrum(0.8, 1.2)
    x = np.linspace(-3.0, 3.0, 12)
    for i in (0, 2, 5):
        ratio = spectrum.eigenfunction(i, x) / spectrum.normalized_eigenfunction(i, x)
        finite = np.isfinite(ratio)
        np.testing.assert_allclose(ratio[finite], ratio[finite][0], rtol=1e-10)


def test_eigen_equation_holds():
    sigma, s2 = 1.0, 1.0
    spectrum = AnalyticSpectrum(sigma, s2)
    for i in range(5):
        for x in (-1.3, 0.0, 0.4, 2.1):
            integral = _expectation(lambda y: np.exp(-(x - y) ** 2 / sigma ** 2)
                                    * spectrum.normalized_eigenfunction(i, y), s2)
            expected = spectrum.probability_eigenvalue(i) * spectrum.normalized_eigenfunction(i, x)
            assert integral == pytest.approx(float(expected), abs=1e-9)


def test_index_limits():
    spectrum = AnalyticSpectrum(1.0, 1.0)
    spectrum.eigenfunction(20, [0.5])
    spectrum.normalized_eigenfunction(60, [0.5])
    with pytest.raises(UsageError):
        spectrum.eigenfunction(21, [0.5])
    with pytest.raises(UsageError):
        spectrum.normalized_eigenfunction(61, [0.5])
    with pytest.raises(UsageError):
        spectrum.eigenvalue(-1)


def test_rejects_non_positive_parameters():
    with pytest.raises(UsageError):
        AnalyticSpectrum(0.0, 1.0)
    with pytest.raises(UsageError):
        AnalyticSpectrum(1.0, -1.0)


# ========================================
# Nyström comparison
# ========================================

def test_nystrom_matches_closed_form(nystrom_1d):
    rows = compare_to_nystrom(AnalyticSpectrum(1.0, 1.0), nystrom_1d, 8)
    assert [row.index for row in rows] == list(range(9))
    for row in rows:
        assert row.eigenvalue_error <= 0.02
    for row in rows[:4]:
        assert row.eigenfunction_error <= 0.1


def test_slow_decay_needs_more_points():
    spectrum = AnalyticSpectrum(0.2, 1.0)
    kernel = gauss(1.0, 0.2, output_dim=1)
    errors = {}
    for n in (200, 1000):
        gp = build_lowrank(kernel, None, gaussian_1d(1.0, seed=0), n, 20, method="dense")
        rows = compare_to_nystrom(spectrum, gp, 19)
        errors[n] = np.mean([row.eigenfunction_error for row in rows[10:]])
    assert errors[200] > errors[1000]


def test_missing_indices_report_nan(nystrom_1d):
    rows = compare_to_nystrom(AnalyticSpectrum(1.0, 1.0), nystrom_1d, 12)
    assert len(rows) == 13
    assert math.isnan(rows[12].nystrom_eigenvalue)
    assert rows[12].analytic_eigenvalue == pytest.approx(0.5 ** 13)


def test_comparison_needs_one_dimensional_model(smooth_model):
    with pytest.raises(UsageError):
        compare_to_nystrom(AnalyticSpectrum(1.0, 1.0), smooth_model, 3)


def test_comparison_also_rejects_vector_output_in_one_dimension():
    gp = build_lowrank(gauss(1.0, 1.0, output_dim=2), None, interval_1d(), 20, 4)
    with pytest.raises(UsageError):
        compare_to_nystrom(AnalyticSpectrum(1.0, 1.0), gp, 3)


# ========================================
# Reports
# ========================================

def test_comparison_csv(tmp_path, nystrom_1d):
    rows = compare_to_nystrom(AnalyticSpectrum(1.0, 1.0), nystrom_1d, 5)
    path = write_comparison_csv(tmp_path / "out" / "cmp.csv", rows)
    with path.open(newline="") as handle:
        table = list(csv.reader(handle))
    assert table[0] == ["i", "lambda_analytic", "lambda_nystrom", "rel_err", "func_err"]
    assert len(table) == 7
    assert float(table[1][1]) == pytest.approx(0.5)


def test_spectrum_csv(tmp_path):
    path = write_spectrum_csv(tmp_path / "spectrum.csv", AnalyticSpectrum(1.0, 1.0), 20)
    with path.open(newline="") as handle:
        table = list(csv.reader(handle))
    assert len(table) == 21
    fractions = [float(row[3]) for row in table[1:]]
    assert all(b >= a for a, b in zip(fractions, fractions[1:]))
    assert fractions[-1] == pytest.approx(1.0 - 0.5 ** 20, rel=1e-6)
