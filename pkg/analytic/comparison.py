"""
Nyström-versus-closed-form comparison for 1D Gaussian-kernel models, and the
CSV reports the CLI writes from it.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from config import OutputConfig
from errors import UsageError
from lowrank import LowRankGP
from .spectrum import MAX_NORMALIZED_INDEX, AnalyticSpectrum

logger = logging.getLogger("GPMorph.Analytic")

PathLike = Union[str, Path]


@dataclass(frozen=True)
class EigenComparison:
    index: int
    analytic_eigenvalue: float
    nystrom_eigenvalue: float
    eigenvalue_error: float     # relative
    eigenfunction_error: float  # RMS on the Nyström points after normalization


def _unit(values: np.ndarray) -> np.ndarray:
    return values / np.sqrt(np.mean(values * values))


def compare_to_nystrom(spectrum: AnalyticSpectrum, gp: LowRankGP, i_max: int) -> List[EigenComparison]:
    """
    Compare a 1D Nyström model against the closed form for indices 0..i_max.

    Eigenvalues are compared with the probability-measure eigenvalues the
    Nyström estimates converge to. Eigenfunctions are evaluated on the Nyström
    points, scaled to unit empirical L2 norm and sign-aligned by their inner
    product. Indices the model lacks, or beyond the normalized eigenfunction
    range, report NaN.
    """
    if gp.input_dim != 1 or gp.output_dim != 1:
        raise UsageError("analytic comparison needs a 1D model with scalar output")
    if i_max < 0:
        raise UsageError(f"i_max must be non-negative, got {i_max}")

    x = gp.points[:, 0]
    count = min(i_max + 1, gp.rank)
    basis = gp.basis(gp.points)[:, 0, :count] if count else np.empty((len(x), 0))
    rows = []
    for i in range(i_max + 1):
        analytic = spectrum.probability_eigenvalue(i)
        if i >= count:
            rows.append(EigenComparison(i, analytic, float("nan"), float("nan"), float("nan")))
            continue
        nystrom = float(gp.eigenvalues[i])
        function_error = float("nan")
        if i <= MAX_NORMALIZED_INDEX:
            exact = _unit(spectrum.normalized_eigenfunction(i, x))
            approx = _unit(basis[:, i])
            if exact @ approx < 0:
                approx = -approx
            function_error = float(np.sqrt(np.mean((exact - approx) ** 2)))
        rows.append(EigenComparison(i, analytic, nystrom, abs(nystrom - analytic) / analytic, function_error))
    logger.info(f"Compared {count} Nyström eigenpairs (n={gp.n}) against the closed form")
    return rows


def _fmt(value: float) -> str:
    return format(float(value), OutputConfig.FLOAT_FORMAT)


def write_comparison_csv(path: PathLike, rows: Sequence[EigenComparison]) -> Path:
    path = OutputConfig.ensure_parent(Path(path))
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["i", "lambda_analytic", "lambda_nystrom", "rel_err", "func_err"])
        for row in rows:
            writer.writerow([row.index, _fmt(row.analytic_eigenvalue), _fmt(row.nystrom_eigenvalue),
                             _fmt(row.eigenvalue_error), _fmt(row.eigenfunction_error)])
    return path


def write_spectrum_csv(path: PathLike, spectrum: AnalyticSpectrum, count: int) -> Path:
    """Closed-form spectrum table: i, eigenvalue, probability eigenvalue, cumulative fraction."""
    path = OutputConfig.ensure_parent(Path(path))
    total = spectrum.total_variance()
    cumulative = 0.0
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["i", "lambda", "lambda_probability", "cumulative_fraction"])
        for i in range(count):
            probability = spectrum.probability_eigenvalue(i)
            cumulative += probability
            writer.writerow([i, _fmt(spectrum.eigenvalue(i)), _fmt(probability), _fmt(cumulative / total)])
    return path
