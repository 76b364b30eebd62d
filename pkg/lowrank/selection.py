"""
Rank and Point-Count Selection
==============================
Total-variance estimation, rank choice for a variance fraction, and the
probabilistic accuracy bounds for Nyström eigenvalues and eigenspaces.

Bounds hold with confidence 1 - 2 exp(-tau), where kappa = sup_x k(x, x).
"""

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from config import NystromConfig
from errors import InsufficientSpectrumError, UsageError
from kernels import MatrixKernel, MeanFunction
from .model import LowRankGP, build_lowrank
from .samplers import DomainSampler

logger = logging.getLogger("GPMorph.LowRank")


def total_variance(kernel: MatrixKernel, sampler: DomainSampler, n: int) -> float:
    """
    Integral of trace k(x, x) over the sampler's measure.

    Stationary kernels have a constant integrand, so one point gives the exact
    value; otherwise this is the Monte-Carlo mean over n sampled points.
    """
    if n < 1:
        raise UsageError(f"need at least one point, got {n}")
    if kernel.stationary:
        return float(kernel.trace_diagonal(sampler.sample(1))[0])
    return float(np.mean(kernel.trace_diagonal(sampler.sample(n))))


def choose_rank(eigenvalues: Sequence[float], variance: float, p: float) -> int:
    """
    Smallest m whose leading eigenvalues explain more than fraction p of the variance.

    Raises:
        InsufficientSpectrumError: all available eigenvalues together stay at or below p.
    """
    if not 0 < p < 1:
        raise UsageError(f"variance fraction must lie in (0, 1), got {p}")
    if not variance > 0:
        raise UsageError(f"total variance must be positive, got {variance}")
    fractions = np.cumsum(np.asarray(eigenvalues, dtype=np.float64)) / variance
    above = np.nonzero(fractions > p)[0]
    if len(above) == 0:
        reached = fractions[-1] if len(fractions) else 0.0
        raise InsufficientSpectrumError(
            f"insufficient spectrum: {len(fractions)} eigenvalues explain {reached:.4f} "
            f"of the variance, {p} requested (increase n or the rank ceiling)"
        )
    return int(above[0]) + 1


# ========================================
# Accuracy bounds
# ========================================

def _check_bound_args(kappa: float, tau: float, n: Optional[float] = None) -> None:
    if not kappa > 0:
        raise UsageError(f"kappa must be positive, got {kappa}")
    if not tau > 0:
        raise UsageError(f"tau must be positive, got {tau}")
    if n is not None and n < 1:
        raise UsageError(f"n must be at least 1, got {n}")


def tau_for_confidence(confidence: float) -> float:
    """tau with 1 - 2 exp(-tau) = confidence."""
    if not 0 < confidence < 1:
        raise UsageError(f"confidence must lie in (0, 1), got {confidence}")
    return math.log(2.0 / (1.0 - confidence))


def confidence_for_tau(tau: float) -> float:
    return 1.0 - 2.0 * math.exp(-tau)


def eigenvalue_bound(kappa: float, tau: float, n: int) -> float:
    """Uniform bound 2 sqrt(2) kappa sqrt(tau) / sqrt(n) on |lambda_i - lambda_hat_i|."""
    _check_bound_args(kappa, tau, n)
    return 2.0 * math.sqrt(2.0) * kappa * math.sqrt(tau) / math.sqrt(n)


def eigenvalue_sum_bound(kappa: float, tau: float, n: int) -> float:
    """Bound 8 kappa^2 tau / n on sum_i (lambda_i - lambda_hat_i)^2."""
    _check_bound_args(kappa, tau, n)
    return 8.0 * kappa ** 2 * tau / n


def eigenfunction_bound(kappa: float, tau: float, n: int, gap: float) -> Tuple[int, float]:
    """
    Eigenspace projection bound for the leading m eigenfunctions.

    Args:
        gap: lambda_m - lambda_{m+1}.

    Returns:
        (smallest n for which the bound applies, bound 32 kappa^2 tau / (gap^2 n)).
    """
    _check_bound_args(kappa, tau, n)
    if not gap > 0:
        raise UsageError(f"eigenvalue gap must be positive, got {gap}")
    min_n = math.floor(128.0 * kappa ** 2 * tau / gap ** 2) + 1
    if n < min_n:
        logger.warning(f"n={n} is below the {min_n} points the eigenfunction bound requires")
    return min_n, 32.0 * kappa ** 2 * tau / (gap ** 2 * n)


def points_for_eigenvalue_accuracy(kappa: float, tau: float, tolerance: float) -> int:
    """Smallest n whose eigenvalue bound is at most `tolerance`."""
    _check_bound_args(kappa, tau)
    if not tolerance > 0:
        raise UsageError(f"tolerance must be positive, got {tolerance}")
    n = max(1, math.ceil(8.0 * kappa ** 2 * tau / tolerance ** 2))
    while n > 1 and eigenvalue_bound(kappa, tau, n - 1) <= tolerance:
        n -= 1
    while eigenvalue_bound(kappa, tau, n) > tolerance:
        n += 1
    return n


# ========================================
# Model selection
# ========================================

def select_model(kernel: MatrixKernel, sampler: DomainSampler, p: float,
                 n: int = NystromConfig.DEFAULT_POINTS,
                 max_rank: int = NystromConfig.DEFAULT_MAX_RANK,
                 mean: Optional[MeanFunction] = None, seed: int = 0,
                 method: str = "auto", **kwargs) -> LowRankGP:
    """
    Build with a rank ceiling, then keep the smallest rank explaining fraction p.

    Raises:
        InsufficientSpectrumError: the ceiling (or the kernel's rank) is too low for p.
    """
    ceiling = min(max_rank, n * kernel.output_dim)
    gp = build_lowrank(kernel, mean, sampler, n, ceiling, seed=seed, method=method, **kwargs)
    variance = total_variance(kernel, sampler, n)
    rank = choose_rank(gp.eigenvalues, variance, p)
    logger.info(f"Selected rank {rank} of {gp.rank} for variance fraction {p}")
    return gp.truncated(rank)
