"""
Symmetric eigensolvers for Gram matrices: dense (LAPACK) and randomized
(Gaussian range sketch with power iterations and QR re-orthonormalization).
Both return the leading eigenpairs in descending order.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from config import NystromConfig
from errors import EigenSolverError, UsageError

logger = logging.getLogger("GPMorph.LowRank")


def dense_eigh(K: np.ndarray, r: int) -> Tuple[np.ndarray, np.ndarray]:
    """Top-r eigenpairs of a symmetric matrix by full LAPACK decomposition."""
    order = K.shape[0]
    try:
        values, vectors = linalg.eigh(K, subset_by_index=[order - r, order - 1])
    except (linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"dense eigensolver failed: {e}") from e
    return values[::-1], vectors[:, ::-1]


def randomized_eigh(K: np.ndarray, r: int,
                    oversampling: int = NystromConfig.OVERSAMPLING,
                    power_iters: int = NystromConfig.POWER_ITERS,
                    rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Top-r eigenpairs of a symmetric PSD matrix by randomized range finding.

    Args:
        K: Symmetric (m, m) matrix.
        r: Number of eigenpairs.
        oversampling: Extra sketch columns beyond r.
        power_iters: Subspace iterations sharpening the sketch.
        rng: Generator for the Gaussian test matrix.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    order = K.shape[0]
    width = min(order, r + oversampling)
    try:
        omega = rng.standard_normal((order, width))
        Q, _ = linalg.qr(K @ omega, mode="economic")
        for _ in range(power_iters):
            Q, _ = linalg.qr(K @ Q, mode="economic")
        B = Q.T @ K @ Q
        values, small = linalg.eigh((B + B.T) / 2.0)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"randomized eigensolver failed: {e}") from e
    values = values[::-1][:r]
    vectors = (Q @ small[:, ::-1])[:, :r]
    return values, vectors


def top_eigenpairs(K: np.ndarray, r: int, method: str = "auto",
                   oversampling: int = NystromConfig.OVERSAMPLING,
                   power_iters: int = NystromConfig.POWER_ITERS,
                   seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Dispatch to the dense or randomized solver.

    "auto" uses the dense solver for small matrices or when the sketch would
    cover the whole space anyway.
    """
    order = K.shape[0]
    if method == "auto":
        method = "dense" if order <= NystromConfig.DENSE_LIMIT or r + oversampling >= order else "randomized"
    if method == "dense":
        values, vectors = dense_eigh(K, r)
    elif method == "randomized":
        values, vectors = randomized_eigh(K, r, oversampling, power_iters, np.random.default_rng(seed))
    else:
        raise UsageError(f"unknown eigensolver method {method!r}")
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(vectors))):
        raise EigenSolverError("eigensolver produced non-finite values")
    logger.debug(f"{method} eigensolver: order {order}, {r} pairs, leading value {values[0]:.6g}")
    return values, vectors
