"""
Cholesky factorization of numerically semi-definite matrices, with the
jitter schedule of NystromConfig (JITTER * trace, growing by JITTER_GROWTH).
"""

import logging
from typing import Tuple

import numpy as np
from scipy import linalg

from config import NystromConfig
from errors import CholeskyError

logger = logging.getLogger("GPMorph.LowRank")


def jittered_cholesky(K: np.ndarray, jitter_first: bool = True) -> Tuple[np.ndarray, float]:
    """
    Lower Cholesky factor of K + jitter * I.

    Args:
        K: Symmetric matrix.
        jitter_first: Start with JITTER * trace(K); otherwise try K as is first.

    Returns:
        (L, jitter actually added).

    Raises:
        CholeskyError: factorization failed at every jitter level.
    """
    order = K.shape[0]
    base = NystromConfig.JITTER * max(float(np.trace(K)), np.finfo(float).tiny)
    levels = [base * NystromConfig.JITTER_GROWTH ** k for k in range(NystromConfig.JITTER_ATTEMPTS)]
    if not jitter_first:
        levels = [0.0] + levels
    for jitter in levels:
        try:
            L = linalg.cholesky(K + jitter * np.eye(order), lower=True)
        except linalg.LinAlgError:
            logger.debug(f"Cholesky failed with jitter {jitter:.3g}")
            continue
        if jitter > base:
            logger.warning(f"Cholesky needed escalated jitter {jitter:.3g}")
        return L, jitter
    raise CholeskyError(
        f"Cholesky factorization failed after {NystromConfig.JITTER_ATTEMPTS} jitter levels "
        f"(up to {levels[-1]:.3g}); the kernel matrix is not positive semi-definite"
    )
