"""
Projection-error experiment: how much of an exact GP sample a low-rank model
misses. Samples are drawn exactly at probe points from N(mu, K), projected onto
the model's span by least squares, and the relative squared residual is
averaged over trials.
"""

import logging

import numpy as np
from scipy import linalg

from errors import UsageError
from kernels import MatrixKernel
from .cholesky import jittered_cholesky
from .model import LowRankGP
from .samplers import DomainSampler

logger = logging.getLogger("GPMorph.LowRank")


def projection_error_experiment(kernel: MatrixKernel, gp: LowRankGP, sampler: DomainSampler,
                                n_probes: int, trials: int, seed: int = 0) -> float:
    """
    Mean relative projection error |u - u_proj|^2 / |u - mu|^2 over trials.

    Args:
        kernel: Kernel the exact samples are drawn from.
        gp: Low-rank model to project onto.
        sampler: Source of the probe points.
        n_probes: Number of probe points (dense factorization of n_probes * d).
        trials: Number of exact samples.
        seed: Seed for the samples.

    Raises:
        CholeskyError: the probe Gram matrix could not be factored.
    """
    if trials < 1:
        raise UsageError(f"need at least one trial, got {trials}")
    probes = sampler.sample(n_probes)
    K = kernel.matrix(probes)
    L, jitter = jittered_cholesky((K + K.T) / 2.0)
    logger.info(f"Probe covariance factored ({K.shape[0]}x{K.shape[0]}, jitter {jitter:.3g})")

    Phi = gp.scaled_basis(probes).reshape(K.shape[0], gp.rank)
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(trials):
        # u - mu for an exact sample u ~ N(mu, K)
        residual = L @ rng.standard_normal(K.shape[0])
        if gp.rank:
            beta = linalg.lstsq(Phi, residual)[0]
            missed = residual - Phi @ beta
        else:
            missed = residual
        errors.append(float(missed @ missed) / float(residual @ residual))
    error = float(np.mean(errors))
    logger.info(f"Projection error over {trials} trials: {error:.6g}")
    return error
