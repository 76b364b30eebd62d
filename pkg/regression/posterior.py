"""
Posterior Models
================
Closed-form Gaussian process regression, in full function space and in the
coefficient space of a low-rank model.

Full space, with G = K_XX + sigma^2 I = L L^T:
    mu_p(x)    = mu(x) + K(x, X) G^-1 (Y - mu(X))
    k_p(x, y)  = k(x, y) - K(x, X) G^-1 K(X, y)

Coefficient space, with Phi the (m*d, r) matrix of sqrt(lambda_j) phi_j(x_i):
    M = Phi^T Phi + sigma^2 I,  alpha_bar = M^-1 Phi^T (Y - mu(X)),  Sigma = sigma^2 M^-1
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from config import NystromConfig
from errors import ObservationError
from kernels import KernelExpr, MatrixKernel, MeanFunction, as_points, call
from lowrank import LowRankGP, jittered_cholesky
from .observations import ObservationSet

logger = logging.getLogger("GPMorph.Regression")


def _check_dims(kernel: MatrixKernel, observations: ObservationSet) -> None:
    if observations.output_dim != kernel.output_dim:
        raise ObservationError(
            f"observations have {observations.output_dim} components, kernel has {kernel.output_dim}"
        )


class _Conditioning:
    """Cholesky factor of K_XX + sigma^2 I, shared by a posterior mean and kernel."""

    def __init__(self, kernel: MatrixKernel, observations: ObservationSet):
        self.kernel = kernel
        self.points = observations.points
        G = kernel.matrix(self.points)
        G = (G + G.T) / 2.0 + observations.noise_variance * np.eye(G.shape[0])
        self.L, self.jitter = jittered_cholesky(G, jitter_first=False)

    def whiten(self, X) -> np.ndarray:
        """L^-1 K(X_obs, X), shape (m*d, n*d)."""
        return linalg.solve_triangular(self.L, self.kernel.matrix(self.points, X), lower=True)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self.L, True), rhs)


class PosteriorMean(MeanFunction):
    """mu(x) + K(x, X) G^-1 (Y - mu(X))"""

    def __init__(self, prior_mean: MeanFunction, conditioning: _Conditioning, observations: ObservationSet):
        self.prior_mean = prior_mean
        self.output_dim = prior_mean.output_dim
        self._conditioning = conditioning
        residual = observations.values - prior_mean(observations.points)
        self._coefficients = conditioning.solve(residual.ravel())

    def __call__(self, points) -> np.ndarray:
        points = as_points(np.atleast_2d(points))
        K = self._conditioning.kernel.matrix(points, self._conditioning.points)
        return self.prior_mean(points) + (K @ self._coefficients).reshape(len(points), self.output_dim)


class PosteriorKernel(MatrixKernel):
    """k(x, y) - K(x, X) G^-1 K(X, y); evaluation costs one triangular solve per batch."""

    def __init__(self, inner: MatrixKernel, conditioning: _Conditioning, observations: ObservationSet,
                 posterior_mean: MeanFunction, sources: Optional[Tuple[str, str]] = None):
        self.inner = inner
        self.observations = observations
        self.output_dim = inner.output_dim
        self.sources = sources
        self._conditioning = conditioning
        self._mean = posterior_mean

    def cross(self, X, Y) -> np.ndarray:
        X, Y = as_points(X), as_points(Y)
        A = self._conditioning.whiten(X)
        B = A if Y is X else self._conditioning.whiten(Y)
        d = self.output_dim
        reduction = (A.T @ B).reshape(len(X), d, len(Y), d).transpose(0, 2, 1, 3)
        return self.inner.cross(X, Y) - reduction

    def diagonal(self, X) -> np.ndarray:
        X = as_points(X)
        d = self.output_dim
        A = self._conditioning.whiten(X).reshape(-1, len(X), d)
        return self.inner.diagonal(X) - np.einsum("kia,kib->iab", A, A)

    def mean(self) -> MeanFunction:
        return self._mean

    @property
    def expr(self) -> KernelExpr:
        ref, target = self.sources if self.sources is not None else ("", "")
        return call("posterior", self.inner.expr, ref, target, self.observations.noise_variance)


def posterior_full(mean: MeanFunction, kernel: MatrixKernel, observations: ObservationSet,
                   sources: Optional[Tuple[str, str]] = None) -> Tuple[MeanFunction, MatrixKernel]:
    """
    Condition a Gaussian process on observations.

    Args:
        mean: Prior mean function.
        kernel: Prior kernel.
        observations: Observed values; an empty set returns the prior unchanged.
        sources: Landmark file paths the observations came from, recorded in
            the posterior kernel's expression so models built on it can be saved.

    Returns:
        (posterior mean, posterior kernel). The kernel carries the posterior
        mean, so building a low-rank model from it needs no explicit mean.

    Raises:
        CholeskyError: K_XX + sigma^2 I could not be factored.
    """
    if observations.is_empty:
        return mean, kernel
    _check_dims(kernel, observations)
    conditioning = _Conditioning(kernel, observations)
    posterior_mean = PosteriorMean(mean, conditioning, observations)
    posterior_kernel = PosteriorKernel(kernel, conditioning, observations, posterior_mean, sources)
    logger.info(f"Conditioned on {len(observations)} observations "
                f"(noise {observations.noise_variance:g}, jitter {conditioning.jitter:.3g})")
    return posterior_mean, posterior_kernel


# ========================================
# Coefficient space
# ========================================

def posterior_lowrank(gp: LowRankGP, observations: ObservationSet
                      ) -> Tuple[np.ndarray, np.ndarray, LowRankGP]:
    """
    Condition a low-rank model on observations in coefficient space.

    Returns:
        (alpha_bar, Sigma, posterior model). The posterior model's basis comes
        from the eigendecomposition of D^1/2 Sigma D^1/2 with D = diag(lambda);
        its mean absorbs alpha_bar. With zero noise a small jitter keeps M
        invertible, so observations outside the model's span are matched in
        the least-squares sense only.
    """
    r = gp.rank
    if observations.is_empty or r == 0:
        return np.zeros(r), np.eye(r), gp
    _check_dims(gp.kernel, observations)

    Phi = gp.scaled_basis(observations.points).reshape(-1, r)
    residual = (observations.values - gp.mean_at(observations.points)).ravel()
    gram = Phi.T @ Phi
    noise = observations.noise_variance
    if noise == 0.0:
        noise = NystromConfig.JITTER * max(float(np.trace(gram)) / r, np.finfo(float).tiny)
    M = gram + noise * np.eye(r)
    factor = linalg.cho_factor(M, lower=True)
    alpha_bar = linalg.cho_solve(factor, Phi.T @ residual)
    Sigma = noise * linalg.cho_solve(factor, np.eye(r))
    Sigma = (Sigma + Sigma.T) / 2.0

    root = np.sqrt(gp.eigenvalues)
    values, U = linalg.eigh(root[:, None] * Sigma * root[None, :])
    values, U = values[::-1], U[:, ::-1]
    keep = values > NystromConfig.EIGEN_CUTOFF * gp.eigenvalues[0]
    values, U = values[keep], U[:, keep]
    pivot = np.argmax(np.abs(U), axis=0) if U.size else np.zeros(0, dtype=int)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    U = U * np.where(signs == 0, 1.0, signs)

    shift = gp.weights @ (root * alpha_bar)
    mean_weights = shift if gp.mean_weights is None else gp.mean_weights + shift
    variance = gp.total_variance - float(gp.eigenvalues.sum()) + float(values.sum())
    posterior = LowRankGP(gp.kernel, gp.base_mean, gp.points, gp.weights @ U, values, variance,
                          mean_weights=mean_weights, reference=gp.reference, seed=gp.seed,
                          mean_ref=gp.mean_ref)
    logger.info(f"Low-rank posterior on {len(observations)} observations: rank {r} -> {posterior.rank}")
    return alpha_bar, Sigma, posterior
