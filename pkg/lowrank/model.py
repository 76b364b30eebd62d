"""
Low-Rank Gaussian Process Models
================================
Nyström approximation of the covariance operator's leading eigenpairs and the
truncated Karhunen-Loève model built on them:

    u(x) = mu(x) + sum_i alpha_i * sqrt(lambda_i) * phi_i(x),  alpha ~ N(0, I)

With K the block Gram matrix on n sampled points and (lambda_mat, u) its
eigenpairs, the operator eigenvalues are lambda_mat / n and the eigenfunctions
are extended by phi(x) = sqrt(n) / lambda_mat * K(x, X) u, which has unit
empirical L2 norm on the sampled points.
"""

import logging
from typing import Optional

import numpy as np

from config import NystromConfig, RuntimeConfig
from errors import CoefficientError, InsufficientRankError, UsageError
from kernels import MatrixKernel, MeanFunction, ShiftedMean
from .eigensolvers import top_eigenpairs
from .samplers import DomainSampler

logger = logging.getLogger("GPMorph.LowRank")


class DeformationField:
    """One deformation u = mean + basis * coefficients, evaluable at any points."""

    def __init__(self, gp: "LowRankGP", alpha: np.ndarray):
        self.gp = gp
        self.alpha = alpha

    def __call__(self, points) -> np.ndarray:
        """Displacements at (q, dim) points, shape (q, d)."""
        return self.gp.displacements(points, self.alpha)

    def warp(self, points) -> np.ndarray:
        """points + u(points); only meaningful when input and output dimensions agree."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return points + self(points)


class LowRankGP:
    """
    Truncated Karhunen-Loève model backed by Nyström points.

    Args:
        kernel: Covariance function the eigenpairs were computed for.
        mean: Base mean function.
        points: Nyström points X, shape (n, dim).
        weights: Extension weights W, shape (n*d, r); phi(x) = K(x, X) W.
        eigenvalues: Operator eigenvalues, descending and positive, shape (r,).
        total_variance: Estimate of the integral of trace k(x, x).
        mean_weights: Optional (n*d,) weights m adding K(x, X) m to the mean
            (posterior models).
        reference: Optional path of the reference geometry the model lives on.
        seed: Seed the model was built with.
    """

    def __init__(self, kernel: MatrixKernel, mean: MeanFunction, points, weights, eigenvalues,
                 total_variance: float, mean_weights=None, reference: Optional[str] = None,
                 seed: int = 0, mean_ref: str = "kernel"):
        self.kernel = kernel
        self.base_mean = mean
        self.points = np.array(points, dtype=np.float64)
        self.weights = np.array(weights, dtype=np.float64)
        self.eigenvalues = np.array(eigenvalues, dtype=np.float64)
        self.total_variance = float(total_variance)
        self.mean_weights = None if mean_weights is None else np.asarray(mean_weights, dtype=np.float64)
        self.reference = reference
        self.seed = int(seed)
        self.mean_ref = mean_ref
        if self.weights.shape != (len(self.points) * kernel.output_dim, len(self.eigenvalues)):
            raise UsageError(
                f"weights shape {self.weights.shape} does not match "
                f"{len(self.points)} points and rank {len(self.eigenvalues)}"
            )
        for array in (self.points, self.weights, self.eigenvalues):
            array.setflags(write=False)

    # ========================================
    # Shape
    # ========================================

    @property
    def rank(self) -> int:
        return len(self.eigenvalues)

    @property
    def output_dim(self) -> int:
        return self.kernel.output_dim

    @property
    def input_dim(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return f"LowRankGP(rank={self.rank}, n={self.n}, output_dim={self.output_dim})"

    # ========================================
    # Evaluation
    # ========================================

    def _blocks(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        chunk = max(1, RuntimeConfig.EVAL_CHUNK)
        for start in range(0, len(points), chunk):
            block = points[start:start + chunk]
            yield start, block, self.kernel.matrix(block, self.points)

    def _project(self, points, coefficients: np.ndarray) -> np.ndarray:
        """K(Q, X) @ coefficients in blocks, reshaped to (q, d, ...)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        d = self.output_dim
        tail = coefficients.shape[1:]
        out = np.empty((len(points), d) + tail)
        for start, block, K in self._blocks(points):
            out[start:start + len(block)] = (K @ coefficients).reshape((len(block), d) + tail)
        return out

    def basis(self, points) -> np.ndarray:
        """Eigenfunctions phi_i at the points, shape (q, d, r)."""
        return self._project(points, self.weights)

    def scaled_basis(self, points) -> np.ndarray:
        """sqrt(lambda_i) * phi_i at the points, shape (q, d, r)."""
        return self.basis(points) * np.sqrt(self.eigenvalues)

    def _mean_offset(self, points) -> np.ndarray:
        return self._project(points, self.mean_weights)

    def mean_at(self, points) -> np.ndarray:
        """Model mean at the points, shape (q, d)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        mean = self.base_mean(points)
        if self.mean_weights is not None:
            mean = mean + self._mean_offset(points)
        return mean

    def mean_function(self) -> MeanFunction:
        if self.mean_weights is None:
            return self.base_mean
        return ShiftedMean(self.base_mean, self._mean_offset)

    def check_coefficients(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=np.float64).ravel()
        if alpha.shape != (self.rank,):
            raise CoefficientError(f"expected {self.rank} coefficients, got {alpha.size}")
        if not np.all(np.isfinite(alpha)):
            raise CoefficientError("coefficients must be finite")
        return alpha

    def displacements(self, points, alpha) -> np.ndarray:
        """mu(x) + sum_i alpha_i sqrt(lambda_i) phi_i(x) at the points, shape (q, d)."""
        alpha = self.check_coefficients(alpha)
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        combined = self.weights @ (np.sqrt(self.eigenvalues) * alpha)
        if self.mean_weights is not None:
            combined = combined + self.mean_weights
        return self.base_mean(points) + self._project(points, combined)

    def instance(self, alpha) -> DeformationField:
        return DeformationField(self, self.check_coefficients(alpha))

    evaluate = instance

    def sample_coefficients(self, seed: int = 0) -> np.ndarray:
        return np.random.default_rng(seed).standard_normal(self.rank)

    def sample(self, seed: int = 0) -> DeformationField:
        """Random deformation with alpha ~ N(0, I) drawn from the seed."""
        return self.instance(self.sample_coefficients(seed))

    def covariance(self, x, y) -> np.ndarray:
        """
        Truncated Mercer sum sum_i lambda_i phi_i(x) phi_i(y)^T.

        Single points give a (d, d) matrix; point arrays give (n, m, d, d).
        """
        single = np.ndim(x) == 1 and np.ndim(y) == 1
        bx = self.scaled_basis(np.atleast_2d(x))
        by = self.scaled_basis(np.atleast_2d(y))
        blocks = np.einsum("iar,jbr->ijab", bx, by)
        return blocks[0, 0] if single else blocks

    def truncated(self, rank: int) -> "LowRankGP":
        """Model keeping the leading `rank` components."""
        if not 0 <= rank <= self.rank:
            raise UsageError(f"cannot truncate a rank-{self.rank} model to rank {rank}")
        return LowRankGP(self.kernel, self.base_mean, self.points, self.weights[:, :rank],
                         self.eigenvalues[:rank], self.total_variance, self.mean_weights,
                         self.reference, self.seed, self.mean_ref)


# ========================================
# Nyström construction
# ========================================

def build_lowrank(kernel: MatrixKernel, mean: Optional[MeanFunction], sampler: DomainSampler,
                  n: int, r: int,
                  oversampling: int = NystromConfig.OVERSAMPLING,
                  power_iters: int = NystromConfig.POWER_ITERS,
                  seed: int = 0, method: str = "auto",
                  reference: Optional[str] = None) -> LowRankGP:
    """
    Build a low-rank model by the Nyström method.

    Args:
        kernel: Covariance function.
        mean: Mean function; None uses the mean the kernel carries.
        sampler: Source of the n Nyström points.
        n: Number of Nyström points.
        r: Requested rank; at most n * output_dim.
        oversampling: Randomized-solver oversampling.
        power_iters: Randomized-solver power iterations.
        seed: Seed of the randomized solver's test matrix.
        method: "auto", "dense" or "randomized".
        reference: Reference geometry path recorded in the model.

    Returns:
        LowRankGP whose rank may be lower than r when trailing eigenvalues fall
        below NystromConfig.EIGEN_CUTOFF times the largest.
    """
    if n is not None and n < 1:
        raise UsageError(f"need at least one Nyström point, got {n}")
    if r < 1:
        raise UsageError(f"requested rank must be at least 1, got {r}")

    X = sampler.sample(n)
    order = len(X) * kernel.output_dim
    if r > order:
        raise InsufficientRankError(
            f"requested rank {r} exceeds the {order} available components ({len(X)} points)"
        )

    logger.info(f"Assembling {order}x{order} Gram matrix on {RuntimeConfig.THREADS} threads")
    K = kernel.matrix(X)
    K = (K + K.T) / 2.0

    values, vectors = top_eigenpairs(K, r, method, oversampling, power_iters, seed)
    if not values[0] > 0:
        raise InsufficientRankError("kernel has no positive eigenvalue on the sampled points")
    keep = values > NystromConfig.EIGEN_CUTOFF * values[0]
    if not np.all(keep):
        logger.warning(f"Rank reduced from {r} to {int(keep.sum())}: "
                       f"eigenvalues below {NystromConfig.EIGEN_CUTOFF:g} x leading value dropped")
    values, vectors = values[keep], vectors[:, keep]

    # sign convention: largest-magnitude entry of each eigenvector positive
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    vectors = vectors * np.where(signs == 0, 1.0, signs)

    count = len(X)
    weights = np.sqrt(count) * vectors / values
    total = float(np.trace(K)) / count
    eigenvalues = values / count
    logger.info(f"Built rank-{len(eigenvalues)} model: retained variance "
                f"{eigenvalues.sum():.6g} of {total:.6g}")

    return LowRankGP(kernel, kernel.mean() if mean is None else mean, X, weights, eigenvalues,
                     total, reference=reference, seed=seed,
                     mean_ref="kernel" if mean is None else "custom")
