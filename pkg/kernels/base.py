"""
Covariance Functions
====================
Scalar and matrix-valued kernels and their composition algebra.

Every matrix kernel evaluates point batches through `cross(X, Y)`, which
returns the (n, m, d, d) array of blocks k(x_i, y_j). Block Gram matrices use
point-major, component-interleaved ordering (x0, y0, z0, x1, y1, z1, ...).
Kernels are immutable; evaluation is reentrant.
"""

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from config import RuntimeConfig
from errors import KernelError
from .expr import KernelExpr, call
from .means import MeanFunction, WeightedMean, ZeroMean, combine_means
from .weights import WeightFunction

logger = logging.getLogger("GPMorph.Kernels")


def as_points(points) -> np.ndarray:
    """Coerce to a 2D float array of points, one row per point."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise KernelError(f"points must be a 2D array (n, dim), got shape {points.shape}")
    return points


def _single(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=np.float64))[None, :]


# ========================================
# Scalar kernels
# ========================================

class ScalarKernel(ABC):
    """Real-valued covariance function l(x, y)."""

    stationary = True

    @abstractmethod
    def cross(self, X, Y) -> np.ndarray:
        """Values l(x_i, y_j), shape (n, m)."""

    def diagonal(self, X) -> np.ndarray:
        X = as_points(X)
        return np.array([self.cross(X[i:i + 1], X[i:i + 1])[0, 0] for i in range(len(X))])

    def __call__(self, x, y) -> float:
        return float(self.cross(_single(x), _single(y))[0, 0])

    @property
    @abstractmethod
    def expr(self) -> KernelExpr:
        pass


class ScalarGaussian(ScalarKernel):
    """exp(-|x - y|^2 / sigma^2)"""

    def __init__(self, sigma: float):
        if not sigma > 0:
            raise KernelError(f"Gaussian bandwidth must be positive, got {sigma}")
        self.sigma = float(sigma)

    def cross(self, X, Y) -> np.ndarray:
        return np.exp(-cdist(as_points(X), as_points(Y), "sqeuclidean") / self.sigma ** 2)

    def diagonal(self, X) -> np.ndarray:
        return np.ones(len(as_points(X)))

    @property
    def expr(self) -> KernelExpr:
        return call("sgauss", self.sigma)


class ScalarConstant(ScalarKernel):
    def __init__(self, value: float):
        if not value > 0:
            raise KernelError(f"constant kernel value must be positive, got {value}")
        self.value = float(value)

    def cross(self, X, Y) -> np.ndarray:
        return np.full((len(as_points(X)), len(as_points(Y))), self.value)

    def diagonal(self, X) -> np.ndarray:
        return np.full(len(as_points(X)), self.value)

    @property
    def expr(self) -> KernelExpr:
        return call("sconst", self.value)


# ========================================
# Matrix kernel base
# ========================================

class MatrixKernel(ABC):
    """
    Matrix-valued covariance function k(x, y) in R^{d x d}.

    Subclasses implement `cross`, `diagonal` and `expr`; `matrix` assembles
    block Gram matrices on a worker pool.
    """

    output_dim: int = 3
    stationary: bool = False

    @abstractmethod
    def cross(self, X, Y) -> np.ndarray:
        """Blocks k(x_i, y_j), shape (n, m, d, d)."""

    @abstractmethod
    def diagonal(self, X) -> np.ndarray:
        """Blocks k(x_i, x_i), shape (n, d, d)."""

    @property
    @abstractmethod
    def expr(self) -> KernelExpr:
        """Expression tree describing this kernel's construction."""

    def mean(self) -> MeanFunction:
        """Mean function carried by this kernel (zero unless a data node supplies one)."""
        return ZeroMean(self.output_dim)

    def __call__(self, x, y) -> np.ndarray:
        return self.cross(_single(x), _single(y))[0, 0]

    def matrix(self, X, Y=None) -> np.ndarray:
        """
        Block Gram matrix, shape (n*d, m*d).

        Row blocks of RuntimeConfig.GRAM_CHUNK points are filled by independent
        tasks, so the result does not depend on the thread count.
        """
        X = as_points(X)
        Y = X if Y is None else as_points(Y)
        n, m, d = len(X), len(Y), self.output_dim
        out = np.empty((n * d, m * d))
        chunk = max(1, RuntimeConfig.GRAM_CHUNK)
        starts = list(range(0, n, chunk))

        def fill(start: int) -> None:
            stop = min(start + chunk, n)
            block = self.cross(X[start:stop], Y)
            out[start * d:stop * d] = block.transpose(0, 2, 1, 3).reshape((stop - start) * d, m * d)

        if RuntimeConfig.THREADS > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=RuntimeConfig.THREADS) as pool:
                list(pool.map(fill, starts))
        else:
            for start in starts:
                fill(start)
        return out

    def trace_diagonal(self, X) -> np.ndarray:
        """trace k(x_i, x_i) per point."""
        return np.trace(self.diagonal(X), axis1=1, axis2=2)

    # operator sugar: k1 + k2, k1 * k2 (Hadamard), c * k
    def __add__(self, other: "MatrixKernel") -> "MatrixKernel":
        return SumKernel([self, other])

    def __mul__(self, other):
        if isinstance(other, MatrixKernel):
            return ProductKernel([self, other])
        return ScaledKernel(float(other), self)

    def __rmul__(self, other):
        return ScaledKernel(float(other), self)


# ========================================
# Elementary matrix kernels
# ========================================

def _check_psd(matrix: np.ndarray, what: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise KernelError(f"{what} must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(matrix))) if matrix.size else 1.0)
    if np.max(np.abs(matrix - matrix.T)) > 1e-12 * scale:
        raise KernelError(f"{what} must be symmetric")
    if np.min(np.linalg.eigvalsh(matrix)) < -1e-12 * scale:
        raise KernelError(f"{what} must be positive semi-definite")
    return matrix


class DiagonalKernel(MatrixKernel):
    """k(x, y) = A * l(x, y) with A symmetric PSD."""

    def __init__(self, A, scalar: ScalarKernel):
        self.A = _check_psd(A, "diag matrix A")
        self.scalar = scalar
        self.output_dim = self.A.shape[0]
        self.stationary = scalar.stationary

    def cross(self, X, Y) -> np.ndarray:
        return self.scalar.cross(X, Y)[:, :, None, None] * self.A

    def diagonal(self, X) -> np.ndarray:
        return self.scalar.diagonal(X)[:, None, None] * self.A

    @property
    def expr(self) -> KernelExpr:
        return call("diag", *self.A.ravel(), self.scalar.expr)


class GaussianKernel(DiagonalKernel):
    """k(x, y) = s * I * exp(-|x - y|^2 / sigma^2)"""

    def __init__(self, s: float, sigma: float, output_dim: int = 3):
        if not s > 0:
            raise KernelError(f"Gaussian variance scale must be positive, got {s}")
        if output_dim < 1:
            raise KernelError("output dimension must be at least 1")
        super().__init__(s * np.eye(output_dim), ScalarGaussian(sigma))
        self.s = float(s)
        self.sigma = float(sigma)

    @property
    def expr(self) -> KernelExpr:
        if self.output_dim == 3:
            return call("gauss", self.s, self.sigma)
        return call("gauss", self.s, self.sigma, self.output_dim)


class ConstantKernel(MatrixKernel):
    """Position-independent block C (all-ones for the Hadamard identity, zeros for the additive one)."""

    stationary = True

    def __init__(self, value, name: str):
        self.value = _check_psd(value, "constant kernel block")
        self.output_dim = self.value.shape[0]
        self._name = name

    def cross(self, X, Y) -> np.ndarray:
        n, m = len(as_points(X)), len(as_points(Y))
        return np.broadcast_to(self.value, (n, m) + self.value.shape).copy()

    def diagonal(self, X) -> np.ndarray:
        return np.broadcast_to(self.value, (len(as_points(X)),) + self.value.shape).copy()

    @property
    def expr(self) -> KernelExpr:
        if self.output_dim == 3:
            return call(self._name)
        return call(self._name, self.output_dim)


def ones(output_dim: int = 3) -> ConstantKernel:
    return ConstantKernel(np.ones((output_dim, output_dim)), "ones")


def zero(output_dim: int = 3) -> ConstantKernel:
    return ConstantKernel(np.zeros((output_dim, output_dim)), "zero")


# ========================================
# Composition
# ========================================

def _same_dim(kernels: Sequence[MatrixKernel]) -> int:
    dims = {k.output_dim for k in kernels}
    if len(dims) != 1:
        raise KernelError(f"operands have different output dimensions: {sorted(dims)}")
    return dims.pop()


class SumKernel(MatrixKernel):
    def __init__(self, kernels: Sequence[MatrixKernel]):
        if not kernels:
            raise KernelError("sum needs at least one kernel")
        self.kernels: List[MatrixKernel] = list(kernels)
        self.output_dim = _same_dim(self.kernels)
        self.stationary = all(k.stationary for k in self.kernels)

    def cross(self, X, Y) -> np.ndarray:
        total = self.kernels[0].cross(X, Y)
        for k in self.kernels[1:]:
            total = total + k.cross(X, Y)
        return total

    def diagonal(self, X) -> np.ndarray:
        total = self.kernels[0].diagonal(X)
        for k in self.kernels[1:]:
            total = total + k.diagonal(X)
        return total

    def mean(self) -> MeanFunction:
        return combine_means([k.mean() for k in self.kernels])

    @property
    def expr(self) -> KernelExpr:
        return call("sum", *(k.expr for k in self.kernels))


class MultiscaleKernel(SumKernel):
    """Sum over levels i = 1..l of gauss(s / i, sigma / i)."""

    def __init__(self, s: float, sigma: float, levels: int, output_dim: int = 3):
        if levels < 1:
            raise KernelError("multiscale needs at least one level")
        super().__init__([GaussianKernel(s / i, sigma / i, output_dim) for i in range(1, levels + 1)])
        self.s, self.sigma, self.levels = float(s), float(sigma), int(levels)

    @property
    def expr(self) -> KernelExpr:
        if self.output_dim == 3:
            return call("multiscale", self.s, self.sigma, self.levels)
        return call("multiscale", self.s, self.sigma, self.levels, self.output_dim)


class ScaledKernel(MatrixKernel):
    def __init__(self, c: float, kernel: MatrixKernel):
        if not c > 0:
            raise KernelError(f"scale factor must be positive, got {c}")
        self.c = float(c)
        self.kernel = kernel
        self.output_dim = kernel.output_dim
        self.stationary = kernel.stationary

    def cross(self, X, Y) -> np.ndarray:
        return self.c * self.kernel.cross(X, Y)

    def diagonal(self, X) -> np.ndarray:
        return self.c * self.kernel.diagonal(X)

    def mean(self) -> MeanFunction:
        return self.kernel.mean()

    @property
    def expr(self) -> KernelExpr:
        return call("scale", self.c, self.kernel.expr)


class ProductKernel(MatrixKernel):
    """Element-wise (Hadamard) product of the blocks."""

    def __init__(self, kernels: Sequence[MatrixKernel]):
        if len(kernels) < 2:
            raise KernelError("product needs at least two kernels")
        self.kernels = list(kernels)
        self.output_dim = _same_dim(self.kernels)
        self.stationary = all(k.stationary for k in self.kernels)

    def cross(self, X, Y) -> np.ndarray:
        total = self.kernels[0].cross(X, Y)
        for k in self.kernels[1:]:
            total = total * k.cross(X, Y)
        return total

    def diagonal(self, X) -> np.ndarray:
        total = self.kernels[0].diagonal(X)
        for k in self.kernels[1:]:
            total = total * k.diagonal(X)
        return total

    def mean(self) -> MeanFunction:
        return self.kernels[0].mean()

    @property
    def expr(self) -> KernelExpr:
        return call("product", *(k.expr for k in self.kernels))


class AnisotropicKernel(MatrixKernel):
    """k(x, y) = R S k_inner(x, y) S^T R^T with R orthonormal and S positive diagonal."""

    def __init__(self, R, S, inner: MatrixKernel):
        R = np.asarray(R, dtype=np.float64)
        S = np.asarray(S, dtype=np.float64)
        if S.ndim == 2:
            if np.any(S != np.diag(np.diag(S))):
                raise KernelError("S must be diagonal")
            S = np.diag(S)
        d = inner.output_dim
        if R.shape != (d, d) or S.shape != (d,):
            raise KernelError(f"anisotropic transform must be {d}x{d} with {d} scales")
        if np.linalg.norm(R.T @ R - np.eye(d)) > 1e-8:
            raise KernelError("R must be orthonormal")
        if np.any(S <= 0):
            raise KernelError("S must have positive diagonal entries")
        self.R, self.S, self.inner = R, S, inner
        self._M = R * S[None, :]
        self.output_dim = d
        self.stationary = inner.stationary

    def cross(self, X, Y) -> np.ndarray:
        return np.einsum("ab,nmbc,dc->nmad", self._M, self.inner.cross(X, Y), self._M)

    def diagonal(self, X) -> np.ndarray:
        return np.einsum("ab,nbc,dc->nad", self._M, self.inner.diagonal(X), self._M)

    def mean(self) -> MeanFunction:
        return self.inner.mean()

    @property
    def expr(self) -> KernelExpr:
        return call("anisotropic", *self.R.ravel(), *self.S, self.inner.expr)


class LocalizedKernel(MatrixKernel):
    """k(x, y) = w(x) w(y) k_inner(x, y)"""

    def __init__(self, weight: WeightFunction, inner: MatrixKernel):
        self.weight, self.inner = weight, inner
        self.output_dim = inner.output_dim

    def cross(self, X, Y) -> np.ndarray:
        w = np.outer(self.weight(as_points(X)), self.weight(as_points(Y)))
        return w[:, :, None, None] * self.inner.cross(X, Y)

    def diagonal(self, X) -> np.ndarray:
        w = self.weight(as_points(X))
        return (w * w)[:, None, None] * self.inner.diagonal(X)

    def mean(self) -> MeanFunction:
        return self.inner.mean()

    @property
    def expr(self) -> KernelExpr:
        return call("localize", self.weight.expr, self.inner.expr)


def _partition_check_points(dim: int) -> np.ndarray:
    rng = np.random.default_rng(0)
    return rng.uniform(-500.0, 500.0, size=(512, dim))


class SpatiallyVaryingKernel(MatrixKernel):
    """
    Sum over regions of w_i(x) w_i(y) k_i(x, y).

    The weights must form a partition of unity; this is checked on
    `check_points` (a fixed pseudo-random cloud when not given) to 1e-6.
    """

    def __init__(self, regions: Sequence[Tuple[WeightFunction, MatrixKernel]],
                 check_points: Optional[np.ndarray] = None, input_dim: int = 3):
        if not regions:
            raise KernelError("spatially varying kernel needs at least one region")
        self.regions = [(w, k) for w, k in regions]
        self.output_dim = _same_dim([k for _, k in self.regions])
        points = _partition_check_points(input_dim) if check_points is None else as_points(check_points)
        total = sum(w(points) for w, _ in self.regions)
        if np.max(np.abs(total - 1.0)) > 1e-6:
            raise KernelError("region weights do not form a partition of unity")

    def cross(self, X, Y) -> np.ndarray:
        X, Y = as_points(X), as_points(Y)
        total = None
        for weight, kernel in self.regions:
            w = np.outer(weight(X), weight(Y))[:, :, None, None] * kernel.cross(X, Y)
            total = w if total is None else total + w
        return total

    def diagonal(self, X) -> np.ndarray:
        X = as_points(X)
        total = None
        for weight, kernel in self.regions:
            w = weight(X)
            part = (w * w)[:, None, None] * kernel.diagonal(X)
            total = part if total is None else total + part
        return total

    def mean(self) -> MeanFunction:
        means = [(w, k.mean()) for w, k in self.regions]
        if all(m.is_zero for _, m in means):
            return ZeroMean(self.output_dim)
        return WeightedMean(means)

    @property
    def expr(self) -> KernelExpr:
        return call("spatially_varying", *(call("region", w.expr, k.expr) for w, k in self.regions))


# ========================================
# Constructors
# ========================================

def gauss(s: float, sigma: float, output_dim: int = 3) -> GaussianKernel:
    return GaussianKernel(s, sigma, output_dim)


def multiscale(s: float, sigma: float, levels: int, output_dim: int = 3) -> MultiscaleKernel:
    return MultiscaleKernel(s, sigma, levels, output_dim)


def diag(A, scalar: ScalarKernel) -> DiagonalKernel:
    return DiagonalKernel(A, scalar)


def kernel_sum(*kernels: MatrixKernel) -> SumKernel:
    return SumKernel(kernels)


def kernel_product(*kernels: MatrixKernel) -> ProductKernel:
    return ProductKernel(kernels)


def scale(c: float, kernel: MatrixKernel) -> ScaledKernel:
    return ScaledKernel(c, kernel)


def anisotropic(R, S, inner: MatrixKernel) -> AnisotropicKernel:
    return AnisotropicKernel(R, S, inner)


def localize(weight: WeightFunction, inner: MatrixKernel) -> LocalizedKernel:
    return LocalizedKernel(weight, inner)


def spatially_varying(regions: Sequence[Tuple[WeightFunction, MatrixKernel]],
                      check_points=None, input_dim: int = 3) -> SpatiallyVaryingKernel:
    return SpatiallyVaryingKernel(regions, check_points, input_dim)


def block_matrix(blocks: np.ndarray) -> np.ndarray:
    """(n, m, d, d) blocks to an (n*d, m*d) matrix in the Gram layout."""
    n, m, d, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(n * d, m * d)


def gram_matrix(kernel: MatrixKernel, X) -> np.ndarray:
    """Block Gram matrix of `kernel` over the points X."""
    return kernel.matrix(X)
