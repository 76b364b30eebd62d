"""
Closed-form eigenpairs of the 1D Gaussian kernel exp(-(x - y)^2 / sigma^2)
under the measure N(0, s2).

Constants: a = 1/(4 s2) (measure), b = 1/sigma^2 (kernel), c = sqrt(a^2 + 2ab),
A = a + b + c, B = b / A. Eigenvalues decay geometrically with ratio B and the
eigenfunctions are exp(-(c - a) x^2) H_i(sqrt(2c) x), indexed from 0.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from errors import UsageError

# Raw (unnormalized) Hermite values grow like sqrt(2^i i!); beyond this index
# they are not supported
MAX_RAW_INDEX = 20

# The orthonormal recurrence has no factorial growth and stays accurate further
MAX_NORMALIZED_INDEX = 60


def _orthonormal_hermite(i: int, z: np.ndarray) -> np.ndarray:
    """H_i(z) / sqrt(2^i i!) by the three-term recurrence of the scaled polynomials."""
    previous = np.ones_like(z)
    if i == 0:
        return previous
    current = math.sqrt(2.0) * z
    for k in range(1, i):
        previous, current = current, (math.sqrt(2.0 / (k + 1)) * z * current
                                      - math.sqrt(k / (k + 1)) * previous)
    return current


@dataclass(frozen=True)
class AnalyticSpectrum:
    """
    Eigen-structure of the Gaussian kernel with bandwidth `sigma` under N(0, s2).

    Attributes:
        sigma: Kernel bandwidth.
        s2: Measure variance.
    """
    sigma: float
    s2: float
    a: float = field(init=False)
    b: float = field(init=False)
    c: float = field(init=False)
    A: float = field(init=False)
    B: float = field(init=False)

    def __post_init__(self):
        if not self.sigma > 0 or not self.s2 > 0:
            raise UsageError(f"sigma and s2 must be positive, got {self.sigma}, {self.s2}")
        a = 1.0 / (4.0 * self.s2)
        b = 1.0 / self.sigma ** 2
        c = math.sqrt(a * a + 2.0 * a * b)
        A = a + b + c
        for name, value in (("a", a), ("b", b), ("c", c), ("A", A), ("B", b / A)):
            object.__setattr__(self, name, value)

    @property
    def decay_ratio(self) -> float:
        return self.B

    def _check_index(self, i: int, limit: int) -> None:
        if i < 0:
            raise UsageError(f"eigen index must be non-negative, got {i}")
        if i > limit:
            raise UsageError(f"eigen index {i} is above the supported maximum {limit}")

    def eigenvalue(self, i: int) -> float:
        """sqrt(pi / A) B^i (eigenvalue for the Gaussian weight exp(-x^2 / (2 s2)))."""
        if i < 0:
            raise UsageError(f"eigen index must be non-negative, got {i}")
        return math.sqrt(math.pi / self.A) * self.B ** i

    def probability_eigenvalue(self, i: int) -> float:
        """Eigenvalue for the probability measure N(0, s2): sqrt(2a / A) B^i."""
        if i < 0:
            raise UsageError(f"eigen index must be non-negative, got {i}")
        return math.sqrt(2.0 * self.a / self.A) * self.B ** i

    def eigenvalue_sum(self) -> float:
        return math.sqrt(math.pi / self.A) / (1.0 - self.B)

    def total_variance(self) -> float:
        """Sum of the probability-measure eigenvalues; equals k(x, x) = 1."""
        return math.sqrt(2.0 * self.a / self.A) / (1.0 - self.B)

    def eigenfunction(self, i: int, x) -> np.ndarray:
        """exp(-(c - a) x^2) H_i(sqrt(2c) x) with physicists' Hermite polynomials, i <= 20."""
        self._check_index(i, MAX_RAW_INDEX)
        x = np.asarray(x, dtype=np.float64)
        z = math.sqrt(2.0 * self.c) * x
        scale = math.sqrt(2.0 ** i * math.factorial(i))
        return np.exp(-(self.c - self.a) * x * x) * _orthonormal_hermite(i, z) * scale

    def normalized_eigenfunction(self, i: int, x) -> np.ndarray:
        """Eigenfunction with unit L2 norm under N(0, s2), i <= 60."""
        self._check_index(i, MAX_NORMALIZED_INDEX)
        x = np.asarray(x, dtype=np.float64)
        z = math.sqrt(2.0 * self.c) * x
        norm = math.sqrt(2.0 * math.sqrt(self.s2) * math.sqrt(self.c))
        return np.exp(-(self.c - self.a) * x * x) * _orthonormal_hermite(i, z) * norm
