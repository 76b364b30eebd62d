"""
Mean functions paired with kernels.

Means flow through kernel composition: empirical kernels carry the sample mean,
posterior kernels the posterior mean, sums add their operands' means and
spatially varying kernels blend region means with their weights.
"""

from abc import ABC, abstractmethod
from typing import Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .weights import WeightFunction


class MeanFunction(ABC):
    """Deformation mean mu(x), evaluated on (n, dim) point arrays."""

    output_dim: int = 3

    @abstractmethod
    def __call__(self, points) -> np.ndarray:
        """Mean values, shape (n, output_dim)."""

    @property
    def is_zero(self) -> bool:
        return False


class ZeroMean(MeanFunction):
    def __init__(self, output_dim: int = 3):
        self.output_dim = output_dim

    def __call__(self, points) -> np.ndarray:
        return np.zeros((len(np.atleast_2d(points)), self.output_dim))

    @property
    def is_zero(self) -> bool:
        return True


class EmpiricalMean(MeanFunction):
    """Sample mean of a deformation-field set; off-reference points use the nearest reference point."""

    def __init__(self, tree: cKDTree, values: np.ndarray):
        self._tree = tree
        self._values = np.asarray(values, dtype=np.float64)
        self.output_dim = self._values.shape[1]

    def __call__(self, points) -> np.ndarray:
        _, index = self._tree.query(np.atleast_2d(np.asarray(points, dtype=np.float64)))
        return self._values[index]


class SumMean(MeanFunction):
    def __init__(self, means: Sequence[MeanFunction]):
        self.means = list(means)
        self.output_dim = self.means[0].output_dim

    def __call__(self, points) -> np.ndarray:
        total = self.means[0](points)
        for mean in self.means[1:]:
            total = total + mean(points)
        return total


class WeightedMean(MeanFunction):
    """Sum of w_i(x) * mu_i(x) over regions."""

    def __init__(self, parts: Sequence[Tuple[WeightFunction, MeanFunction]]):
        self.parts = list(parts)
        self.output_dim = self.parts[0][1].output_dim

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        total = np.zeros((len(points), self.output_dim))
        for weight, mean in self.parts:
            if not mean.is_zero:
                total += weight(points)[:, None] * mean(points)
        return total


def combine_means(means: Sequence[MeanFunction]) -> MeanFunction:
    """Sum of means, collapsing zero means away."""
    nonzero = [m for m in means if not m.is_zero]
    if not nonzero:
        return ZeroMean(means[0].output_dim if means else 3)
    if len(nonzero) == 1:
        return nonzero[0]
    return SumMean(nonzero)


class ShiftedMean(MeanFunction):
    """Base mean plus a point-wise offset function (posterior and low-rank model means)."""

    def __init__(self, base: MeanFunction, offset):
        self.base = base
        self.offset = offset
        self.output_dim = base.output_dim

    def __call__(self, points) -> np.ndarray:
        return self.base(points) + self.offset(points)
