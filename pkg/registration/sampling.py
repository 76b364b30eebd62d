"""
Model values precomputed at a fixed set of integration points.
"""

from typing import Optional, Union

import numpy as np

from errors import CoefficientError
from lowrank import LowRankGP


class ModelSampling:
    """
    Mean and scaled basis of a model at integration points.

    Args:
        points: (N, 3) integration points on the reference.
        mean: (N, 3) mean displacements.
        basis: (N, 3, r) columns sqrt(lambda_i) phi_i.
        model: The LowRankGP or DiscreteModel these values came from.
    """

    def __init__(self, points, mean, basis, model=None):
        self.points = np.asarray(points, dtype=np.float64)
        self.mean = np.asarray(mean, dtype=np.float64)
        self.basis = np.asarray(basis, dtype=np.float64)
        self.model = model

    @classmethod
    def from_lowrank(cls, gp: LowRankGP, points) -> "ModelSampling":
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return cls(points, gp.mean_at(points), gp.scaled_basis(points), gp)

    @classmethod
    def from_discrete(cls, model) -> "ModelSampling":
        n = len(model.points)
        return cls(model.points, model.mean.reshape(n, 3), model.basis.reshape(n, 3, model.rank), model)

    @classmethod
    def from_model(cls, model: Union[LowRankGP, "object"], points=None) -> "ModelSampling":
        if isinstance(model, LowRankGP):
            return cls.from_lowrank(model, points)
        return cls.from_discrete(model)

    @property
    def rank(self) -> int:
        return self.basis.shape[2]

    def __len__(self) -> int:
        return len(self.points)

    def check(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=np.float64).ravel()
        if alpha.shape != (self.rank,):
            raise CoefficientError(f"expected {self.rank} coefficients, got {alpha.size}")
        return alpha

    def displacements(self, alpha, indices: Optional[np.ndarray] = None) -> np.ndarray:
        if indices is None:
            return self.mean + self.basis @ alpha
        return self.mean[indices] + self.basis[indices] @ alpha

    def warp(self, alpha, indices: Optional[np.ndarray] = None) -> np.ndarray:
        """Warped integration points x + u(x)."""
        points = self.points if indices is None else self.points[indices]
        return points + self.displacements(alpha, indices)

    def jacobian(self, indices: Optional[np.ndarray] = None) -> np.ndarray:
        return self.basis if indices is None else self.basis[indices]
