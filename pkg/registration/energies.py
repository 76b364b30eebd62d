"""
Registration Energies
=====================
MAP energies in coefficient space: a data term averaged over fixed
integration points plus eta * ||alpha||^2, the RKHS norm of the deformation
in the truncated span.

Every energy exposes `data_and_gradient(alpha, indices)`; `indices` restricts
the average to a subset of integration points (stochastic gradient descent).
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np

from config import RegistrationConfig
from errors import UsageError
from geometry import ClosestPointIndex, ScalarImage, TriangleMesh, sample_surface_points
from lowrank import ImageBoxSampler
from .metrics import MeanSquares, SimilarityMetric
from .sampling import ModelSampling

logger = logging.getLogger("GPMorph.Registration")


class Energy(ABC):
    """Data term over integration points plus eta ||alpha||^2."""

    def __init__(self, sampling: ModelSampling, eta: float):
        if not eta >= 0:
            raise UsageError(f"eta must be non-negative, got {eta}")
        if len(sampling) == 0:
            raise UsageError("energy needs at least one integration point")
        self.sampling = sampling
        self.eta = float(eta)

    @property
    def rank(self) -> int:
        return self.sampling.rank

    @property
    def n_points(self) -> int:
        return len(self.sampling)

    @abstractmethod
    def data_and_gradient(self, alpha: np.ndarray,
                          indices: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
        """Data term and its gradient with respect to alpha."""

    def data_term(self, alpha) -> float:
        return self.data_and_gradient(self.sampling.check(alpha))[0]

    def refresh(self, alpha) -> None:
        """Hook run between optimizer blocks. Nothing to refresh by default."""

    @abstractmethod
    def with_model(self, sampling: ModelSampling) -> "Energy":
        """Same target and eta over a different model sampling."""


def _chain(derivative: np.ndarray, jacobian: np.ndarray) -> np.ndarray:
    """sum_p derivative_p^T J_p for derivative (P, 3) and J (P, 3, r)."""
    return np.einsum("pa,par->r", derivative, jacobian)


# ========================================
# Surfaces
# ========================================

class SurfaceEnergy(Energy):
    """
    Mean squared closest-point distance from the warped integration points to
    the target surface.

    Closest points are recomputed on every evaluation until `refresh` freezes
    them; the gradient treats them as constants either way.
    """

    def __init__(self, sampling: ModelSampling, target: ClosestPointIndex, eta: float):
        super().__init__(sampling, eta)
        self.target = target
        self._correspondences: Optional[np.ndarray] = None

    @classmethod
    def create(cls, model, reference: TriangleMesh, target: TriangleMesh,
               eta: float = RegistrationConfig.ETA, n_points: Optional[int] = RegistrationConfig.SURFACE_POINTS,
               seed: int = 0) -> "SurfaceEnergy":
        """
        Energy with integration points drawn area-uniformly from the reference
        (n_points=None uses the reference vertices).
        """
        if n_points is None:
            points = reference.vertices
        else:
            points = sample_surface_points(reference, n_points, seed=seed)
        return cls(ModelSampling.from_model(model, points), ClosestPointIndex(target), eta)

    @property
    def frozen(self) -> bool:
        return self._correspondences is not None

    def refresh(self, alpha) -> None:
        alpha = self.sampling.check(alpha)
        self._correspondences = self.target.query(self.sampling.warp(alpha))[0]

    def release(self) -> None:
        self._correspondences = None

    def data_and_gradient(self, alpha, indices=None):
        warped = self.sampling.warp(alpha, indices)
        if self._correspondences is None:
            closest = self.target.query(warped)[0]
        else:
            closest = self._correspondences if indices is None else self._correspondences[indices]
        residual = warped - closest
        count = len(residual)
        value = float(np.einsum("pa,pa->", residual, residual)) / count
        gradient = 2.0 * _chain(residual, self.sampling.jacobian(indices)) / count
        return value, gradient

    def with_model(self, sampling: ModelSampling) -> "SurfaceEnergy":
        return SurfaceEnergy(sampling, self.target, self.eta)


# ========================================
# Images
# ========================================

class ImageEnergy(Energy):
    """
    Image similarity between the reference intensities at the integration
    points and the target sampled at the warped points.

    Args:
        sampling: Model values at integration points inside the reference domain.
        reference: I_R, sampled once at the integration points.
        target: I_T, interpolated trilinearly with its analytic gradient.
        eta: Regularization weight.
        metric: Similarity plug-in, mean squares by default.
    """

    def __init__(self, sampling: ModelSampling, reference: ScalarImage, target: ScalarImage,
                 eta: float, metric: Optional[SimilarityMetric] = None):
        super().__init__(sampling, eta)
        self.reference = reference
        self.target = target
        self.metric = metric or MeanSquares()
        self.fixed = reference.interpolate(sampling.points)

    @classmethod
    def create(cls, model, reference: ScalarImage, target: ScalarImage,
               eta: float = RegistrationConfig.ETA, n_points: int = RegistrationConfig.IMAGE_POINTS,
               seed: int = 0, metric: Optional[SimilarityMetric] = None) -> "ImageEnergy":
        """Energy over a seeded sample of the reference's masked voxel centers."""
        available = len(reference.domain_points())
        points = ImageBoxSampler(reference, seed).sample(min(n_points, available))
        return cls(ModelSampling.from_model(model, points), reference, target, eta, metric)

    def data_and_gradient(self, alpha, indices=None):
        warped = self.sampling.warp(alpha, indices)
        moving, spatial = self.target.interpolate_with_gradient(warped)
        fixed = self.fixed if indices is None else self.fixed[indices]
        value, derivative = self.metric.value_and_derivative(moving, fixed)
        gradient = _chain(derivative[:, None] * spatial, self.sampling.jacobian(indices))
        return value, gradient

    def with_model(self, sampling: ModelSampling) -> "ImageEnergy":
        return ImageEnergy(sampling, self.reference, self.target, self.eta, self.metric)


def energy_and_gradient(energy: Energy, alpha,
                        indices: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """Total energy data + eta ||alpha||^2 and its gradient."""
    alpha = energy.sampling.check(alpha)
    data, gradient = energy.data_and_gradient(alpha, indices)
    return data + energy.eta * float(alpha @ alpha), gradient + 2.0 * energy.eta * alpha
