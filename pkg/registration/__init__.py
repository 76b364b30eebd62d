"""
GPMorph Registration Module
===========================
Model fitting to surfaces and images by minimizing data term plus eta times
the squared coefficient norm, and landmark-constrained (hybrid) fitting.
"""

from .sampling import ModelSampling
from .metrics import SimilarityMetric, MeanSquares
from .energies import Energy, SurfaceEnergy, ImageEnergy, energy_and_gradient
from .optimizers import (
    Optimizer,
    GradientDescent,
    LBFGS,
    StochasticGradientDescent,
    OPTIMIZERS,
    make_optimizer,
)
from .fitting import (
    FitResult,
    fit,
    hybrid_fit,
    warp_points,
    warp_mesh,
    resample_target,
    surface_fitter,
)

__all__ = [
    "ModelSampling",
    "SimilarityMetric",
    "MeanSquares",
    "Energy",
    "SurfaceEnergy",
    "ImageEnergy",
    "energy_and_gradient",
    "Optimizer",
    "GradientDescent",
    "LBFGS",
    "StochasticGradientDescent",
    "OPTIMIZERS",
    "make_optimizer",
    "FitResult",
    "fit",
    "hybrid_fit",
    "warp_points",
    "warp_mesh",
    "resample_target",
    "surface_fitter",
]
