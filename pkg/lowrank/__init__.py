"""
GPMorph Low-Rank Module
=======================
Nyström eigenpairs, Karhunen-Loève models, rank and point-count selection,
the projection-error experiment and model files.
"""

from .samplers import (
    DomainSampler,
    SurfaceSampler,
    ImageBoxSampler,
    ExplicitSampler,
    Gaussian1DSampler,
    Interval1DSampler,
    surface,
    image_box,
    explicit,
    gaussian_1d,
    interval_1d,
)
from .eigensolvers import dense_eigh, randomized_eigh, top_eigenpairs
from .cholesky import jittered_cholesky
from .model import DeformationField, LowRankGP, build_lowrank
from .selection import (
    total_variance,
    choose_rank,
    eigenvalue_bound,
    eigenvalue_sum_bound,
    eigenfunction_bound,
    tau_for_confidence,
    confidence_for_tau,
    points_for_eigenvalue_accuracy,
    select_model,
)
from .experiment import projection_error_experiment
from .storage import save_lowrank, load_lowrank, read_array, write_array

__all__ = [
    "DomainSampler",
    "SurfaceSampler",
    "ImageBoxSampler",
    "ExplicitSampler",
    "Gaussian1DSampler",
    "Interval1DSampler",
    "surface",
    "image_box",
    "explicit",
    "gaussian_1d",
    "interval_1d",
    "dense_eigh",
    "randomized_eigh",
    "top_eigenpairs",
    "jittered_cholesky",
    "DeformationField",
    "LowRankGP",
    "build_lowrank",
    "total_variance",
    "choose_rank",
    "eigenvalue_bound",
    "eigenvalue_sum_bound",
    "eigenfunction_bound",
    "tau_for_confidence",
    "confidence_for_tau",
    "points_for_eigenvalue_accuracy",
    "select_model",
    "projection_error_experiment",
    "save_lowrank",
    "load_lowrank",
    "read_array",
    "write_array",
]
