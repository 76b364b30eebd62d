"""
GPMorph Regression Module
=========================
Gaussian process regression: observation sets, full-space posterior models and
the coefficient-space posterior of low-rank models.
"""

from .observations import ObservationSet, observations_from_landmarks
from .posterior import PosteriorKernel, PosteriorMean, posterior_full, posterior_lowrank

__all__ = [
    "ObservationSet",
    "observations_from_landmarks",
    "PosteriorKernel",
    "PosteriorMean",
    "posterior_full",
    "posterior_lowrank",
]
