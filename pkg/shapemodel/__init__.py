"""
GPMorph Shape Model Module
==========================
Point-distribution models: discretized Gaussian process models, PCA models
from examples, specificity / compactness / generalization and model files.
"""

from .model import DiscreteModel, discretize
from .pca import build_pca
from .metrics import specificity, compactness, compactness_curve, generalization, generalization_errors
from .storage import save_discrete, load_discrete

__all__ = [
    "DiscreteModel",
    "discretize",
    "build_pca",
    "specificity",
    "compactness",
    "compactness_curve",
    "generalization",
    "generalization_errors",
    "save_discrete",
    "load_discrete",
]
