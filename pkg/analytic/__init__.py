"""
GPMorph Analytic Module
=======================
Closed-form spectrum of the 1D Gaussian kernel under a Gaussian measure, used
as the reference for Nyström models.
"""

from .spectrum import AnalyticSpectrum, MAX_RAW_INDEX, MAX_NORMALIZED_INDEX
from .comparison import EigenComparison, compare_to_nystrom, write_comparison_csv, write_spectrum_csv

__all__ = [
    "AnalyticSpectrum",
    "MAX_RAW_INDEX",
    "MAX_NORMALIZED_INDEX",
    "EigenComparison",
    "compare_to_nystrom",
    "write_comparison_csv",
    "write_spectrum_csv",
]
