"""
Image similarity metrics. A metric reduces moving and fixed intensities at the
integration points to a value and its derivative with respect to each moving
intensity.
"""

from abc import ABC, abstractmethod
from typing import Tuple

import numpy as np


class SimilarityMetric(ABC):
    name: str = ""

    @abstractmethod
    def value_and_derivative(self, moving: np.ndarray, fixed: np.ndarray) -> Tuple[float, np.ndarray]:
        """(metric value, d value / d moving_p for every point p)."""


class MeanSquares(SimilarityMetric):
    """mean_p (moving_p - fixed_p)^2"""

    name = "mean_squares"

    def value_and_derivative(self, moving: np.ndarray, fixed: np.ndarray) -> Tuple[float, np.ndarray]:
        residual = moving - fixed
        count = max(len(residual), 1)
        return float(residual @ residual) / count, 2.0 * residual / count
