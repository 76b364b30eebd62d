"""
Spatial weight functions for localized and spatially varying kernels.
"""

from abc import ABC, abstractmethod

import numpy as np
from scipy.special import expit

from errors import KernelError
from .expr import KernelExpr, call


class WeightFunction(ABC):
    """Real-valued weight w(x) on the domain."""

    @abstractmethod
    def __call__(self, points) -> np.ndarray:
        """Weights for (n, dim) points, shape (n,)."""

    @property
    @abstractmethod
    def expr(self) -> KernelExpr:
        pass


def _points(points) -> np.ndarray:
    return np.atleast_2d(np.asarray(points, dtype=np.float64))


def _unit_normal(normal) -> np.ndarray:
    normal = np.asarray(normal, dtype=np.float64).ravel()
    length = np.linalg.norm(normal)
    if length == 0.0:
        raise KernelError("weight normal must be nonzero")
    return normal / length


class ConstantWeight(WeightFunction):
    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, points) -> np.ndarray:
        return np.full(len(_points(points)), self.value)

    @property
    def expr(self) -> KernelExpr:
        return call("wconst", self.value)


class StepWeight(WeightFunction):
    """Hard half-space indicator: 1 where n·x >= offset, else 0."""

    def __init__(self, normal, offset: float):
        self._raw_normal = np.asarray(normal, dtype=np.float64).ravel()
        self.normal = _unit_normal(normal)
        self.offset = float(offset)

    def __call__(self, points) -> np.ndarray:
        return (_points(points) @ self.normal >= self.offset).astype(np.float64)

    @property
    def expr(self) -> KernelExpr:
        return call("step", *self._raw_normal, self.offset)


class SigmoidWeight(WeightFunction):
    """Smooth half-space blend 1 / (1 + exp(-(n·x - offset) / width))."""

    def __init__(self, normal, offset: float, width: float):
        if width <= 0:
            raise KernelError("sigmoid width must be positive")
        self._raw_normal = np.asarray(normal, dtype=np.float64).ravel()
        self.normal = _unit_normal(normal)
        self.offset = float(offset)
        self.width = float(width)

    def __call__(self, points) -> np.ndarray:
        return expit((_points(points) @ self.normal - self.offset) / self.width)

    @property
    def expr(self) -> KernelExpr:
        return call("sigmoid", *self._raw_normal, self.offset, self.width)


class BumpWeight(WeightFunction):
    """Gaussian bump exp(-|x - c|^2 / r^2) around a center."""

    def __init__(self, center, radius: float):
        if radius <= 0:
            raise KernelError("bump radius must be positive")
        self.center = np.asarray(center, dtype=np.float64).ravel()
        self.radius = float(radius)

    def __call__(self, points) -> np.ndarray:
        diff = _points(points) - self.center
        return np.exp(-np.einsum("ij,ij->i", diff, diff) / self.radius ** 2)

    @property
    def expr(self) -> KernelExpr:
        return call("bump", *self.center, self.radius)


class OneMinusWeight(WeightFunction):
    """Complement 1 - w(x)."""

    def __init__(self, inner: WeightFunction):
        self.inner = inner

    def __call__(self, points) -> np.ndarray:
        return 1.0 - self.inner(points)

    @property
    def expr(self) -> KernelExpr:
        return call("oneminus", self.inner.expr)
