"""
Domain Samplers
===============
Point sets drawn from the measure the integral operator is defined on. The
Nyström points, Monte-Carlo variance estimates and probe sets all come from a
sampler, and every sampler is deterministic for a fixed seed.
"""

from abc import ABC, abstractmethod
from typing import Dict, Optional

import numpy as np
from scipy.special import ndtri

from errors import UsageError
from geometry import ScalarImage, TriangleMesh, sample_surface_points


class DomainSampler(ABC):
    """Draws n points of the domain; `kind` names the measure."""

    kind: str = ""
    input_dim: int = 3

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    @abstractmethod
    def sample(self, n: int) -> np.ndarray:
        """(n, input_dim) points."""

    def describe(self) -> Dict:
        return {"kind": self.kind, "seed": self.seed}

    def _check(self, n: int) -> int:
        if n is None or int(n) < 1:
            raise UsageError(f"sample count must be at least 1, got {n}")
        return int(n)


class SurfaceSampler(DomainSampler):
    """Area-uniform points on a reference surface."""

    kind = "surface"

    def __init__(self, mesh: TriangleMesh, seed: int = 0):
        super().__init__(seed)
        self.mesh = mesh

    def sample(self, n: int) -> np.ndarray:
        return sample_surface_points(self.mesh, self._check(n), self.seed)


class ImageBoxSampler(DomainSampler):
    """Uniform choice among the (masked) voxel centers of an image."""

    kind = "image_box"

    def __init__(self, image: ScalarImage, seed: int = 0):
        super().__init__(seed)
        self.image = image
        self._points = image.domain_points()
        if len(self._points) == 0:
            raise UsageError("image mask selects no voxels")

    def sample(self, n: int) -> np.ndarray:
        n = self._check(n)
        rng = np.random.default_rng(self.seed)
        # without replacement whenever the mask has enough voxels
        index = rng.choice(len(self._points), size=n, replace=n > len(self._points))
        return self._points[index]


class ExplicitSampler(DomainSampler):
    """
    A fixed point list. Asking for all of them (or n=None) returns them in
    order; asking for fewer returns a seeded subset.
    """

    kind = "explicit"

    def __init__(self, points, seed: int = 0):
        super().__init__(seed)
        self.points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        self.input_dim = self.points.shape[1]

    def sample(self, n: Optional[int] = None) -> np.ndarray:
        if n is None or n == len(self.points):
            return self.points.copy()
        n = self._check(n)
        if n > len(self.points):
            raise UsageError(f"requested {n} points from an explicit set of {len(self.points)}")
        rng = np.random.default_rng(self.seed)
        return self.points[np.sort(rng.choice(len(self.points), size=n, replace=False))]


class Gaussian1DSampler(DomainSampler):
    """
    Points from N(0, s2) on the real line.

    The stratified variant draws one point per probability stratum,
    x_l = s * Phi^-1((l + U_l) / n), which removes most of the Monte-Carlo
    noise from quadrature estimates.
    """

    kind = "gaussian_1d"
    input_dim = 1

    def __init__(self, s2: float, seed: int = 0, stratified: bool = True):
        super().__init__(seed)
        if not s2 > 0:
            raise UsageError(f"measure variance must be positive, got {s2}")
        self.s2 = float(s2)
        self.stratified = stratified

    def sample(self, n: int) -> np.ndarray:
        n = self._check(n)
        rng = np.random.default_rng(self.seed)
        s = np.sqrt(self.s2)
        if self.stratified:
            x = s * ndtri((np.arange(n) + rng.random(n)) / n)
        else:
            x = rng.normal(0.0, s, size=n)
        return x[:, None]

    def describe(self) -> Dict:
        return {**super().describe(), "s2": self.s2, "stratified": self.stratified}


class Interval1DSampler(DomainSampler):
    """Uniform points on [low, high], optionally stratified."""

    kind = "interval_1d"
    input_dim = 1

    def __init__(self, low: float = 0.0, high: float = 1.0, seed: int = 0, stratified: bool = True):
        super().__init__(seed)
        if not high > low:
            raise UsageError(f"interval needs high > low, got [{low}, {high}]")
        self.low, self.high = float(low), float(high)
        self.stratified = stratified

    def sample(self, n: int) -> np.ndarray:
        n = self._check(n)
        rng = np.random.default_rng(self.seed)
        if self.stratified:
            u = (np.arange(n) + rng.random(n)) / n
        else:
            u = rng.random(n)
        return (self.low + (self.high - self.low) * u)[:, None]

    def describe(self) -> Dict:
        return {**super().describe(), "low": self.low, "high": self.high, "stratified": self.stratified}


def surface(mesh: TriangleMesh, seed: int = 0) -> SurfaceSampler:
    return SurfaceSampler(mesh, seed)


def image_box(image: ScalarImage, seed: int = 0) -> ImageBoxSampler:
    return ImageBoxSampler(image, seed)


def explicit(points, seed: int = 0) -> ExplicitSampler:
    return ExplicitSampler(points, seed)


def gaussian_1d(s2: float, seed: int = 0, stratified: bool = True) -> Gaussian1DSampler:
    return Gaussian1DSampler(s2, seed, stratified)


def interval_1d(low: float = 0.0, high: float = 1.0, seed: int = 0,
                stratified: bool = True) -> Interval1DSampler:
    return Interval1DSampler(low, high, seed, stratified)
