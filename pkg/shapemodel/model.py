"""
Discrete Shape Models
=====================
A point-distribution model s = mean + basis @ alpha over N reference points.
Vectors are stacked point-major with xyz interleaved: [x0, y0, z0, x1, ...].
"""

import logging
from typing import Optional

import numpy as np

from errors import CoefficientError, GeometryError, UsageError
from geometry import TriangleMesh
from lowrank import LowRankGP

logger = logging.getLogger("GPMorph.ShapeModel")


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


class DiscreteModel:
    """
    Gaussian displacement model at fixed points.

    Args:
        points: (N, 3) reference points.
        mean: (3N,) mean displacement.
        basis: (3N, r) columns sqrt(lambda_i) u_i.
        variances: (r,) variance of each component.
        triangles: Optional (T, 3) connectivity of the reference mesh.
    """

    def __init__(self, points, mean, basis, variances, triangles=None):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
            raise GeometryError(f"model points must be a nonempty (N, 3) array, got {points.shape}")
        n = 3 * len(points)
        mean = np.asarray(mean, dtype=np.float64).ravel()
        basis = np.asarray(basis, dtype=np.float64).reshape(n, -1) if np.size(basis) else np.zeros((n, 0))
        variances = np.asarray(variances, dtype=np.float64).ravel()
        if mean.shape != (n,):
            raise GeometryError(f"mean must have {n} entries, got {mean.size}")
        if basis.shape[1] != len(variances):
            raise GeometryError("basis and variances disagree on the rank")
        if np.any(variances < 0):
            raise GeometryError("variances must be non-negative")

        self.points = _frozen(points)
        self.mean = _frozen(mean)
        self.basis = _frozen(basis)
        self.variances = _frozen(variances)
        self.triangles = None
        if triangles is not None:
            triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
            triangles.setflags(write=False)
            self.triangles = triangles

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def n_points(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return f"DiscreteModel(points={self.n_points}, rank={self.rank})"

    def check_coefficients(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=np.float64).ravel()
        if alpha.shape != (self.rank,):
            raise CoefficientError(f"expected {self.rank} coefficients, got {alpha.size}")
        return alpha

    def instance(self, alpha) -> np.ndarray:
        """Stacked displacements mean + basis @ alpha, shape (3N,)."""
        return self.mean + self.basis @ self.check_coefficients(alpha)

    def sample_coefficients(self, seed: int = 0) -> np.ndarray:
        return np.random.default_rng(seed).standard_normal(self.rank)

    def sample(self, seed: int = 0) -> np.ndarray:
        return self.instance(self.sample_coefficients(seed))

    def mesh(self, alpha) -> TriangleMesh:
        """Reference mesh with every vertex moved by its instance displacement."""
        if self.triangles is None:
            raise UsageError("model has no triangles; it was not built on a mesh")
        return TriangleMesh(self.points + self.instance(alpha).reshape(-1, 3), self.triangles)

    def covariance(self) -> np.ndarray:
        """(3N, 3N) model covariance basis @ basis^T."""
        return self.basis @ self.basis.T

    def truncated(self, rank: int) -> "DiscreteModel":
        if not 0 <= rank <= self.rank:
            raise UsageError(f"cannot truncate a rank-{self.rank} model to rank {rank}")
        return DiscreteModel(self.points, self.mean, self.basis[:, :rank], self.variances[:rank],
                             self.triangles)


def discretize(gp: LowRankGP, points, triangles=None) -> DiscreteModel:
    """
    Evaluate a low-rank model at fixed points.

    Column i of the basis is sqrt(lambda_i) phi_i stacked over the points, so
    instance(alpha) equals the model's displacements at the points. Variances
    are the squared column norms.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(points) == 0 or points.size == 0:
        raise UsageError("discretize needs at least one point")
    if gp.input_dim != 3 or gp.output_dim != 3:
        raise UsageError("discretize needs a model of 3D displacements over 3D points")
    basis = gp.scaled_basis(points).reshape(3 * len(points), gp.rank)
    mean = gp.mean_at(points).ravel()
    variances = np.einsum("ir,ir->r", basis, basis)
    logger.debug(f"Discretized rank-{gp.rank} model at {len(points)} points")
    return DiscreteModel(points, mean, basis, variances, triangles)
