"""
Model Quality Metrics
=====================
Specificity (how close random instances stay to the training shapes),
compactness (variance captured by the leading components) and generalization
(how well the model fits an unseen shape).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple

import numpy as np

from config import RuntimeConfig, ShapeModelConfig
from errors import UsageError
from geometry import ClosestPointIndex, TriangleMesh, sample_surface_points, symmetric_mean_distance
from lowrank import LowRankGP
from .model import DiscreteModel

logger = logging.getLogger("GPMorph.ShapeModel")


class _Target:
    """A training mesh with its closest-point index and surface samples precomputed."""

    def __init__(self, mesh: TriangleMesh, n_samples: int, seed: int):
        self.index = ClosestPointIndex(mesh)
        self.samples = sample_surface_points(mesh, n_samples, seed)


def _distance(target: _Target, own_samples: np.ndarray,
              own_index: ClosestPointIndex) -> float:
    """Symmetric mean distance with the same sampling as symmetric_mean_distance."""
    forward = float(np.mean(target.index.query(own_samples)[1]))
    backward = float(np.mean(own_index.query(target.samples)[1]))
    return max(forward, backward)


def specificity(model: DiscreteModel, training: Sequence[TriangleMesh],
                n_samples: int = ShapeModelConfig.SPECIFICITY_SAMPLES, seed: int = 0,
                distance_samples: int = ShapeModelConfig.DISTANCE_SAMPLES) -> float:
    """
    Mean over random model instances of the distance to the closest training mesh.

    Coefficients for all instances come from one generator seeded with `seed`;
    instances are measured in parallel and averaged in draw order.
    """
    if len(training) == 0:
        raise UsageError("specificity needs at least one training mesh")
    if n_samples < 1:
        raise UsageError(f"n_samples must be positive, got {n_samples}")
    targets = [_Target(mesh, distance_samples, seed) for mesh in training]
    coefficients = np.random.default_rng(seed).standard_normal((n_samples, model.rank))

    def measure(alpha: np.ndarray) -> float:
        instance = model.mesh(alpha)
        own_samples = sample_surface_points(instance, distance_samples, seed)
        own_index = ClosestPointIndex(instance)
        return min(_distance(t, own_samples, own_index) for t in targets)

    with ThreadPoolExecutor(max_workers=RuntimeConfig.THREADS) as pool:
        distances: List[float] = list(pool.map(measure, coefficients))
    value = float(np.mean(distances))
    logger.info(f"Specificity over {n_samples} samples: {value:.6g}")
    return value


def compactness(model, m: int) -> float:
    """Sum of the m largest-variance components (all of them when m exceeds the rank)."""
    variances = model.eigenvalues if isinstance(model, LowRankGP) else model.variances
    if m < 0:
        raise UsageError(f"component count must be non-negative, got {m}")
    ordered = np.sort(np.asarray(variances))[::-1]
    return float(np.sum(ordered[:m]))


def compactness_curve(model) -> np.ndarray:
    """compactness(m) for m = 1..rank."""
    variances = model.eigenvalues if isinstance(model, LowRankGP) else model.variances
    return np.cumsum(np.sort(np.asarray(variances))[::-1])


def generalization(model, held_out: TriangleMesh, fitter: Callable[..., TriangleMesh],
                   n_samples: int = ShapeModelConfig.DISTANCE_SAMPLES, seed: int = 0) -> float:
    """Symmetric mean distance between the held-out mesh and the model fitted to it."""
    fitted = fitter(model, held_out)
    return symmetric_mean_distance(fitted, held_out, n_samples, seed)


def generalization_errors(model, held_out: Sequence[TriangleMesh], fitter: Callable[..., TriangleMesh],
                          n_samples: int = ShapeModelConfig.DISTANCE_SAMPLES,
                          seed: int = 0) -> Tuple[float, List[float]]:
    """Per-mesh generalization distances and their mean."""
    if len(held_out) == 0:
        raise UsageError("generalization needs at least one held-out mesh")
    errors = [generalization(model, mesh, fitter, n_samples, seed) for mesh in held_out]
    return float(np.mean(errors)), errors
