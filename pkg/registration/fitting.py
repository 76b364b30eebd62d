"""
Fitting Loop
============
Minimizes an energy in blocks of RegistrationConfig.INNER_ITERS optimizer
iterations. Between blocks the energy refreshes its correspondences (closest
points for surfaces), evaluates itself on all integration points and tests
convergence and divergence.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Union

import numpy as np

from config import RegistrationConfig
from errors import DivergenceError, UsageError
from geometry import ScalarImage, TriangleMesh
from lowrank import LowRankGP
from regression import ObservationSet, posterior_lowrank
from .energies import Energy, SurfaceEnergy, energy_and_gradient
from .optimizers import LBFGS, Optimizer, make_optimizer
from .sampling import ModelSampling

logger = logging.getLogger("GPMorph.Registration")


@dataclass
class FitResult:
    """
    Outcome of a fit. total = data + eta * regularizer with regularizer = ||alpha||^2.

    `trace` holds the full energy at the start and after every block.
    `model` is the model alpha belongs to (the posterior model for hybrid fits).
    """
    alpha: np.ndarray
    data: float
    regularizer: float
    eta: float
    total: float
    iterations: int
    converged: bool
    trace: List[float] = field(default_factory=list)
    optimizer: str = ""
    model: Any = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "alpha": [float(a) for a in self.alpha],
            "data": float(self.data),
            "regularizer": float(self.regularizer),
            "eta": float(self.eta),
            "total": float(self.total),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "optimizer": self.optimizer,
            "trace": [float(v) for v in self.trace],
        }


def _result(energy: Energy, alpha: np.ndarray, iterations: int, converged: bool,
            trace: List[float], optimizer: Optimizer) -> FitResult:
    data = energy.data_term(alpha)
    regularizer = float(alpha @ alpha)
    return FitResult(alpha=alpha, data=data, regularizer=regularizer, eta=energy.eta,
                     total=data + energy.eta * regularizer, iterations=iterations,
                     converged=converged, trace=trace, optimizer=optimizer.name,
                     model=energy.sampling.model)


def fit(energy: Energy, optimizer: Optional[Optimizer] = None, init=None,
        max_iters: int = RegistrationConfig.DEFAULT_MAX_ITERS, tol: float = RegistrationConfig.DEFAULT_TOL,
        seed: Optional[int] = None) -> FitResult:
    """
    Minimize data(alpha) + eta ||alpha||^2.

    Converges when the gradient norm is at most tol or the energy changes by
    less than tol (relative) over a block.

    Args:
        energy: SurfaceEnergy or ImageEnergy.
        optimizer: Defaults to L-BFGS.
        init: Starting coefficients, zeros by default.
        max_iters: Iteration budget across all blocks.
        tol: Convergence tolerance.
        seed: Reseeds a stochastic optimizer when given.

    Raises:
        DivergenceError: If the energy exceeds DIVERGENCE_FACTOR times its
            starting value.
    """
    if max_iters < 0:
        raise UsageError(f"max_iters must be non-negative, got {max_iters}")
    if not tol >= 0:
        raise UsageError(f"tol must be non-negative, got {tol}")
    optimizer = optimizer or LBFGS()
    if seed is not None and hasattr(optimizer, "seed"):
        optimizer.seed = seed
    optimizer.reset()

    r = energy.rank
    alpha = np.zeros(r) if init is None else energy.sampling.check(init).copy()
    if r == 0:
        return _result(energy, alpha, 0, True, [energy.data_term(alpha)], optimizer)

    def objective(a, indices=None):
        return energy_and_gradient(energy, a, indices)

    energy.refresh(alpha)
    initial, gradient = objective(alpha)
    trace = [initial]
    previous = initial
    iterations = 0
    converged = float(np.linalg.norm(gradient)) <= tol
    tiny = np.finfo(float).tiny

    while not converged and iterations < max_iters:
        block = min(RegistrationConfig.INNER_ITERS, max_iters - iterations)
        alpha, used = optimizer.minimize(objective, alpha, block, energy.n_points)
        iterations += max(used, 1)

        energy.refresh(alpha)
        value, gradient = objective(alpha)
        trace.append(value)
        if not np.isfinite(value) or (initial > 0 and value > RegistrationConfig.DIVERGENCE_FACTOR * initial):
            raise DivergenceError(
                f"energy {value:.6g} exceeded {RegistrationConfig.DIVERGENCE_FACTOR:g}x the initial "
                f"{initial:.6g} after {iterations} iterations ({optimizer.name})")
        gradient_norm = float(np.linalg.norm(gradient))
        logger.debug(f"iter {iterations}: energy {value:.6g}, |grad| {gradient_norm:.3g}")
        if gradient_norm <= tol or abs(previous - value) < tol * max(abs(previous), tiny):
            converged = True
        previous = value

    if not converged:
        logger.warning(f"Fit stopped after {iterations} iterations without converging "
                       f"(energy {trace[-1]:.6g})")
    else:
        logger.info(f"Fit converged after {iterations} iterations, energy {trace[-1]:.6g}")
    return _result(energy, alpha, iterations, converged, trace, optimizer)


def hybrid_fit(model: LowRankGP, observations: ObservationSet, energy: Energy,
               optimizer: Optional[Optimizer] = None, init=None,
               max_iters: int = RegistrationConfig.DEFAULT_MAX_ITERS, tol: float = RegistrationConfig.DEFAULT_TOL,
               seed: Optional[int] = None) -> FitResult:
    """
    Condition the model on landmark observations, then fit the posterior model
    with the same target and integration points. Without observations this is
    exactly `fit`. The result's `model` is the posterior model.
    """
    if observations.is_empty:
        return fit(energy, optimizer, init, max_iters, tol, seed)
    _, _, posterior = posterior_lowrank(model, observations)
    logger.info(f"Posterior model for {len(observations)} landmarks has rank {posterior.rank}")
    conditioned = energy.with_model(ModelSampling.from_lowrank(posterior, energy.sampling.points))
    return fit(conditioned, optimizer, init, max_iters, tol, seed)


# ========================================
# Applying fitted coefficients
# ========================================

def warp_points(model, points, alpha) -> np.ndarray:
    """x + u(x) for a LowRankGP, or for a DiscreteModel at its own points."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if isinstance(model, LowRankGP):
        return points + model.displacements(points, alpha)
    if len(points) != len(model.points):
        raise UsageError(f"discrete model has {len(model.points)} points, got {len(points)}")
    return points + model.instance(alpha).reshape(-1, 3)


def warp_mesh(model, mesh: TriangleMesh, alpha) -> TriangleMesh:
    return mesh.with_vertices(warp_points(model, mesh.vertices, alpha))


def resample_target(model: LowRankGP, alpha, reference: ScalarImage, target: ScalarImage) -> ScalarImage:
    """I_T(x + u(x)) on the reference grid."""
    warped = warp_points(model, reference.voxel_centers(), alpha)
    return reference.with_voxels(target.interpolate(warped).reshape(reference.dims))


def surface_fitter(reference: TriangleMesh, eta: float = RegistrationConfig.ETA,
                   optimizer: Union[str, Optimizer] = "lbfgs",
                   n_points: Optional[int] = None, max_iters: int = RegistrationConfig.DEFAULT_MAX_ITERS,
                   tol: float = RegistrationConfig.DEFAULT_TOL, seed: int = 0
                   ) -> Callable[[Any, TriangleMesh], TriangleMesh]:
    """
    Closure fitting a model to a target mesh and returning the warped reference.

    n_points=None integrates over the reference vertices, which discrete
    models require. An Optimizer instance is reset before every fit.
    """
    def fitter(model, target: TriangleMesh) -> TriangleMesh:
        energy = SurfaceEnergy.create(model, reference, target, eta=eta, n_points=n_points, seed=seed)
        chosen = make_optimizer(optimizer, seed=seed) if isinstance(optimizer, str) else optimizer
        result = fit(energy, chosen, max_iters=max_iters, tol=tol)
        return warp_mesh(model, reference, result.alpha)

    return fitter
