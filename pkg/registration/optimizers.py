"""
Coefficient-space optimizers. Each runs a bounded block of iterations on an
objective `f(alpha, indices=None) -> (value, gradient)`; the fitting loop
strings blocks together and decides convergence.
"""

import logging
from abc import ABC, abstractmethod
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from config import RegistrationConfig
from errors import UsageError

logger = logging.getLogger("GPMorph.Registration")

Objective = Callable[..., Tuple[float, np.ndarray]]

# Armijo sufficient-decrease constant and halving limit
_ARMIJO = 1e-4
_MAX_HALVINGS = 40


class Optimizer(ABC):
    name: str = ""

    def reset(self) -> None:
        """Clear state carried between blocks. Called once at the start of a fit."""

    @abstractmethod
    def minimize(self, objective: Objective, alpha: np.ndarray, max_iters: int,
                 n_points: int) -> Tuple[np.ndarray, int]:
        """
        Run up to max_iters iterations from alpha.

        Returns:
            (new alpha, iterations performed).
        """

    def get_config(self) -> dict:
        return {"name": self.name}


class GradientDescent(Optimizer):
    """
    Steepest descent. With backtracking, each step halves from the previous
    accepted step (doubled) until the Armijo condition holds, so the energy never
    increases; without it the step is fixed.
    """

    name = "gd"

    def __init__(self, step: float = RegistrationConfig.GD_STEP, backtracking: bool = True):
        if not step > 0:
            raise UsageError(f"step must be positive, got {step}")
        self.step = float(step)
        self.backtracking = backtracking
        self._trial = self.step

    def reset(self) -> None:
        self._trial = self.step

    def minimize(self, objective, alpha, max_iters, n_points):
        if not self.backtracking:
            for _ in range(max_iters):
                alpha = alpha - self.step * objective(alpha)[1]
            return alpha, max_iters

        value, gradient = objective(alpha)
        for iteration in range(max_iters):
            slope = float(gradient @ gradient)
            if slope == 0.0:
                return alpha, iteration
            t = self._trial
            for _ in range(_MAX_HALVINGS):
                candidate = alpha - t * gradient
                candidate_value, candidate_gradient = objective(candidate)
                if candidate_value <= value - _ARMIJO * t * slope:
                    break
                t *= 0.5
            else:
                logger.debug("Backtracking found no decrease; stopping block")
                return alpha, iteration
            alpha, value, gradient = candidate, candidate_value, candidate_gradient
            self._trial = 2.0 * t
        return alpha, max_iters

    def get_config(self) -> dict:
        return {"name": self.name, "step": self.step, "backtracking": self.backtracking}


class LBFGS(Optimizer):
    """Limited-memory BFGS through scipy's L-BFGS-B without bounds."""

    name = "lbfgs"

    def __init__(self, memory: int = RegistrationConfig.LBFGS_MEMORY):
        if memory < 1:
            raise UsageError(f"memory must be at least 1, got {memory}")
        self.memory = int(memory)

    def minimize(self, objective, alpha, max_iters, n_points):
        values = []

        def function(x):
            value, gradient = objective(x)
            values.append(value)
            return value, gradient

        result = minimize(function, alpha, jac=True, method="L-BFGS-B",
                          options={"maxiter": max_iters, "maxcor": self.memory,
                                   "ftol": 1e-15, "gtol": 1e-12})
        # abnormal line-search exits can leave x worse than the start
        if values and result.fun > values[0]:
            logger.debug(f"L-BFGS-B ended above its starting energy ({result.message})")
            return alpha, int(result.nit)
        return np.asarray(result.x, dtype=np.float64), int(result.nit)

    def get_config(self) -> dict:
        return {"name": self.name, "memory": self.memory}


class StochasticGradientDescent(Optimizer):
    """
    Gradient steps on random mini-batches of integration points with step
    size step / (1 + t / decay); decay=None keeps the step constant. A batch at
    least as large as the point set uses every point and draws nothing.
    """

    name = "sgd"

    def __init__(self, batch: int = RegistrationConfig.SGD_BATCH, step: float = RegistrationConfig.SGD_STEP,
                 decay: Optional[float] = RegistrationConfig.SGD_DECAY, seed: int = 0):
        if batch < 1:
            raise UsageError(f"batch must be at least 1, got {batch}")
        if not step > 0:
            raise UsageError(f"step must be positive, got {step}")
        if decay is not None and not decay > 0:
            raise UsageError(f"decay must be positive, got {decay}")
        self.batch = int(batch)
        self.step = float(step)
        self.decay = decay
        self.seed = seed
        self.reset()

    def reset(self) -> None:
        self._rng = np.random.default_rng(self.seed)
        self._t = 0

    def step_size(self, t: int) -> float:
        if self.decay is None:
            return self.step
        return self.step / (1.0 + t / self.decay)

    def minimize(self, objective, alpha, max_iters, n_points):
        for _ in range(max_iters):
            indices = None
            if self.batch < n_points:
                indices = self._rng.choice(n_points, size=self.batch, replace=False)
            alpha = alpha - self.step_size(self._t) * objective(alpha, indices)[1]
            self._t += 1
        return alpha, max_iters

    def get_config(self) -> dict:
        return {"name": self.name, "batch": self.batch, "step": self.step,
                "decay": self.decay, "seed": self.seed}


OPTIMIZERS = ("lbfgs", "gd", "sgd")


def make_optimizer(name: str, seed: int = 0, **options) -> Optimizer:
    """Optimizer by CLI name: "lbfgs", "gd" or "sgd"."""
    if name == "lbfgs":
        return LBFGS(**options)
    if name == "gd":
        return GradientDescent(**options)
    if name == "sgd":
        return StochasticGradientDescent(seed=seed, **options)
    raise UsageError(f"unknown optimizer '{name}', expected one of {', '.join(OPTIMIZERS)}")
