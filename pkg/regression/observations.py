"""
Observation sets for Gaussian process regression: known deformation values at
points, with isotropic Gaussian noise.
"""

import logging
from typing import Sequence

import numpy as np

from errors import ObservationError
from geometry import Landmark, check_unique_names

logger = logging.getLogger("GPMorph.Regression")


class ObservationSet:
    """
    Observed values y_i at points x_i with noise variance sigma^2.

    Args:
        points: (m, input_dim) observation points.
        values: (m, output_dim) observed deformation values.
        noise_variance: sigma^2 >= 0, shared by all components.

    Raises:
        ObservationError: shape mismatch, negative noise, or the same point
            observed with different values while sigma^2 = 0.
    """

    def __init__(self, points, values, noise_variance: float = 0.0):
        points = np.asarray(points, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if points.ndim != 2 or values.ndim != 2 or len(points) != len(values):
            raise ObservationError(
                f"points and values must be (m, dim) arrays of equal length, "
                f"got {points.shape} and {values.shape}"
            )
        if not noise_variance >= 0:
            raise ObservationError(f"noise variance must be non-negative, got {noise_variance}")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(values))):
            raise ObservationError("observations must be finite")
        self.noise_variance = float(noise_variance)

        if self.noise_variance == 0.0 and len(points):
            unique, first, inverse = np.unique(points, axis=0, return_index=True, return_inverse=True)
            inverse = inverse.ravel()
            if len(unique) < len(points):
                if np.any(values != values[first][inverse]):
                    raise ObservationError("a point is observed with conflicting values and zero noise")
                # exact repeats carry no information and make the system singular
                keep = np.sort(first)
                logger.debug(f"Dropped {len(points) - len(keep)} repeated observations")
                points, values = points[keep], values[keep]
        self.points = points
        self.values = values

    @classmethod
    def empty(cls, input_dim: int = 3, output_dim: int = 3, noise_variance: float = 0.0) -> "ObservationSet":
        return cls(np.empty((0, input_dim)), np.empty((0, output_dim)), noise_variance)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_empty(self) -> bool:
        return len(self.points) == 0

    @property
    def input_dim(self) -> int:
        return self.points.shape[1]

    @property
    def output_dim(self) -> int:
        return self.values.shape[1]

    def concatenate(self, other: "ObservationSet") -> "ObservationSet":
        if other.noise_variance != self.noise_variance:
            raise ObservationError("cannot concatenate observation sets with different noise")
        return ObservationSet(np.vstack([self.points, other.points]),
                              np.vstack([self.values, other.values]), self.noise_variance)

    def __repr__(self) -> str:
        return f"ObservationSet(m={len(self)}, noise_variance={self.noise_variance:g})"


def observations_from_landmarks(reference: Sequence[Landmark], target: Sequence[Landmark],
                                noise_variance: float = 0.0) -> ObservationSet:
    """
    Pair landmarks by name; observed values are target minus reference positions.

    Names present in only one set are skipped with a warning.
    """
    reference = check_unique_names(reference)
    target = check_unique_names(target)
    targets = {lm.name: lm for lm in target}
    matched = [(lm, targets[lm.name]) for lm in reference if lm.name in targets]
    unmatched = {lm.name for lm in reference} ^ set(targets)
    if unmatched:
        logger.warning(f"Landmarks without a partner are ignored: {sorted(unmatched)}")
    if not matched:
        if reference or target:
            raise ObservationError("reference and target landmarks share no names")
        return ObservationSet.empty(noise_variance=noise_variance)
    points = np.array([ref.point for ref, _ in matched])
    values = np.array([tgt.point for _, tgt in matched]) - points
    return ObservationSet(points, values, noise_variance)
