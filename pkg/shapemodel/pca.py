"""
PCA model building from example deformation fields on a shared reference.
"""

import logging
from typing import Optional, Union

import numpy as np
from scipy import linalg

from config import NystromConfig
from errors import UsageError
from kernels import DeformationFieldSet
from .model import DiscreteModel

logger = logging.getLogger("GPMorph.ShapeModel")


def build_pca(examples: Union[DeformationFieldSet, np.ndarray], points=None,
              triangles=None) -> DiscreteModel:
    """
    Sample-mean and sample-covariance model of n example fields.

    The covariance eigenproblem is solved through the n x n Gram matrix of
    the centered examples, so at most n - 1 components survive. Components
    below NystromConfig.EIGEN_CUTOFF times the largest variance are dropped;
    each basis column is flipped so its largest-magnitude entry is positive.

    Args:
        examples: A DeformationFieldSet, or fields of shape (n, N, 3) together
            with `points`.
        points: (N, 3) reference points when examples is an array.
        triangles: Reference connectivity; taken from the set's mesh if omitted.
    """
    if isinstance(examples, DeformationFieldSet):
        points = examples.points
        fields = examples.fields
        if triangles is None and examples.mesh is not None:
            triangles = examples.mesh.triangles
    else:
        if points is None:
            raise UsageError("build_pca needs reference points for raw field arrays")
        fields = np.asarray(examples, dtype=np.float64)
    n = len(fields)
    if n < 2:
        raise UsageError(f"PCA needs at least 2 examples, got {n}")

    stacked = fields.reshape(n, -1)
    mean = stacked.mean(axis=0)
    centered = stacked - mean
    gram = centered @ centered.T / (n - 1)
    values, vectors = linalg.eigh((gram + gram.T) / 2.0)
    values, vectors = values[::-1], vectors[:, ::-1]

    keep = 0
    if values[0] > 0:
        keep = int(np.sum(values > NystromConfig.EIGEN_CUTOFF * values[0]))
    values, vectors = values[:keep], vectors[:, :keep]

    # sqrt(nu_i) u_i with u_i = centered^T v_i / sqrt((n - 1) nu_i)
    basis = centered.T @ vectors / np.sqrt(n - 1)
    if keep:
        pivot = np.argmax(np.abs(basis), axis=0)
        basis *= np.where(basis[pivot, np.arange(keep)] < 0, -1.0, 1.0)
    logger.info(f"PCA model from {n} examples keeps {keep} components")
    return DiscreteModel(points, mean, basis, values, triangles)
