"""
Scalar Images
=============
Volumetric intensity images with trilinear interpolation and the analytic
gradient of the trilinear field.

Voxel (i, j, k) has its center at origin + (i, j, k) * spacing.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from config import GeometryConfig
from errors import GeometryError

# Rounding slack (in voxels) when testing the image bounds
_EDGE_TOL = 1e-9


class ScalarImage:
    """
    Immutable 3D scalar image.

    Args:
        voxels: Intensities indexed [i, j, k] along x, y, z.
        spacing: Voxel size in mm per axis.
        origin: Center of voxel (0, 0, 0).
        mask: Optional boolean array of the same shape; False voxels are
            outside the domain.
        out_of_domain_value: Value returned outside the (masked) domain.
    """

    def __init__(self, voxels, spacing: Sequence[float] = (1.0, 1.0, 1.0),
                 origin: Sequence[float] = (0.0, 0.0, 0.0), mask=None,
                 out_of_domain_value: Optional[float] = None):
        voxels = np.array(voxels, dtype=np.float64)
        if voxels.ndim != 3 or min(voxels.shape) < 1:
            raise GeometryError(f"image voxels must be a nonempty 3D array, got shape {voxels.shape}")
        spacing = np.asarray(spacing, dtype=np.float64).reshape(3)
        if np.any(spacing <= 0):
            raise GeometryError("image spacing must be positive")
        origin = np.asarray(origin, dtype=np.float64).reshape(3)
        if mask is not None:
            mask = np.array(mask, dtype=bool)
            if mask.shape != voxels.shape:
                raise GeometryError("image mask must have the voxel array's shape")
            mask.setflags(write=False)
        if out_of_domain_value is None:
            out_of_domain_value = GeometryConfig.OUT_OF_DOMAIN_VALUE

        voxels.setflags(write=False)
        spacing.setflags(write=False)
        origin.setflags(write=False)
        self._voxels = voxels
        self._spacing = spacing
        self._origin = origin
        self._mask = mask
        self.out_of_domain_value = float(out_of_domain_value)

    # ========================================
    # Properties
    # ========================================

    @property
    def voxels(self) -> np.ndarray:
        return self._voxels

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(int(d) for d in self._voxels.shape)

    @property
    def spacing(self) -> np.ndarray:
        return self._spacing

    @property
    def origin(self) -> np.ndarray:
        return self._origin

    @property
    def mask(self) -> Optional[np.ndarray]:
        return self._mask

    def with_voxels(self, voxels) -> "ScalarImage":
        """Same geometry and mask, new intensities."""
        return ScalarImage(voxels, self._spacing, self._origin, self._mask, self.out_of_domain_value)

    def with_mask(self, mask) -> "ScalarImage":
        return ScalarImage(self._voxels, self._spacing, self._origin, mask, self.out_of_domain_value)

    # ========================================
    # Voxel geometry
    # ========================================

    def voxel_centers(self) -> np.ndarray:
        """All voxel centers, shape (prod(dims), 3), in C order of [i, j, k]."""
        axes = [self._origin[d] + np.arange(self.dims[d]) * self._spacing[d] for d in range(3)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def domain_points(self) -> np.ndarray:
        """Voxel centers inside the mask (all centers when there is no mask)."""
        centers = self.voxel_centers()
        if self._mask is None:
            return centers
        return centers[self._mask.ravel()]

    def continuous_index(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return (points - self._origin) / self._spacing

    def inside(self, points) -> np.ndarray:
        """Boolean per point: inside the bounds and, if masked, the nearest voxel is in the mask."""
        index = self.continuous_index(points)
        upper = np.asarray(self.dims, dtype=np.float64) - 1.0
        inside = np.all((index >= -_EDGE_TOL) & (index <= upper + _EDGE_TOL), axis=1)
        if self._mask is not None and np.any(inside):
            nearest = np.clip(np.rint(index[inside]).astype(np.int64), 0, upper.astype(np.int64))
            inside[inside] = self._mask[nearest[:, 0], nearest[:, 1], nearest[:, 2]]
        return inside

    # ========================================
    # Interpolation
    # ========================================

    def interpolate_with_gradient(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """
        Trilinear values and spatial gradients at many points.

        Returns:
            (values (Q,), gradients (Q, 3)). Points outside the domain get
            out_of_domain_value and a zero gradient.
        """
        index = self.continuous_index(points)
        q = len(index)
        values = np.full(q, self.out_of_domain_value)
        gradients = np.zeros((q, 3))
        inside = self.inside(points)
        if not np.any(inside):
            return values, gradients

        dims = np.asarray(self.dims, dtype=np.int64)
        c = np.clip(index[inside], 0.0, dims - 1.0)
        i0 = np.clip(np.floor(c).astype(np.int64), 0, np.maximum(dims - 2, 0))
        i1 = np.minimum(i0 + 1, dims - 1)
        f = np.where(dims > 1, c - i0, 0.0)
        fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
        gx, gy, gz = 1.0 - fx, 1.0 - fy, 1.0 - fz

        v = self._voxels
        v000 = v[i0[:, 0], i0[:, 1], i0[:, 2]]
        v100 = v[i1[:, 0], i0[:, 1], i0[:, 2]]
        v010 = v[i0[:, 0], i1[:, 1], i0[:, 2]]
        v110 = v[i1[:, 0], i1[:, 1], i0[:, 2]]
        v001 = v[i0[:, 0], i0[:, 1], i1[:, 2]]
        v101 = v[i1[:, 0], i0[:, 1], i1[:, 2]]
        v011 = v[i0[:, 0], i1[:, 1], i1[:, 2]]
        v111 = v[i1[:, 0], i1[:, 1], i1[:, 2]]

        values[inside] = (gz * (gy * (gx * v000 + fx * v100) + fy * (gx * v010 + fx * v110))
                          + fz * (gy * (gx * v001 + fx * v101) + fy * (gx * v011 + fx * v111)))

        dfx = (gz * (gy * (v100 - v000) + fy * (v110 - v010))
               + fz * (gy * (v101 - v001) + fy * (v111 - v011)))
        dfy = (gz * (gx * (v010 - v000) + fx * (v110 - v100))
               + fz * (gx * (v011 - v001) + fx * (v111 - v101)))
        dfz = (gy * (gx * (v001 - v000) + fx * (v101 - v100))
               + fy * (gx * (v011 - v010) + fx * (v111 - v110)))
        grad = np.stack([dfx, dfy, dfz], axis=1) / self._spacing
        grad[:, dims == 1] = 0.0
        gradients[inside] = grad
        return values, gradients

    def interpolate(self, points) -> np.ndarray:
        return self.interpolate_with_gradient(points)[0]

    def gradient(self, points) -> np.ndarray:
        return self.interpolate_with_gradient(points)[1]

    def __repr__(self) -> str:
        return f"ScalarImage(dims={self.dims}, spacing={tuple(self._spacing)})"


def interpolate(image: ScalarImage, x):
    """Trilinear value at a single point (float) or at an (Q, 3) array of points."""
    x = np.asarray(x, dtype=np.float64)
    values = image.interpolate(x)
    return float(values[0]) if x.ndim == 1 else values


def image_gradient(image: ScalarImage, x) -> np.ndarray:
    """Gradient of the trilinear field at a single point (3,) or many points (Q, 3)."""
    x = np.asarray(x, dtype=np.float64)
    gradients = image.gradient(x)
    return gradients[0] if x.ndim == 1 else gradients
