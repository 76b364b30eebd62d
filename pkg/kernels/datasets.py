"""
Deformation-Field Sets
======================
Example deformation fields on a shared reference, the sample-covariance
(empirical) kernel built from them, and the JSON manifest format:

    {"reference": "ref.ply", "fields": ["f0.csv", "f1.csv", ...]}

Each field CSV has the header `x,y,z,dx,dy,dz`, one row per reference vertex,
with positions equal to the reference vertices.
"""

import csv
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from config import OutputConfig
from errors import FileFormatError, KernelError
from geometry import TriangleMesh, read_ply, write_ply
from .base import MatrixKernel, as_points
from .expr import KernelExpr, call
from .means import EmpiricalMean, MeanFunction

logger = logging.getLogger("GPMorph.Kernels")

PathLike = Union[str, Path]

# Field CSV positions must match the reference vertices this closely
POSITION_TOLERANCE = 1e-9

_FIELD_HEADER = ["x", "y", "z", "dx", "dy", "dz"]


class DeformationFieldSet:
    """
    n displacement fields sampled at the same N reference points.

    Args:
        points: Reference points, shape (N, dim).
        fields: Displacements, shape (n, N, d).
        mesh: Optional reference mesh the points are the vertices of.
        source: Manifest path the set was read from, if any.
    """

    def __init__(self, points, fields, mesh: Optional[TriangleMesh] = None,
                 source: Optional[PathLike] = None):
        self.points = as_points(points)
        fields = np.asarray(fields, dtype=np.float64)
        if fields.ndim == 2:
            fields = fields[:, :, None]
        if fields.ndim != 3 or fields.shape[1] != len(self.points):
            raise KernelError(
                f"fields must have shape (n, {len(self.points)}, d), got {fields.shape}"
            )
        if not np.all(np.isfinite(fields)):
            raise KernelError("deformation fields contain non-finite values")
        self.fields = fields
        self.mesh = mesh
        self.source = str(Path(source).resolve()) if source is not None else None

    @classmethod
    def from_meshes(cls, reference: TriangleMesh, meshes: Sequence[TriangleMesh]) -> "DeformationFieldSet":
        """Fields as vertex differences of meshes in correspondence with the reference."""
        fields = []
        for mesh in meshes:
            if mesh.n_vertices != reference.n_vertices:
                raise KernelError("meshes are not in correspondence with the reference")
            fields.append(mesh.vertices - reference.vertices)
        return cls(reference.vertices, np.array(fields), mesh=reference)

    @property
    def n_fields(self) -> int:
        return self.fields.shape[0]

    @property
    def output_dim(self) -> int:
        return self.fields.shape[2]

    def mean_field(self) -> np.ndarray:
        return self.fields.mean(axis=0)

    def centered(self) -> np.ndarray:
        return self.fields - self.mean_field()[None]

    def __repr__(self) -> str:
        return f"DeformationFieldSet(fields={self.n_fields}, points={len(self.points)})"


class EmpiricalKernel(MatrixKernel):
    """
    Sample covariance kernel of a deformation-field set.

    k(x, y) = 1/(n-1) sum_i (u_i(x) - mu(x)) (u_i(y) - mu(y))^T, where
    off-reference queries use the nearest reference point.
    """

    def __init__(self, dataset: DeformationFieldSet):
        if dataset.n_fields < 2:
            raise KernelError(f"empirical kernel needs at least 2 fields, got {dataset.n_fields}")
        self.dataset = dataset
        self.output_dim = dataset.output_dim
        self._tree = cKDTree(dataset.points)
        self._centered = dataset.centered()
        self._norm = 1.0 / (dataset.n_fields - 1)

    def _lookup(self, points) -> np.ndarray:
        _, index = self._tree.query(as_points(points))
        return index

    def cross(self, X, Y) -> np.ndarray:
        a = self._centered[:, self._lookup(X)]
        b = self._centered[:, self._lookup(Y)]
        return np.einsum("kia,kjb->ijab", a, b) * self._norm

    def diagonal(self, X) -> np.ndarray:
        a = self._centered[:, self._lookup(X)]
        return np.einsum("kia,kib->iab", a, a) * self._norm

    def mean(self) -> MeanFunction:
        return EmpiricalMean(self._tree, self.dataset.mean_field())

    @property
    def expr(self) -> KernelExpr:
        # in-memory sets have no path; such kernels cannot be saved
        return call("empirical", self.dataset.source or "")


def empirical(dataset: DeformationFieldSet) -> EmpiricalKernel:
    return EmpiricalKernel(dataset)


# ========================================
# Manifest I/O
# ========================================

def _read_field(path: Path, reference: np.ndarray) -> np.ndarray:
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as e:
        raise FileFormatError(f"cannot read deformation field {path}: {e}") from e
    if not rows or [c.strip().lower() for c in rows[0]] != _FIELD_HEADER:
        raise FileFormatError(f"{path}: expected header 'x,y,z,dx,dy,dz'")
    body = [row for row in rows[1:] if row and "".join(row).strip()]
    try:
        data = np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    except ValueError as e:
        raise FileFormatError(f"{path}: non-numeric entry") from e
    if data.shape != (len(reference), 6):
        raise KernelError(
            f"{path}: field has {len(body)} rows, reference has {len(reference)} points"
        )
    if np.max(np.abs(data[:, :3] - reference)) > POSITION_TOLERANCE:
        raise KernelError(f"{path}: field positions do not match the reference point set")
    return data[:, 3:]


def load_deformation_set(path: PathLike) -> DeformationFieldSet:
    """Load a deformation-field manifest; relative paths resolve against the manifest."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise FileFormatError(f"cannot read dataset manifest {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(manifest, dict) or "reference" not in manifest or "fields" not in manifest:
        raise FileFormatError(f"{path}: manifest needs 'reference' and 'fields'")

    base = path.parent
    reference = read_ply(base / manifest["reference"])
    fields = [_read_field(base / name, reference.vertices) for name in manifest["fields"]]
    logger.info(f"Loaded {len(fields)} deformation fields from {path}")
    return DeformationFieldSet(reference.vertices, np.array(fields).reshape(len(fields), -1, 3),
                               mesh=reference, source=path)


def write_deformation_set(path: PathLike, reference: TriangleMesh, fields,
                          names: Optional[List[str]] = None) -> Path:
    """Write a manifest, the reference PLY and one CSV per field next to it."""
    path = OutputConfig.ensure_parent(Path(path))
    fields = np.asarray(fields, dtype=np.float64)
    stem = path.stem
    names = names or [f"{stem}_{i:03d}.csv" for i in range(len(fields))]
    ref_name = f"{stem}_reference.ply"
    write_ply(path.parent / ref_name, reference)
    for name, field in zip(names, fields):
        with (path.parent / name).open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(_FIELD_HEADER)
            for p, u in zip(reference.vertices, field):
                writer.writerow([format(float(v), OutputConfig.FLOAT_FORMAT) for v in (*p, *u)])
    manifest = {"reference": ref_name, "fields": list(names)}
    path.write_text(json.dumps(manifest, indent=OutputConfig.JSON_INDENT) + "\n", encoding="utf-8")
    return path
