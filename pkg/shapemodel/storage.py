"""
Discrete Model Files
====================
JSON manifest plus little-endian float64 sidecars:

    model.dsm                 manifest (shapes, layout, variances)
    model.points.bin          reference points, (N, 3)
    model.mean.bin            mean, (3N,) point-major, xyz interleaved
    model.basis.bin           basis, (3N, r) row-major
    model.variances.bin       variances, (r,)
    model.triangles.bin       optional connectivity, (T, 3) stored as float64
"""

import json
import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np

from config import OutputConfig
from errors import FileFormatError
from lowrank import read_array, write_array
from .model import DiscreteModel

logger = logging.getLogger("GPMorph.ShapeModel")

PathLike = Union[str, Path]

LAYOUT = "point-major-xyz"


def _sidecar(path: Path, name: str) -> Path:
    return path.with_name(f"{path.stem}.{name}.bin")


def save_discrete(model: DiscreteModel, path: PathLike) -> Path:
    path = OutputConfig.ensure_parent(Path(path))
    arrays = {"points": model.points, "mean": model.mean, "basis": model.basis,
              "variances": model.variances}
    if model.triangles is not None:
        arrays["triangles"] = model.triangles.astype(np.float64)
    files: Dict[str, str] = {}
    for name, array in arrays.items():
        sidecar = _sidecar(path, name)
        write_array(sidecar, array)
        files[name] = sidecar.name

    manifest = {
        "format": OutputConfig.DISCRETE_FORMAT,
        "version": OutputConfig.MANIFEST_VERSION,
        "layout": LAYOUT,
        "n_points": model.n_points,
        "rank": model.rank,
        "n_triangles": 0 if model.triangles is None else len(model.triangles),
        "variances": [float(v) for v in model.variances],
        "files": files,
    }
    path.write_text(json.dumps(manifest, indent=OutputConfig.JSON_INDENT) + "\n", encoding="utf-8")
    logger.info(f"Saved rank-{model.rank} discrete model to {path}")
    return path


def load_discrete(path: PathLike) -> DiscreteModel:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise FileFormatError(f"cannot read model {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(manifest, dict) or manifest.get("format") != OutputConfig.DISCRETE_FORMAT:
        raise FileFormatError(f"{path}: not a discrete model file")
    if manifest.get("version") != OutputConfig.MANIFEST_VERSION or manifest.get("layout") != LAYOUT:
        raise FileFormatError(f"{path}: unsupported model version or layout")

    try:
        n, rank = int(manifest["n_points"]), int(manifest["rank"])
        n_triangles = int(manifest.get("n_triangles", 0))
        files = manifest["files"]
        points = read_array(path.parent / files["points"], (n, 3))
        mean = read_array(path.parent / files["mean"], (3 * n,))
        basis = read_array(path.parent / files["basis"], (3 * n, rank))
        variances = read_array(path.parent / files["variances"], (rank,))
        triangles = None
        if n_triangles:
            triangles = read_array(path.parent / files["triangles"], (n_triangles, 3)).astype(np.int64)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, FileFormatError):
            raise
        raise FileFormatError(f"{path}: malformed manifest: {e}") from e
    return DiscreteModel(points, mean, basis, variances, triangles)
