"""
Low-Rank Model Files
====================
A model is a JSON manifest plus little-endian float64 sidecars next to it:

    model.gpm                  manifest (kernel DSL text, eigenvalues, shapes)
    model.points.bin           Nyström points, (n, input_dim)
    model.weights.bin          extension weights, (n * output_dim, rank)
    model.mean_weights.bin     optional posterior mean weights, (n * output_dim,)

The manifest embeds the canonical kernel text, so loading rebuilds the kernel
and reproduces eigenfunction evaluation exactly.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np

from config import OutputConfig
from errors import FileFormatError, UsageError
from kernels import KernelExpr, ZeroMean, build_kernel, format_kernel, parse_kernel
from .model import LowRankGP

logger = logging.getLogger("GPMorph.LowRank")

PathLike = Union[str, Path]

_DTYPE = np.dtype("<f8")


def _sidecar(path: Path, name: str) -> Path:
    return path.with_name(f"{path.stem}.{name}.bin")


def write_array(path: Path, array: np.ndarray) -> None:
    np.ascontiguousarray(array, dtype=_DTYPE).tofile(path)


def read_array(path: Path, shape) -> np.ndarray:
    try:
        data = np.fromfile(path, dtype=_DTYPE)
    except OSError as e:
        raise FileFormatError(f"cannot read {path}: {e}") from e
    expected = int(np.prod(shape))
    if data.size != expected:
        raise FileFormatError(f"{path}: expected {expected} values, found {data.size}")
    return data.reshape(shape).astype(np.float64)


def _has_unsaved_data(expr) -> bool:
    if isinstance(expr, KernelExpr):
        if expr.name in ("empirical", "posterior") and any(a == "" for a in expr.args):
            return True
        return any(_has_unsaved_data(a) for a in expr.args)
    return False


def save_lowrank(gp: LowRankGP, path: PathLike) -> Path:
    """
    Write a model manifest and its sidecars.

    Raises:
        UsageError: the kernel or mean refers to in-memory data with no file behind it.
    """
    path = OutputConfig.ensure_parent(Path(path))
    expr = gp.kernel.expr
    if _has_unsaved_data(expr):
        raise UsageError("kernel uses in-memory datasets or landmarks and cannot be saved; "
                         "build it from files instead")
    if gp.mean_ref == "custom" and not gp.base_mean.is_zero:
        raise UsageError("models with a custom mean function cannot be saved")
    mean_ref = "zero" if gp.mean_ref == "custom" else gp.mean_ref

    files: Dict[str, str] = {}
    for name, array in (("points", gp.points), ("weights", gp.weights), ("mean_weights", gp.mean_weights)):
        if array is None:
            continue
        sidecar = _sidecar(path, name)
        write_array(sidecar, array)
        files[name] = sidecar.name

    manifest = {
        "format": OutputConfig.LOWRANK_FORMAT,
        "version": OutputConfig.MANIFEST_VERSION,
        "kernel_dsl": format_kernel(expr),
        "mean_ref": mean_ref,
        "n": gp.n,
        "seed": gp.seed,
        "rank": gp.rank,
        "input_dim": gp.input_dim,
        "output_dim": gp.output_dim,
        "eigenvalues": [float(v) for v in gp.eigenvalues],
        "total_variance": gp.total_variance,
        "reference": gp.reference,
        "files": files,
    }
    path.write_text(json.dumps(manifest, indent=OutputConfig.JSON_INDENT) + "\n", encoding="utf-8")
    logger.info(f"Saved rank-{gp.rank} model to {path}")
    return path


def load_lowrank(path: PathLike) -> LowRankGP:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise FileFormatError(f"cannot read model {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(manifest, dict) or manifest.get("format") != OutputConfig.LOWRANK_FORMAT:
        raise FileFormatError(f"{path}: not a low-rank model file")
    if manifest.get("version") != OutputConfig.MANIFEST_VERSION:
        raise FileFormatError(f"{path}: unsupported model version {manifest.get('version')}")

    try:
        kernel = build_kernel(parse_kernel(manifest["kernel_dsl"]), path.parent)
        n, rank = int(manifest["n"]), int(manifest["rank"])
        input_dim, output_dim = int(manifest["input_dim"]), int(manifest["output_dim"])
        files = manifest["files"]
        eigenvalues = np.array(manifest["eigenvalues"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, UsageError):
            raise
        raise FileFormatError(f"{path}: malformed manifest: {e}") from e
    if kernel.output_dim != output_dim or len(eigenvalues) != rank:
        raise FileFormatError(f"{path}: manifest is inconsistent with its kernel")

    points = read_array(path.parent / files["points"], (n, input_dim))
    weights = read_array(path.parent / files["weights"], (n * output_dim, rank))
    mean_weights = None
    if "mean_weights" in files:
        mean_weights = read_array(path.parent / files["mean_weights"], (n * output_dim,))

    mean = ZeroMean(output_dim) if manifest.get("mean_ref") == "zero" else kernel.mean()
    return LowRankGP(kernel, mean, points, weights, eigenvalues, manifest["total_variance"],
                     mean_weights=mean_weights, reference=manifest.get("reference"),
                     seed=manifest.get("seed", 0), mean_ref=manifest.get("mean_ref", "kernel"))
