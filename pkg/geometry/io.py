"""
Geometry File Formats
=====================
ASCII PLY meshes, MetaImage volumes (text header + raw float32 sidecar) and
landmark CSV files.

Writers format numbers with OutputConfig.FLOAT_FORMAT, so writing the same
data twice produces byte-identical files.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from config import OutputConfig
from errors import FileFormatError, GeometryError
from .image import ScalarImage
from .mesh import Landmark, TriangleMesh, check_unique_names

logger = logging.getLogger("GPMorph.Geometry")

PathLike = Union[str, Path]


def _fmt(value: float) -> str:
    return format(float(value), OutputConfig.FLOAT_FORMAT)


# ========================================
# PLY
# ========================================

def read_ply(path: PathLike) -> TriangleMesh:
    """Read an ASCII PLY file with `vertex` (x, y, z) and triangular `face` elements."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise FileFormatError(f"cannot read PLY file {path}: {e}") from e
    if not lines or lines[0].strip() != "ply":
        raise FileFormatError(f"{path}: not a PLY file")

    elements = []  # [name, count, [property names]]
    body_start = None
    for number, line in enumerate(lines[1:], start=1):
        tokens = line.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise FileFormatError(f"{path}: only ASCII PLY is supported")
        elif tokens[0] == "element":
            elements.append([tokens[1], int(tokens[2]), []])
        elif tokens[0] == "property":
            if not elements:
                raise FileFormatError(f"{path}: property before any element")
            elements[-1][2].append(tokens[-1])
        elif tokens[0] == "end_header":
            body_start = number + 1
            break
    if body_start is None:
        raise FileFormatError(f"{path}: missing end_header")

    vertices = np.zeros((0, 3))
    faces = np.zeros((0, 3), dtype=np.int64)
    cursor = body_start
    try:
        for name, count, properties in elements:
            rows = [lines[cursor + i].split() for i in range(count)]
            cursor += count
            if name == "vertex":
                columns = [properties.index(axis) for axis in ("x", "y", "z")]
                vertices = np.array([[float(row[c]) for c in columns] for row in rows]).reshape(-1, 3)
            elif name == "face":
                if any(int(row[0]) != 3 for row in rows):
                    raise FileFormatError(f"{path}: only triangular faces are supported")
                faces = np.array([[int(v) for v in row[1:4]] for row in rows], dtype=np.int64).reshape(-1, 3)
    except (IndexError, ValueError) as e:
        raise FileFormatError(f"{path}: malformed PLY body ({e})") from e

    logger.debug(f"Read {path}: {len(vertices)} vertices, {len(faces)} faces")
    return TriangleMesh(vertices, faces)


def write_ply(path: PathLike, mesh: TriangleMesh) -> Path:
    """Write an ASCII PLY file with the same element subset the reader accepts."""
    path = OutputConfig.ensure_parent(Path(path))
    out = [
        "ply",
        "format ascii 1.0",
        "comment GPMorph",
        f"element vertex {mesh.n_vertices}",
        "property float x",
        "property float y",
        "property float z",
        f"element face {mesh.n_triangles}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    out.extend(" ".join(_fmt(v) for v in vertex) for vertex in mesh.vertices)
    out.extend("3 " + " ".join(str(int(i)) for i in face) for face in mesh.triangles)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


# ========================================
# MetaImage
# ========================================

def _parse_header(path: Path) -> Dict[str, str]:
    header = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise FileFormatError(f"cannot read MetaImage header {path}: {e}") from e
    for line in text.splitlines():
        if "=" not in line:
            continue
        key, value = line.split("=", 1)
        header[key.strip()] = value.strip()
    return header


def read_metaimage(path: PathLike, out_of_domain_value: Optional[float] = None) -> ScalarImage:
    """Read a 3D MET_FLOAT MetaImage (.mhd header with raw little-endian sidecar)."""
    path = Path(path)
    header = _parse_header(path)
    try:
        if int(header.get("NDims", "3")) != 3:
            raise FileFormatError(f"{path}: only 3D images are supported")
        dims = [int(v) for v in header["DimSize"].split()]
        spacing = [float(v) for v in header.get("ElementSpacing", "1 1 1").split()]
        origin = [float(v) for v in header.get("Offset", header.get("Origin", "0 0 0")).split()]
        data_file = header["ElementDataFile"]
    except (KeyError, ValueError) as e:
        raise FileFormatError(f"{path}: incomplete MetaImage header ({e})") from e
    if header.get("ElementType", "MET_FLOAT") != "MET_FLOAT":
        raise FileFormatError(f"{path}: only ElementType = MET_FLOAT is supported")
    if header.get("BinaryDataByteOrderMSB", "False").lower() == "true":
        raise FileFormatError(f"{path}: big-endian payloads are not supported")
    if data_file == "LOCAL":
        raise FileFormatError(f"{path}: embedded (LOCAL) payloads are not supported")

    raw_path = path.parent / data_file
    try:
        data = np.fromfile(raw_path, dtype="<f4")
    except OSError as e:
        raise FileFormatError(f"cannot read image payload {raw_path}: {e}") from e
    if data.size != int(np.prod(dims)):
        raise FileFormatError(f"{raw_path}: expected {int(np.prod(dims))} voxels, found {data.size}")

    # x varies fastest in the file
    voxels = data.reshape(dims[2], dims[1], dims[0]).transpose(2, 1, 0).astype(np.float64)
    return ScalarImage(voxels, spacing, origin, out_of_domain_value=out_of_domain_value)


def read_mask(path: PathLike) -> np.ndarray:
    """Read a MetaImage and return its nonzero voxels as a boolean mask."""
    return read_metaimage(path).voxels != 0


def write_metaimage(path: PathLike, image: ScalarImage) -> Path:
    """Write image as <name>.mhd plus <name>.raw (float32, little-endian)."""
    path = OutputConfig.ensure_parent(Path(path))
    raw_path = path.with_suffix(".raw")
    header = [
        "ObjectType = Image",
        "NDims = 3",
        "BinaryData = True",
        "BinaryDataByteOrderMSB = False",
        "ElementSpacing = " + " ".join(_fmt(v) for v in image.spacing),
        "DimSize = " + " ".join(str(d) for d in image.dims),
        "Offset = " + " ".join(_fmt(v) for v in image.origin),
        "ElementType = MET_FLOAT",
        f"ElementDataFile = {raw_path.name}",
    ]
    path.write_text("\n".join(header) + "\n", encoding="utf-8")
    np.ascontiguousarray(image.voxels.transpose(2, 1, 0)).astype("<f4").tofile(raw_path)
    return path


# ========================================
# Landmarks
# ========================================

def read_landmarks(path: PathLike) -> List[Landmark]:
    """Read a `name,x,y,z` CSV with a header row. Names must be unique."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as e:
        raise FileFormatError(f"cannot read landmark file {path}: {e}") from e
    if not rows or [c.strip().lower() for c in rows[0]] != ["name", "x", "y", "z"]:
        raise FileFormatError(f"{path}: expected header 'name,x,y,z'")
    landmarks = []
    for row in rows[1:]:
        if not row or not "".join(row).strip():
            continue
        if len(row) != 4:
            raise FileFormatError(f"{path}: landmark rows need 4 columns, got {row}")
        try:
            landmarks.append(Landmark(row[0].strip(), tuple(float(v) for v in row[1:])))
        except ValueError as e:
            raise FileFormatError(f"{path}: bad coordinate in {row}") from e
    try:
        return check_unique_names(landmarks)
    except GeometryError as e:
        raise FileFormatError(f"{path}: {e}") from e


def write_landmarks(path: PathLike, landmarks: Sequence[Landmark]) -> Path:
    path = OutputConfig.ensure_parent(Path(path))
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["name", "x", "y", "z"])
        for landmark in landmarks:
            writer.writerow([landmark.name] + [_fmt(v) for v in landmark.point])
    return path
