"""Loading of meshes, textures, backgrounds and split files; PNG image IO.

Images are plain numpy uint8 arrays: (H, W) grayscale, (H, W, 3) RGB,
(H, W, 4) RGBA. Meshes come from OBJ or ascii PLY files; missing normals
are generated flat per face, missing UVs fall back to a planar projection
along the axis of smallest bounding-box extent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .geometry import EmptyMesh


class AssetError(ValueError):
    pass


class ParseError(AssetError):
    def __init__(self, msg, line=None):
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)
        self.line = line


class UnsupportedFormat(AssetError):
    pass


class DuplicateIndex(AssetError):
    pass


class DecodeError(AssetError):
    pass


@dataclass
class Mesh:
    """Triangle mesh with per-corner normal/uv indexing (OBJ style).

    faces has shape (M, 3, 3): for each triangle corner, indices into
    vertices / normals / uvs respectively.
    """

    vertices: np.ndarray            # (N, 3) meters
    normals: np.ndarray             # (Nn, 3) unit
    uvs: np.ndarray                 # (Nu, 2) in [0, 1]
    faces: np.ndarray               # (M, 3, 3) int
    texture: np.ndarray | None = None  # (H, W, 3) uint8

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        self.uvs = np.asarray(self.uvs, dtype=np.float64).reshape(-1, 2)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3, 3)
        if self.faces.size:
            if self.faces[:, :, 0].max() >= len(self.vertices) or self.faces.min() < 0:
                raise ParseError("face vertex index out of range")
            if self.normals.size and self.faces[:, :, 1].max() >= len(self.normals):
                raise ParseError("face normal index out of range")
            if self.uvs.size and self.faces[:, :, 2].max() >= len(self.uvs):
                raise ParseError("face uv index out of range")


def _generate_flat_normals(vertices, faces_v):
    """One unit normal per face from the cross product of its edges."""
    a = vertices[faces_v[:, 0]]
    b = vertices[faces_v[:, 1]]
    c = vertices[faces_v[:, 2]]
    n = np.cross(b - a, c - a)
    length = np.linalg.norm(n, axis=1, keepdims=True)
    length[length < 1e-20] = 1.0
    return n / length


def _generate_planar_uvs(vertices):
    """Project along the axis of smallest AABB extent, normalized to [0,1]."""
    lo = vertices.min(axis=0)
    hi = vertices.max(axis=0)
    extent = hi - lo
    drop = int(np.argmin(extent))
    keep = [a for a in range(3) if a != drop]
    span = np.maximum(extent[keep], 1e-12)
    return (vertices[:, keep] - lo[keep]) / span


def _finalize_mesh(vertices, normals, uvs, faces, texture, scale):
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3) * scale
    if len(vertices) == 0:
        raise EmptyMesh("mesh file contains no vertices")
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3, 3)
    if normals is None or len(normals) == 0:
        normals = _generate_flat_normals(vertices, faces[:, :, 0])
        faces = faces.copy()
        faces[:, :, 1] = np.arange(len(faces))[:, None]
    else:
        normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        length = np.linalg.norm(normals, axis=1, keepdims=True)
        length[length < 1e-20] = 1.0
        normals = normals / length
    if uvs is None or len(uvs) == 0:
        uvs = _generate_planar_uvs(vertices)
        faces = faces.copy()
        faces[:, :, 2] = faces[:, :, 0]
    else:
        uvs = np.asarray(uvs, dtype=np.float64).reshape(-1, 2)
        uvs = uvs - np.floor(uvs)  # wrap into [0, 1)
    return Mesh(vertices=vertices, normals=normals, uvs=uvs, faces=faces,
                texture=texture)


def _parse_obj_index(token, count, line_no):
    idx = int(token)
    if idx > 0:
        idx -= 1
    elif idx < 0:
        idx += count
    else:
        raise ParseError("OBJ indices are 1-based, got 0", line=line_no)
    if not (0 <= idx < count):
        raise ParseError(f"index {token} out of range ({count} entries)", line=line_no)
    return idx


def _load_obj(path: Path, scale, texture):
    vertices, normals, uvs, faces = [], [], [], []
    with open(path, "r") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    vertices.append([float(x) for x in parts[1:4]])
                elif tag == "vn":
                    normals.append([float(x) for x in parts[1:4]])
                elif tag == "vt":
                    uvs.append([float(x) for x in parts[1:3]])
                elif tag == "f":
                    corners = []
                    for tok in parts[1:]:
                        fields = tok.split("/")
                        vi = _parse_obj_index(fields[0], len(vertices), line_no)
                        ti = ni = -1
                        if len(fields) > 1 and fields[1]:
                            ti = _parse_obj_index(fields[1], len(uvs), line_no)
                        if len(fields) > 2 and fields[2]:
                            ni = _parse_obj_index(fields[2], len(normals), line_no)
                        corners.append((vi, ni, ti))
                    if len(corners) < 3:
                        raise ParseError("face with fewer than 3 vertices", line=line_no)
                    for i in range(1, len(corners) - 1):  # fan triangulation
                        faces.append([corners[0], corners[i], corners[i + 1]])
            except ParseError:
                raise
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), line=line_no) from exc
    if not faces:
        raise ParseError("OBJ file contains no faces")
    faces = np.asarray(faces, dtype=np.int64)
    # Corners may mix explicit and missing normal/uv references; regenerate
    # whenever any corner lacks one.
    if (faces[:, :, 1] < 0).any():
        normals = []
    if (faces[:, :, 2] < 0).any():
        uvs = []
    return _finalize_mesh(vertices, normals, uvs, faces, texture, scale)


def _load_ply(path: Path, scale, texture):
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise UnsupportedFormat("only ascii PLY is supported") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing ply magic", line=1)
    elements = []  # (name, count, [property names])
    i = 1
    while i < len(lines):
        parts = lines[i].split()
        i += 1
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise UnsupportedFormat(f"PLY format {parts[1]} not supported")
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before element", line=i)
            elements[-1][2].append(parts[-1])
        elif parts[0] == "end_header":
            break
    else:
        raise ParseError("missing end_header")

    vertices, normals, uvs, faces = [], [], [], []
    for name, count, props in elements:
        for _ in range(count):
            if i >= len(lines):
                raise ParseError("unexpected end of file", line=i)
            vals = lines[i].split()
            i += 1
            if name == "vertex":
                row = dict(zip(props, (float(v) for v in vals)))
                try:
                    vertices.append([row["x"], row["y"], row["z"]])
                except KeyError as exc:
                    raise ParseError(f"vertex missing {exc}", line=i)
                if {"nx", "ny", "nz"} <= row.keys():
                    normals.append([row["nx"], row["ny"], row["nz"]])
                if {"u", "v"} <= row.keys():
                    uvs.append([row["u"], row["v"]])
                elif {"s", "t"} <= row.keys():
                    uvs.append([row["s"], row["t"]])
            elif name == "face":
                n = int(vals[0])
                idx = [int(v) for v in vals[1:1 + n]]
                for j in range(1, n - 1):
                    tri = [idx[0], idx[j], idx[j + 1]]
                    faces.append([[v, v, v] for v in tri])
    if not faces:
        raise ParseError("PLY file contains no faces")
    faces = np.asarray(faces, dtype=np.int64)
    if faces[:, :, 0].max() >= len(vertices) or faces.min() < 0:
        raise ParseError("face index out of range")
    if len(normals) != len(vertices):
        normals = []
    if len(uvs) != len(vertices):
        uvs = []
    return _finalize_mesh(vertices, normals, uvs, faces, texture, scale)


def load_mesh(path, scale: float = 1.0, texture_path=None) -> Mesh:
    """Load an OBJ or ascii PLY mesh.

    scale converts file units to meters (1e-3 for millimeter assets).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    texture = load_image(texture_path) if texture_path else None
    ext = path.suffix.lower()
    if ext == ".obj":
        return _load_obj(path, scale, texture)
    if ext == ".ply":
        return _load_ply(path, scale, texture)
    raise UnsupportedFormat(f"unsupported mesh format: {ext}")


def load_split(path) -> list[int]:
    """One integer frame id per line; blank lines ignored; order preserved."""
    indices = []
    seen = set()
    with open(path, "r") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                idx = int(line)
            except ValueError as exc:
                raise ParseError(f"not an integer: {line!r}", line=line_no) from exc
            if idx < 0:
                raise ParseError(f"negative frame id {idx}", line=line_no)
            if idx in seen:
                raise DuplicateIndex(f"frame id {idx} listed twice (line {line_no})")
            seen.add(idx)
            indices.append(idx)
    return indices


def load_image(path) -> np.ndarray:
    """Decode an image file to an (H, W, 3) uint8 RGB array."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise DecodeError(f"cannot decode {path}: {exc}") from exc


def save_image(img: np.ndarray, path) -> None:
    """Write a gray/RGB/RGBA uint8 array as PNG (lossless round-trip)."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise AssetError(f"expected uint8 image, got {img.dtype}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img).save(path, format="PNG")
