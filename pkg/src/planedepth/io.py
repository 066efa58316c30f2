"""File formats: PFM float images, 16-bit PNG depth/labels, JSON records.

PFM carries float32 data losslessly (NaN bit patterns included) and is the
native transport for depth and normal maps. Depth can also travel as 16-bit
PNG in millimeters (0 = invalid <-> NaN) for interop with common RGB-D
tooling. Sparse depth, planes, gravity, and metrics are JSON documents
validated against the schemas shipped in planedepth/schemas/.
"""

import json
from importlib import resources

import jsonschema
import numpy as np
from PIL import Image

from .core import CameraIntrinsics, SparseDepth
from .errors import DimensionMismatchError, ParseError
from .plane_refine import Plane

_SCHEMA_CACHE = {}


def load_schema(name):
    """Load a bundled JSON schema by name (e.g. 'sparse_depth')."""
    if name not in _SCHEMA_CACHE:
        ref = resources.files("planedepth.schemas").joinpath(f"{name}.schema.json")
        _SCHEMA_CACHE[name] = json.loads(ref.read_text(encoding="utf-8"))
    return _SCHEMA_CACHE[name]


def validate_doc(doc, schema_name, source=""):
    try:
        jsonschema.validate(doc, load_schema(schema_name))
    except jsonschema.ValidationError as exc:
        where = f" in {source}" if source else ""
        raise ParseError(f"invalid {schema_name} document{where}: {exc.message}")


# --- PFM ---------------------------------------------------------------


def _read_token(f):
    """Read one whitespace-delimited ASCII token, tracking the byte offset."""
    token = b""
    while True:
        offset = f.tell()
        ch = f.read(1)
        if ch == b"":
            if token:
                return token, offset
            raise ParseError("unexpected end of PFM header", offset=offset)
        if ch.isspace():
            if token:
                return token, offset
            continue
        token += ch


def read_pfm(path):
    """Read a PFM image as float32, (H, W) or (H, W, 3), NaN preserved."""
    with open(path, "rb") as f:
        magic, off = _read_token(f)
        if magic == b"PF":
            channels = 3
        elif magic == b"Pf":
            channels = 1
        else:
            raise ParseError(f"not a PFM file (magic {magic!r})", offset=off)
        try:
            width = int(_read_token(f)[0])
            height = int(_read_token(f)[0])
            scale = float(_read_token(f)[0])
        except ValueError:
            raise ParseError("malformed PFM header field", offset=f.tell())
        if width <= 0 or height <= 0:
            raise ParseError("non-positive PFM dimensions", offset=f.tell())
        endian = "<" if scale < 0 else ">"
        count = width * height * channels
        data_offset = f.tell()
        buf = f.read(count * 4)
        if len(buf) != count * 4:
            raise ParseError(
                f"PFM data truncated: expected {count * 4} bytes, got {len(buf)}",
                offset=data_offset + len(buf),
            )
    img = np.frombuffer(buf, dtype=endian + "f4")
    if endian == ">":
        img = img.astype("<f4")
    shape = (height, width, 3) if channels == 3 else (height, width)
    # PFM stores rows bottom-to-top.
    return np.flipud(img.reshape(shape)).copy()


def write_pfm(path, img):
    """Write a float image as little-endian PFM, bit-exact for float32."""
    img = np.asarray(img)
    if img.ndim == 2:
        magic = b"Pf"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"PF"
    else:
        raise DimensionMismatchError("PFM images must be (H, W) or (H, W, 3)")
    data = np.flipud(img).astype("<f4", copy=False)
    with open(path, "wb") as f:
        f.write(magic + b"\n")
        f.write(f"{img.shape[1]} {img.shape[0]}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(data.tobytes())


# --- 16-bit PNG --------------------------------------------------------


def read_depth_png(path):
    """Read a 16-bit millimeter PNG as a float depth image (0 -> NaN)."""
    arr = np.asarray(Image.open(path)).astype(np.float64)
    if arr.ndim != 2:
        raise ParseError(f"{path}: depth PNG must be single-channel")
    depth = arr / 1000.0
    depth[arr == 0] = np.nan
    return depth


def write_depth_png(path, depth):
    """Write depth as 16-bit millimeter PNG; NaN becomes 0 (invalid).

    Depths round to the nearest millimeter; anything beyond 65.535 m
    saturates, and sub-half-millimeter depths collapse to invalid.
    """
    depth = np.asarray(depth, dtype=np.float64)
    mm = np.where(np.isfinite(depth), np.clip(np.rint(depth * 1000.0), 0, 65535), 0)
    Image.fromarray(mm.astype(np.uint16)).save(path, format="PNG")


def read_labels_png(path):
    """Read a 16-bit label PNG (0 = unlabeled)."""
    arr = np.asarray(Image.open(path))
    if arr.ndim != 2:
        raise ParseError(f"{path}: label PNG must be single-channel")
    return arr.astype(np.int32)


def write_labels_png(path, labels):
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 65535:
        raise DimensionMismatchError("labels must fit in uint16")
    Image.fromarray(labels.astype(np.uint16)).save(path, format="PNG")


# --- JSON records -------------------------------------------------------


def dump_json(path, doc):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", offset=exc.pos)


def read_sparse_json(path):
    doc = load_json(path)
    validate_doc(doc, "sparse_depth", source=str(path))
    return SparseDepth.from_entries([(e["u"], e["v"], e["z"]) for e in doc])


def write_sparse_json(path, sd):
    doc = [{"u": u, "v": v, "z": z} for u, v, z in sd.entries()]
    dump_json(path, doc)


def read_planes_json(path):
    """Read planes as a list of (label, Plane); labels default to 1..N."""
    doc = load_json(path)
    validate_doc(doc, "planes", source=str(path))
    out = []
    for i, rec in enumerate(doc):
        label = int(rec.get("label", i + 1))
        out.append((label, Plane(np.asarray(rec["n"], dtype=np.float64), rec["d"])))
    return out


def write_planes_json(path, planes):
    """Write (label, Plane) pairs or a {label: Plane} mapping."""
    if isinstance(planes, dict):
        planes = sorted(planes.items())
    doc = [
        {"label": int(label), "n": [float(x) for x in p.n], "d": float(p.d)}
        for label, p in planes
    ]
    dump_json(path, doc)


def read_gravity_json(path):
    doc = load_json(path)
    validate_doc(doc, "gravity", source=str(path))
    g = np.asarray(doc, dtype=np.float64)
    norm = np.linalg.norm(g)
    if abs(norm - 1.0) > 1e-6:
        raise ParseError(f"{path}: gravity vector must be unit length")
    return g


def write_gravity_json(path, g):
    dump_json(path, [float(x) for x in np.asarray(g).reshape(3)])


def read_intrinsics_doc(doc, source=""):
    """Build CameraIntrinsics from an already-parsed JSON object."""
    validate_doc(doc, "intrinsics", source=source)
    return CameraIntrinsics(
        fx=doc["fx"],
        fy=doc["fy"],
        cx=doc["cx"],
        cy=doc["cy"],
        width=doc["width"],
        height=doc["height"],
    )


def read_intrinsics_json(path):
    return read_intrinsics_doc(load_json(path), source=str(path))


def write_intrinsics_json(path, K):
    dump_json(
        path,
        {
            "fx": K.fx,
            "fy": K.fy,
            "cx": K.cx,
            "cy": K.cy,
            "width": K.width,
            "height": K.height,
        },
    )


def write_metrics_json(path, metrics):
    """Write a DepthMetrics/NormalMetrics (or plain dict) as JSON."""
    doc = metrics if isinstance(metrics, dict) else metrics.as_dict()
    validate_doc(doc, "metrics")
    dump_json(path, doc)


def metrics_to_json_str(metrics):
    doc = metrics if isinstance(metrics, dict) else metrics.as_dict()
    validate_doc(doc, "metrics")
    return json.dumps(doc, indent=2, sort_keys=True)


def read_cloud_json(path):
    """Read a point cloud stored as a JSON list of [x, y, z] triples."""
    doc = load_json(path)
    if not isinstance(doc, list):
        raise ParseError(f"{path}: point cloud must be a JSON array")
    cloud = np.asarray(doc, dtype=np.float64)
    if cloud.size and (cloud.ndim != 2 or cloud.shape[1] != 3):
        raise ParseError(f"{path}: each point must be an [x, y, z] triple")
    return cloud.reshape(-1, 3)
