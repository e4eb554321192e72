"""File formats: 16-bit PGM fields with JSON sidecars, 1-bit PGM bitmaps,
contour JSON, CSV dumps, polygon rasterization, and content hashing.

All writers are deterministic: repeated runs with identical inputs produce
byte-identical files (no timestamps, sorted JSON keys, fixed float format).
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .fields import BinaryPattern, ScalarField

_FLOAT_FMT = ".17g"


def _fmt(x: float) -> str:
    return format(float(x), _FLOAT_FMT)


def content_hash(*chunks: bytes) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.hexdigest()


def hash_file(path) -> str:
    return content_hash(Path(path).read_bytes())


def hash_json(obj) -> str:
    return content_hash(json.dumps(obj, sort_keys=True).encode())


# ---------------------------------------------------------------------------
# PGM

def write_field_pgm(f: ScalarField, path, extra_meta: dict | None = None):
    """16-bit big-endian P5 with min/max mapping recorded in a JSON sidecar."""
    path = Path(path)
    lo = float(f.values.min())
    hi = float(f.values.max())
    span = hi - lo
    if span == 0.0:
        scaled = np.zeros_like(f.values, dtype=np.uint16)
    else:
        scaled = np.round((f.values - lo) / span * 65535.0).astype(np.uint16)
    header = f"P5\n{f.ny} {f.nx}\n65535\n".encode()
    path.write_bytes(header + scaled.astype(">u2").tobytes())
    meta = {
        "format": "pgm16",
        "nx": f.nx, "ny": f.ny,
        "spacing": f.spacing,
        "origin": [f.origin[0], f.origin[1]],
        "min": lo, "max": hi,
    }
    if extra_meta:
        meta.update(extra_meta)
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True, indent=1)
                                  + "\n")


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


_PGM_RE = re.compile(rb"^(P[25])\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s")


def _parse_pgm(data: bytes):
    m = _PGM_RE.match(data)
    if not m:
        raise ConfigurationError("not a P2/P5 PGM file")
    magic, w, h, maxval = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
    if magic == b"P5":
        raw = data[m.end():]
        if maxval > 255:
            arr = np.frombuffer(raw, dtype=">u2", count=w * h).astype(float)
        else:
            arr = np.frombuffer(raw, dtype=np.uint8, count=w * h).astype(float)
    else:
        arr = np.array(data[m.end():].split()[: w * h], dtype=float)
    return arr.reshape(h, w), maxval


def read_field_pgm(path) -> ScalarField:
    """Read a 16-bit field PGM, un-mapping values through its sidecar."""
    path = Path(path)
    arr, maxval = _parse_pgm(path.read_bytes())
    meta = json.loads(sidecar_path(path).read_text())
    lo, hi = meta["min"], meta["max"]
    vals = lo + arr / float(maxval) * (hi - lo) if hi > lo else np.full_like(arr, lo)
    return ScalarField(vals, meta["spacing"], tuple(meta["origin"]))


def write_pattern_pgm(p: BinaryPattern, path, extra_meta: dict | None = None):
    """1-bit P5 bitmap (maxval 1) plus the contour JSON alongside."""
    path = Path(path)
    header = f"P5\n{p.grid.ny} {p.grid.nx}\n1\n".encode()
    path.write_bytes(header + p.bitmap.astype(np.uint8).tobytes())
    meta = {
        "format": "pgm1",
        "nx": p.grid.nx, "ny": p.grid.ny,
        "spacing": p.grid.spacing,
        "origin": [p.grid.origin[0], p.grid.origin[1]],
    }
    if extra_meta:
        meta.update(extra_meta)
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True, indent=1)
                                  + "\n")


def write_contours_json(p: BinaryPattern, path, level: float | None = None):
    payload = {
        "level": 0.5 if level is None else level,
        "polylines": [poly.tolist() for poly in p.contour],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def read_mask(path, spacing: float | None = None,
              origin: tuple[float, float] | None = None) -> ScalarField:
    """Read a mask from PGM (with or without sidecar), PNG, or polygon JSON.

    PGM/PNG values are normalized to [0, 1] by maxval unless a sidecar maps
    them.  Polygon JSON needs the grid geometry passed in.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".json":
        if spacing is None:
            raise ConfigurationError("polygon masks need grid spacing")
        return rasterize_polygons(json.loads(path.read_text()), spacing, origin)
    if suffix == ".png":
        from PIL import Image

        arr = np.asarray(Image.open(path).convert("I")).astype(float)
        arr = arr / arr.max() if arr.max() > 0 else arr
        sc = spacing if spacing is not None else 1.0
        org = origin if origin is not None else (0.0, 0.0)
        return ScalarField(arr, sc, org)
    if sidecar_path(path).exists():
        return read_field_pgm(path)
    arr, maxval = _parse_pgm(path.read_bytes())
    sc = spacing if spacing is not None else 1.0
    org = origin if origin is not None else (0.0, 0.0)
    return ScalarField(arr / maxval, sc, org)


# ---------------------------------------------------------------------------
# CSV

def write_field_csv(f: ScalarField, path):
    """Raw row-major dump with the header nx,ny,spacing,origin_x,origin_y."""
    lines = ["nx,ny,spacing,origin_x,origin_y",
             f"{f.nx},{f.ny},{_fmt(f.spacing)},{_fmt(f.origin[0])},{_fmt(f.origin[1])}"]
    for row in f.values:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path) -> ScalarField:
    text = Path(path).read_text().strip().split("\n")
    if text[0] != "nx,ny,spacing,origin_x,origin_y":
        raise ConfigurationError("bad field CSV header")
    nx, ny, spacing, ox, oy = text[1].split(",")
    nx, ny = int(nx), int(ny)
    vals = np.array([[float(v) for v in line.split(",")]
                     for line in text[2:2 + nx]])
    if vals.shape != (nx, ny):
        raise ConfigurationError("field CSV body does not match its header")
    return ScalarField(vals, float(spacing), (float(ox), float(oy)))


# ---------------------------------------------------------------------------
# polygon targets

def rasterize_polygons(payload: dict, spacing: float,
                       origin: tuple[float, float] | None = None,
                       shape: tuple[int, int] | None = None) -> ScalarField:
    """Rasterize polygon JSON by the exact cell-center even-odd rule.

    Payload: {"grid": {"n": int, "spacing": ..., "window": ...}?,
              "polygons": [{"points": [[x, y], ...]}, ...]}.
    Edges crossing the horizontal ray through a center use the half-open
    convention [y0, y1), which makes the test deterministic for shared
    vertices.
    """
    grid_info = payload.get("grid", {})
    if shape is None:
        n = int(grid_info.get("n", 0))
        if n < 2:
            raise ConfigurationError("polygon payload needs grid.n >= 2")
        shape = (n, n)
    if origin is None:
        half = (shape[0] - 1) / 2.0 * spacing
        origin = (-half, -half)
    xs = origin[0] + spacing * np.arange(shape[0])
    ys = origin[1] + spacing * np.arange(shape[1])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    inside = np.zeros(shape, dtype=bool)
    for poly in payload.get("polygons", []):
        pts = np.asarray(poly["points"], dtype=float)
        if pts.shape[0] < 3:
            raise ConfigurationError("polygons need at least 3 points")
        crossings = np.zeros(shape, dtype=np.int64)
        m = pts.shape[0]
        for i in range(m):
            x0, y0 = pts[i]
            x1, y1 = pts[(i + 1) % m]
            if y0 == y1:
                continue
            cond = ((Y >= min(y0, y1)) & (Y < max(y0, y1)))
            x_at = x0 + (Y - y0) / (y1 - y0) * (x1 - x0)
            crossings += (cond & (x_at > X)).astype(np.int64)
        inside ^= (crossings % 2).astype(bool)
    return ScalarField(inside.astype(float), spacing, origin)
