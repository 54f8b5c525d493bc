"""Serialisation: JSON reports, CSV tables and binary PPM images.

Floats are always written with 17 significant digits so that identical runs
give byte-identical files.
"""
from __future__ import annotations

import json
import math
from typing import IO, Iterable

import numpy as np

PPM_SIZE = 1024
PPM_PAD = 0.05


def fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits and stable key order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    # mpmath numbers and anything float-like
    return fmt_float(obj)


def write_records_csv(records, fh: IO[str]) -> None:
    fh.write("q,value,g1,g2,dichotomy,is_T_n,n\n")
    for r in records:
        n = "" if r.t_index is None else str(r.t_index)
        fh.write(
            f"{r.q},{fmt_float(r.n0_value)},{r.minimizer_g[0]},{r.minimizer_g[1]},"
            f"{r.dichotomy},{str(r.is_T_n).lower()},{n}\n"
        )


def write_cloud_csv(kind: str, chunks: Iterable[np.ndarray], fh: IO[str]) -> int:
    """Rows ``kind,index,x,y``; chunks are (n, 2) real or complex arrays."""
    fh.write("kind,index,x,y\n")
    index = 0
    for pts in chunks:
        for x, y in zip(*_split(pts)):
            fh.write(f"{kind},{index},{format(x, '.17g')},{format(y, '.17g')}\n")
            index += 1
    return index


def _split(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """x and y columns of an (n, 2) real array or of a complex vector."""
    if np.iscomplexobj(pts):
        return pts.real, pts.imag
    return pts[:, 0], pts[:, 1]


def bounding_box(chunks: Iterable[np.ndarray]) -> tuple[float, float, float, float]:
    """Padded box (x0, x1, y0, y1); chunks are (n, 2) real or complex arrays."""
    lo = np.array([np.inf, np.inf])
    hi = -lo
    for pts in chunks:
        if len(pts):
            x, y = _split(pts)
            lo = np.minimum(lo, [x.min(), y.min()])
            hi = np.maximum(hi, [x.max(), y.max()])
    if not np.all(np.isfinite(lo)):
        return (-1.0, 1.0, -1.0, 1.0)
    w = hi - lo
    w = np.where(w > 0, w, 1.0)
    lo, hi = lo - PPM_PAD * w, hi + PPM_PAD * w
    return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])


def rasterize(chunks: Iterable[np.ndarray], box, size: int = PPM_SIZE) -> np.ndarray:
    """Boolean canvas, row 0 at the top; pixel index = truncation of the scaled coordinate."""
    x0, x1, y0, y1 = box
    canvas = np.zeros((size, size), dtype=bool)
    flat = canvas.reshape(-1)
    for pts in chunks:
        if not len(pts):
            continue
        x, y = _split(pts)
        col = np.floor((x - x0) / (x1 - x0) * size).astype(np.int64)
        row = np.floor((y1 - y) / (y1 - y0) * size).astype(np.int64)
        np.clip(col, 0, size - 1, out=col)
        np.clip(row, 0, size - 1, out=row)
        flat[row * size + col] = True
    return canvas


def ppm_bytes(canvas: np.ndarray) -> bytes:
    """Binary P6: white background, black points."""
    h, w = canvas.shape
    img = np.full((h, w, 3), 255, dtype=np.uint8)
    img[canvas] = 0
    return f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes()
