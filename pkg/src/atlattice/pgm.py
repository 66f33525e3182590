"""Minimal 8-bit PGM (P2 ASCII / P5 binary) reading and P5 writing."""

from __future__ import annotations

import os

import numpy as np

from .lattice import Grid, ScalarField, ufield


class PGMError(ValueError):
    pass


class PGMHeaderError(PGMError):
    pass


class PGMMaxvalError(PGMError):
    pass


class PGMTruncatedError(PGMError):
    pass


def _tokens(data: bytes, count: int):
    """First ``count`` whitespace-separated header tokens and the offset after them.

    ``#`` starts a comment running to the end of the line.
    """
    out = []
    pos = 0
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PGMHeaderError("header ended early")
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        out.append(data[start:pos])
    return out, pos


def read_pgm(path) -> np.ndarray:
    """Pixel values as an integer array of shape (height, width) and the maxval."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks, pos = _tokens(data, 4)
    magic = toks[0]
    if magic not in (b"P2", b"P5"):
        raise PGMHeaderError(f"{path}: not a P2/P5 PGM file (magic {magic!r})")
    try:
        width, height, maxval = (int(t) for t in toks[1:4])
    except ValueError as exc:
        raise PGMHeaderError(f"{path}: malformed header") from exc
    if width < 1 or height < 1:
        raise PGMHeaderError(f"{path}: width and height must be positive")
    if not 1 <= maxval <= 255:
        raise PGMMaxvalError(f"{path}: maxval {maxval} unsupported (8-bit only)")
    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates header and raster
        raster = data[pos + 1:pos + 1 + count]
        if len(raster) < count:
            raise PGMTruncatedError(f"{path}: expected {count} bytes, found {len(raster)}")
        pix = np.frombuffer(raster, dtype=np.uint8).astype(np.int64)
    else:
        body = data[pos:].split()
        if len(body) < count:
            raise PGMTruncatedError(f"{path}: expected {count} values, found {len(body)}")
        try:
            pix = np.array([int(t) for t in body[:count]], dtype=np.int64)
        except ValueError as exc:
            raise PGMHeaderError(f"{path}: non-integer pixel value") from exc
    if pix.min() < 0 or pix.max() > maxval:
        raise PGMMaxvalError(f"{path}: pixel value outside [0, {maxval}]")
    return pix.reshape(height, width), maxval


def ingest_pgm(path) -> ScalarField:
    """Grey values in [0, 1] on a grid with ``delta = 1 / max(width, height)``.

    Array axis 0 is the image row (row 0 at the top), axis 1 the column.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"input file not found: {path}")
    pix, maxval = read_pgm(path)
    h, w = pix.shape
    grid = Grid.from_shape((h, w), 1.0 / max(h, w))
    return ufield(grid, (pix / maxval).ravel())


def write_pgm(path, values) -> None:
    """Write a 2D array of [0, 1] values as an 8-bit P5 file."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError("PGM output needs a 2D array")
    q = quantize(arr)
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(q.astype(np.uint8).tobytes())


def quantize(arr) -> np.ndarray:
    return np.clip(np.rint(np.asarray(arr, dtype=float) * 255.0), 0, 255).astype(np.int64)


def rescale(arr):
    """Affine map of ``arr`` to [0, 1]; returns the mapped array and (min, max)."""
    arr = np.asarray(arr, dtype=float)
    lo, hi = float(arr.min()), float(arr.max())
    if hi - lo <= 0:
        return np.zeros_like(arr), (lo, hi)
    return (arr - lo) / (hi - lo), (lo, hi)
