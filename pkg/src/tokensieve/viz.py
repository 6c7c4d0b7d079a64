"""Patch-grid rendering: score heatmaps and selection masks as binary PGM.

Pixel (r, c) shows original token index r * cols + c (row-major). Output
is the uncompressed P5 portable graymap (maxval 255), so files are
dependency-free to write and byte-testable.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .types import SelectionResult

MASK_VISUAL = 255
MASK_TEXT = 170
MASK_MERGED = 85


def _write_pgm(path, raster: np.ndarray) -> None:
    rows, cols = raster.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (cols, rows))
        fh.write(raster.astype(np.uint8).tobytes())


def render_heat(values, grid: Tuple[int, int], path) -> None:
    """Render values in [0, 1] as grayscale intensities."""
    if grid is None:
        raise ValueError("missing grid: bundle carries no (rows, cols) layout")
    rows, cols = grid
    v = np.asarray(values, dtype=np.float64)
    if v.size != rows * cols:
        raise ValueError(
            "size mismatch: %d values cannot fill a %dx%d grid" % (v.size, rows, cols)
        )
    raster = np.rint(np.clip(v, 0.0, 1.0) * 255.0).reshape(rows, cols)
    _write_pgm(path, raster)


def render_mask(selection: SelectionResult, grid: Tuple[int, int], path) -> None:
    """Render the selection as a 3-level mask: visual-kept, text-recovered,
    merged background."""
    if grid is None:
        raise ValueError("missing grid: bundle carries no (rows, cols) layout")
    rows, cols = grid
    n = rows * cols
    for name, idx in (
        ("visual_kept", selection.visual_kept),
        ("text_recovered", selection.text_recovered),
    ):
        if idx.size and idx.max() >= n:
            raise ValueError("size mismatch: %s index outside %dx%d grid" % (name, rows, cols))
    flat = np.full(n, MASK_MERGED, dtype=np.uint8)
    flat[selection.visual_kept] = MASK_VISUAL
    flat[selection.text_recovered] = MASK_TEXT
    _write_pgm(path, flat.reshape(rows, cols))


def render_grid(data, grid: Tuple[int, int], mode: str, path) -> None:
    """Dispatch on mode: ``heat`` takes per-token values, ``mask`` a
    SelectionResult."""
    if mode == "heat":
        render_heat(data, grid, path)
    elif mode == "mask":
        render_mask(data, grid, path)
    else:
        raise ValueError("unknown render mode %r" % mode)
