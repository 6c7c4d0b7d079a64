"""Bit-exact serialization: the TKB1 tensor container, CSV import, reports.

TKB1 layout::

    bytes 0..3    magic "TKB1"
    bytes 4..11   header length (unsigned 64-bit little-endian)
    next          UTF-8 JSON header
    rest          raw payload

The header declares each tensor as ``{"shape": [...], "offset": N}``
under ``"tensors"``; dtype is always 32-bit little-endian float,
row-major. ``"tokens"`` and ``"cls"`` are required; ``"text"``,
``"proj_w"``, ``"proj_b"`` optional. ``original_indices``, ``grid`` and
free-form ``meta`` ride along as plain JSON. Offsets are relative to the
start of the payload, spans must not overlap and must fit inside it.
"""

from __future__ import annotations

import json
import struct
from typing import Dict, Optional, Sequence

import numpy as np

from .types import (
    CompressionReport,
    FileFormatError,
    ProjectionMap,
    TokenBundle,
    validate_bundle,
)

MAGIC = b"TKB1"

_TENSOR_ORDER = ("tokens", "cls", "text", "proj_w", "proj_b")


def write_bundle(bundle: TokenBundle, path) -> None:
    """Serialize a validated bundle; the writer output is byte-deterministic."""
    validate_bundle(bundle)
    tensors: Dict[str, np.ndarray] = {"tokens": bundle.tokens}
    if bundle.cls is not None:
        tensors["cls"] = bundle.cls
    if bundle.text is not None:
        tensors["text"] = bundle.text
    if bundle.proj is not None:
        tensors["proj_w"] = bundle.proj.weight
        if bundle.proj.bias is not None:
            tensors["proj_b"] = bundle.proj.bias

    entries = {}
    payload = bytearray()
    for name in _TENSOR_ORDER:
        if name not in tensors:
            continue
        arr = tensors[name]
        entries[name] = {"shape": list(arr.shape), "offset": len(payload)}
        payload += arr.astype("<f4").tobytes()

    header = {"tensors": entries}
    header["original_indices"] = [int(i) for i in bundle.original_indices]
    if bundle.grid is not None:
        header["grid"] = [bundle.grid[0], bundle.grid[1]]
    if bundle.meta:
        header["meta"] = bundle.meta
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode(
        "utf-8"
    )

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(bytes(payload))


def _read_tensor(payload: bytes, entry, name: str) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in entry["shape"])
        offset = int(entry["offset"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError("malformed header: bad entry for tensor %r" % name) from exc
    if offset < 0 or any(s < 0 for s in shape):
        raise FileFormatError("malformed header: negative shape/offset for %r" % name)
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    end = offset + 4 * count
    if end > len(payload):
        raise FileFormatError(
            "truncated payload: tensor %r needs bytes [%d, %d) of %d"
            % (name, offset, end, len(payload))
        )
    flat = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
    return flat.astype(np.float32).reshape(shape)


def read_bundle(path) -> TokenBundle:
    """Read and validate a TKB1 file; indices default to 0..N-1 when absent."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise FileFormatError("bad magic: not a TKB1 file")
    (header_len,) = struct.unpack("<Q", blob[4:12])
    if 12 + header_len > len(blob):
        raise FileFormatError("truncated payload: header length exceeds file size")
    try:
        header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FileFormatError("malformed header: %s" % exc) from exc
    if not isinstance(header, dict) or not isinstance(header.get("tensors"), dict):
        raise FileFormatError("malformed header: missing tensor table")
    entries = header["tensors"]
    for required in ("tokens", "cls"):
        if required not in entries:
            raise FileFormatError("malformed header: required tensor %r absent" % required)
    unknown = set(entries) - set(_TENSOR_ORDER)
    if unknown:
        raise FileFormatError("malformed header: unknown tensors %s" % sorted(unknown))

    payload = blob[12 + header_len :]
    spans = []
    arrays = {}
    for name in _TENSOR_ORDER:
        if name in entries:
            arrays[name] = _read_tensor(payload, entries[name], name)
            count = arrays[name].size
            offset = int(entries[name]["offset"])
            spans.append((offset, offset + 4 * count, name))
    spans.sort()
    for (_, end_a, name_a), (start_b, _, name_b) in zip(spans, spans[1:]):
        if start_b < end_a:
            raise FileFormatError(
                "malformed header: tensors %r and %r overlap" % (name_a, name_b)
            )

    proj: Optional[ProjectionMap] = None
    if "proj_w" in arrays:
        proj = ProjectionMap(arrays["proj_w"], arrays.get("proj_b"))
    elif "proj_b" in arrays:
        raise FileFormatError("malformed header: proj_b present without proj_w")

    indices = header.get("original_indices")
    if indices is not None:
        try:
            indices = np.asarray([int(i) for i in indices], dtype=np.int64)
        except (TypeError, ValueError) as exc:
            raise FileFormatError("malformed header: bad original_indices") from exc
        if len(indices) > 1 and not (np.diff(indices) > 0).all():
            raise FileFormatError(
                "malformed header: original_indices must be strictly increasing"
            )
    grid = header.get("grid")
    if grid is not None:
        if not (isinstance(grid, list) and len(grid) == 2):
            raise FileFormatError("malformed header: grid must be [rows, cols]")
        grid = (int(grid[0]), int(grid[1]))

    bundle = TokenBundle(
        tokens=arrays["tokens"],
        cls=arrays.get("cls"),
        text=arrays.get("text"),
        proj=proj,
        original_indices=indices,
        grid=grid,
        meta=header.get("meta", {}),
    )
    validate_bundle(bundle)
    return bundle


def read_csv_matrix(path) -> np.ndarray:
    """Load a rectangular numeric CSV as a row-major float32 matrix."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise FileFormatError(
                    "ragged rows: line %d has %d cells, expected %d"
                    % (lineno, len(cells), width)
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise FileFormatError(
                    "non-numeric cell on line %d: %s" % (lineno, exc)
                ) from exc
    if not rows:
        raise FileFormatError("empty CSV")
    return np.asarray(rows, dtype=np.float32)


def _flatten_params(params, prefix="param") -> Sequence:
    items = []
    for key in sorted(params):
        value = params[key]
        dotted = "%s.%s" % (prefix, key)
        if isinstance(value, dict):
            items.extend(_flatten_params(value, dotted))
        else:
            items.append((dotted, value))
    return items


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return "%d" % value
    if isinstance(value, (float, np.floating)):
        return "%.6g" % value
    return str(value)


def format_report(report: CompressionReport) -> str:
    """Render a report as fixed-order ``key = value`` text.

    FLOPs use scientific notation with 6 significant digits; identical
    reports always format to identical bytes.
    """
    lines = [
        "n_input = %d" % report.n_input,
        "n_visual_kept = %d" % report.n_visual_kept,
        "n_text_recovered = %d" % report.n_text_recovered,
        "n_merged = %d" % report.n_merged,
        "retention_ratio = %.6f" % report.retention_ratio,
        "flops_before = %.5e" % report.flops_before,
        "flops_after = %.5e" % report.flops_after,
        "wall_time = %.6f" % report.wall_time,
    ]
    for key, value in _flatten_params(report.params_used):
        lines.append("%s = %s" % (key, _fmt_value(value)))
    return "\n".join(lines) + "\n"


def write_report(report: CompressionReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_report(report))


def write_scores_csv(path, original_indices, score) -> None:
    """Write ``index,raw,normalized`` rows; %.9g keeps float32 exact."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,raw,normalized\n")
        for idx, r, n in zip(original_indices, score.raw, score.normalized):
            fh.write("%d,%.9g,%.9g\n" % (idx, r, n))
