"""Shared data model: token bundles, score vectors, selections, reports.

Every other module consumes these types. All payload arrays (token
matrices, class/text vectors, merged embeddings) are float32; analysis
values (LOF tables, FLOPs) live in float64. Instances are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Tuple

import numpy as np


class TokenSieveError(Exception):
    """Base class for all errors raised by this package."""


class BundleError(TokenSieveError):
    """A token bundle violates its structural invariants."""


class FileFormatError(TokenSieveError):
    """A serialized input (TKB1 container, CSV) is malformed."""


class PipelineError(TokenSieveError):
    """An internal pipeline invariant was breached (indicates a bug)."""


def _as_f32(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float32)
    arr.flags.writeable = False
    return arr


def _as_index(a) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.int64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ProjectionMap:
    """Affine map aligning token space (dim D) with text space (dim Dt).

    ``weight`` is Dt x D; ``bias`` is an optional Dt vector.
    """

    weight: np.ndarray
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "weight", _as_f32(self.weight, "weight"))
        if self.weight.ndim != 2:
            raise BundleError("projection weight must be a 2-D matrix")
        if self.bias is not None:
            object.__setattr__(self, "bias", _as_f32(self.bias, "bias"))
            if self.bias.shape != (self.weight.shape[0],):
                raise BundleError(
                    "projection bias length %d does not match weight rows %d"
                    % (self.bias.shape[0], self.weight.shape[0])
                )

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class TokenBundle:
    """One image's worth of visual tokens plus optional text context.

    ``tokens`` is N x D (one row per patch token), ``cls`` the global
    class-token vector, ``text`` an optional text-embedding vector of
    dimension Dt (with ``proj`` mapping tokens into text space whenever
    Dt != D). ``original_indices`` tracks each row's position in the
    source sequence so selections survive row permutations. ``grid``
    optionally records the (rows, cols) patch layout for rendering.
    """

    tokens: np.ndarray
    cls: Optional[np.ndarray] = None
    text: Optional[np.ndarray] = None
    proj: Optional[ProjectionMap] = None
    original_indices: Optional[np.ndarray] = None
    grid: Optional[Tuple[int, int]] = None
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tokens", _as_f32(self.tokens, "tokens"))
        if self.cls is not None:
            object.__setattr__(self, "cls", _as_f32(self.cls, "cls"))
        if self.text is not None:
            object.__setattr__(self, "text", _as_f32(self.text, "text"))
        if self.original_indices is None:
            n = self.tokens.shape[0] if self.tokens.ndim == 2 else 0
            object.__setattr__(self, "original_indices", _as_index(np.arange(n)))
        else:
            object.__setattr__(
                self, "original_indices", _as_index(self.original_indices)
            )
        if self.grid is not None:
            object.__setattr__(self, "grid", (int(self.grid[0]), int(self.grid[1])))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


def validate_bundle(bundle: TokenBundle) -> None:
    """Check every TokenBundle invariant; raise BundleError on the first failure.

    Freshly loaded bundles additionally have strictly increasing indices,
    which the TKB1 reader enforces; here only uniqueness is required so
    that row-permuted bundles remain valid pipeline inputs.
    """
    t = bundle.tokens
    if t.ndim != 2:
        raise BundleError("tokens must be a 2-D matrix, got ndim=%d" % t.ndim)
    n, d = t.shape
    if n < 1:
        raise BundleError("empty bundle: need at least one token")
    if d < 1:
        raise BundleError("empty bundle: token dimension must be >= 1")
    if not np.isfinite(t).all():
        raise BundleError("non-finite value in tokens")
    if bundle.cls is not None:
        if bundle.cls.shape != (d,):
            raise BundleError(
                "dimension mismatch: cls has shape %s, expected (%d,)"
                % (bundle.cls.shape, d)
            )
        if not np.isfinite(bundle.cls).all():
            raise BundleError("non-finite value in cls")
    idx = bundle.original_indices
    if idx.shape != (n,):
        raise BundleError("original_indices length %d != token count %d" % (len(idx), n))
    if (idx < 0).any():
        raise BundleError("original_indices must be non-negative")
    if len(np.unique(idx)) != n:
        raise BundleError("original_indices must be unique")
    if bundle.grid is not None:
        rows, cols = bundle.grid
        if rows * cols != n:
            raise BundleError("grid %dx%d does not cover %d tokens" % (rows, cols, n))
    if bundle.text is not None:
        if bundle.text.ndim != 1:
            raise BundleError("text embedding must be a vector")
        if not np.isfinite(bundle.text).all():
            raise BundleError("non-finite value in text")
        dt = bundle.text.shape[0]
        if dt != d and bundle.proj is None:
            raise BundleError(
                "dimension mismatch: text dim %d != token dim %d and no projection given"
                % (dt, d)
            )
    if bundle.proj is not None:
        w = bundle.proj.weight
        if w.shape[1] != d:
            raise BundleError(
                "dimension mismatch: projection expects dim %d tokens, bundle has %d"
                % (w.shape[1], d)
            )
        if not np.isfinite(w).all():
            raise BundleError("non-finite value in projection weight")
        if bundle.proj.bias is not None and not np.isfinite(bundle.proj.bias).all():
            raise BundleError("non-finite value in projection bias")
        if bundle.text is not None and w.shape[0] != bundle.text.shape[0]:
            raise BundleError(
                "dimension mismatch: projection outputs dim %d, text has dim %d"
                % (w.shape[0], bundle.text.shape[0])
            )


@dataclass(frozen=True)
class ScoreVector:
    """Per-token saliency: softmax output plus its min-max normalization.

    ``raw`` entries are positive and sum to 1 (within 1e-6); ``normalized``
    lies in [0, 1] and, for non-constant input, spans it exactly. ``kind``
    is ``"visual"`` or ``"text"``.
    """

    raw: np.ndarray
    normalized: np.ndarray
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "raw", _as_f32(self.raw, "raw"))
        object.__setattr__(self, "normalized", _as_f32(self.normalized, "normalized"))
        if self.kind not in ("visual", "text"):
            raise ValueError("score kind must be 'visual' or 'text'")
        if self.raw.shape != self.normalized.shape:
            raise ValueError("raw/normalized length mismatch")

    def __len__(self) -> int:
        return len(self.raw)


@dataclass(frozen=True)
class LofParams:
    """Neighborhood size and threshold for the dynamic scale filter.

    ``k`` is the LOF neighborhood size, ``tau`` the outlier threshold
    (points with factor strictly above it count), ``fallback_keep`` how
    many top-scoring tokens survive when no outlier is found and the
    caller enabled the fallback.
    """

    k: int = 20
    tau: float = 1.0
    fallback_keep: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1, got %d" % self.k)
        if self.tau < 1.0:
            raise ValueError("tau must be >= 1.0, got %r" % (self.tau,))
        if self.fallback_keep < 1:
            raise ValueError("fallback_keep must be >= 1, got %d" % self.fallback_keep)


@dataclass(frozen=True)
class OutputSlot:
    """One slot of the compressed sequence: a kept original or a merged cluster.

    ``original_index`` is the source position the slot occupies (for a
    merged slot, its seed's position); ``cluster`` is the cluster id for
    merged slots and None for kept ones.
    """

    kind: str  # "kept" | "merged"
    original_index: int
    cluster: Optional[int] = None


@dataclass(frozen=True)
class SelectionResult:
    """Disjoint index sets chosen by the pipeline plus the merged background.

    ``visual_kept`` and ``text_recovered`` hold original indices;
    ``cluster_seeds`` the original indices seeding the background merge;
    ``merged_tokens`` one averaged embedding per cluster, placed at the
    original index recorded in ``merged_placement``. ``output_order``
    lists the final slots sorted by original index.
    """

    visual_kept: np.ndarray
    text_recovered: np.ndarray
    cluster_seeds: np.ndarray
    merged_tokens: np.ndarray
    merged_placement: np.ndarray
    output_order: Tuple[OutputSlot, ...]

    def __post_init__(self):
        object.__setattr__(self, "visual_kept", _as_index(self.visual_kept))
        object.__setattr__(self, "text_recovered", _as_index(self.text_recovered))
        object.__setattr__(self, "cluster_seeds", _as_index(self.cluster_seeds))
        object.__setattr__(self, "merged_tokens", _as_f32(self.merged_tokens, "merged"))
        object.__setattr__(self, "merged_placement", _as_index(self.merged_placement))
        object.__setattr__(self, "output_order", tuple(self.output_order))

    @property
    def n_output(self) -> int:
        return len(self.output_order)


@dataclass(frozen=True)
class CompressionReport:
    """Counts, ratios, and cost estimates for one compress call."""

    n_input: int
    n_visual_kept: int
    n_text_recovered: int
    n_merged: int
    retention_ratio: float
    flops_before: float = 0.0
    flops_after: float = 0.0
    wall_time: float = 0.0
    params_used: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params_used", dict(self.params_used))
        if not (0.0 < self.retention_ratio <= 1.0):
            raise ValueError(
                "retention_ratio must lie in (0, 1], got %r" % (self.retention_ratio,)
            )
        if self.flops_after > self.flops_before:
            raise ValueError("flops_after exceeds flops_before")
