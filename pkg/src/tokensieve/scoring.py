"""Similarity scores: class-token (visual) and text-embedding (text) saliency.

Both scores share one kernel: scaled dot products against a probe
vector, softmax over the token axis, then min-max normalization to
[0, 1]. The scaling divisor is sqrt of the probe's vector dimension
(attention-style scaling).

Determinism: every per-token dot product reduces over that row only, in
fixed column order, and the softmax denominator uses an exactly-rounded
float64 sum. Results are therefore bitwise identical under any row
permutation of the input and any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .types import BundleError, ProjectionMap, ScoreVector, TokenBundle

_F32_TINY = float(np.finfo(np.float32).tiny)


def _rowwise_dot(matrix: np.ndarray, vector: np.ndarray, threads: int = 1) -> np.ndarray:
    """Per-row dot products in float64, row-local so chunking is invisible."""
    m = np.asarray(matrix, dtype=np.float64)
    v = np.asarray(vector, dtype=np.float64)
    if threads <= 1 or m.shape[0] < 2 * threads:
        return (m * v).sum(axis=1)
    chunks = np.array_split(np.arange(m.shape[0]), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda idx: (m[idx] * v).sum(axis=1), chunks))
    return np.concatenate(parts)


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax; float32 output floored at the smallest
    positive normal so entries stay strictly positive."""
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("softmax expects a 1-D sequence")
    if x.size == 0:
        raise ValueError("empty input")
    if not np.isfinite(x).all():
        raise ValueError("non-finite logit")
    e = np.exp(x - x.max())
    denom = math.fsum(e.tolist())
    raw = (e / denom).astype(np.float32)
    return np.maximum(raw, _F32_TINY)


def minmax_normalize(scores) -> np.ndarray:
    """Map to [0, 1] via (x - min) / (max - min); constant input maps to zeros."""
    x = np.asarray(scores, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty input")
    lo = x.min()
    hi = x.max()
    if hi == lo:
        return np.zeros(x.shape, dtype=np.float32)
    return ((x - lo) / (hi - lo)).astype(np.float32)


def project_tokens(tokens: np.ndarray, proj: ProjectionMap) -> np.ndarray:
    """Apply the affine alignment map to every token row."""
    t = np.asarray(tokens, dtype=np.float64)
    if t.ndim != 2 or t.shape[1] != proj.in_dim:
        raise ValueError(
            "shape mismatch: tokens %s vs projection in_dim %d"
            % (t.shape if t.ndim == 2 else t.shape, proj.in_dim)
        )
    out = t @ proj.weight.astype(np.float64).T
    if proj.bias is not None:
        out = out + proj.bias.astype(np.float64)
    return out.astype(np.float32)


def _score(logits: np.ndarray, kind: str) -> ScoreVector:
    raw = softmax(logits)
    return ScoreVector(raw=raw, normalized=minmax_normalize(raw), kind=kind)


def visual_score(bundle: TokenBundle, threads: int = 1) -> ScoreVector:
    """Saliency of each token against the global class token."""
    if bundle.cls is None:
        raise BundleError("missing cls: visual scoring needs the class token")
    d = bundle.dim
    logits = _rowwise_dot(bundle.tokens, bundle.cls, threads) / math.sqrt(d)
    return _score(logits, "visual")


def text_score(bundle: TokenBundle, threads: int = 1) -> ScoreVector:
    """Saliency of each token against the text embedding.

    Tokens are first pushed through the bundle's projection map; when the
    text dimension already matches the token dimension and no map is
    given, the identity is used.
    """
    if bundle.text is None:
        raise BundleError("missing text: no text embedding in bundle")
    dt = bundle.text.shape[0]
    if bundle.proj is not None:
        projected = project_tokens(bundle.tokens, bundle.proj)
        if projected.shape[1] != dt:
            raise BundleError(
                "dimension mismatch: projected dim %d != text dim %d"
                % (projected.shape[1], dt)
            )
    elif dt == bundle.dim:
        projected = bundle.tokens
    else:
        raise BundleError(
            "dimension mismatch: text dim %d != token dim %d and no projection given"
            % (dt, bundle.dim)
        )
    logits = _rowwise_dot(projected, bundle.text, threads) / math.sqrt(dt)
    return _score(logits, "text")
