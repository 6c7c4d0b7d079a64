"""Dynamic scale filter: 1-D local-outlier-factor over normalized scores.

The filter runs on scalar scores with absolute difference as the metric.
For each point: the k-distance is the distance to its k-th nearest
neighbor; the neighborhood holds every other point within that radius
(ties included, so it can exceed k); the local reachability density is
the inverse mean reachability distance over the neighborhood; the
outlier factor is the neighbors' mean density over the point's own.

Points with at least k exact duplicates have k-distance 0; their density
is infinite and their factor is pinned to exactly 1 (inlier), the
classical convention that avoids 0/0.

The implementation sorts once and sweeps windows over the sorted values,
so each point costs O(k + window). A naive quadratic reference lives in
`tokensieve.synth` for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .types import LofParams


@dataclass(frozen=True)
class LofTable:
    """Per-point k-distance, neighborhood, density, and outlier factor."""

    k_distance: np.ndarray
    neighborhoods: Tuple[np.ndarray, ...]
    lrd: np.ndarray
    lof: np.ndarray
    k: int


def _sorted_window(sv: np.ndarray, p: int, radius: float, lo: int, hi: int):
    """Tighten a searchsorted bracket to exactly {j : |sv[j]-sv[p]| <= radius}.

    The bracket can be off by a float rounding of sv[p] +- radius; the
    while-loops re-test with the same subtraction the distances use.
    """
    n = len(sv)
    while lo > 0 and sv[p] - sv[lo - 1] <= radius:
        lo -= 1
    while lo < p and sv[p] - sv[lo] > radius:
        lo += 1
    while hi < n and sv[hi] - sv[p] <= radius:
        hi += 1
    while hi > p + 1 and sv[hi - 1] - sv[p] > radius:
        hi -= 1
    return lo, hi


def build_lof_table(scores, params: LofParams) -> LofTable:
    """Compute the LOF table for a 1-D score distribution.

    Requires n > k; raises ValueError otherwise.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("scores must be 1-D")
    n = len(s)
    k = params.k
    if n <= k:
        raise ValueError("too few points: need n > k, got n=%d, k=%d" % (n, k))

    order = np.argsort(s, kind="stable")
    sv = s[order]

    # k-distance: the k-th nearest neighbor lies within k sorted positions.
    cand = np.full((n, 2 * k), np.inf)
    for i in range(1, k + 1):
        cand[i:, i - 1] = sv[i:] - sv[:-i]
        cand[:-i, k + i - 1] = sv[i:] - sv[:-i]
    kd = np.partition(cand, k - 1, axis=1)[:, k - 1]

    lo0 = np.searchsorted(sv, sv - kd, side="left")
    hi0 = np.searchsorted(sv, sv + kd, side="right")

    bounds = np.empty((n, 2), dtype=np.int64)
    lrd = np.empty(n)
    for p in range(n):
        lo, hi = _sorted_window(sv, p, kd[p], int(lo0[p]), int(hi0[p]))
        bounds[p, 0] = lo
        bounds[p, 1] = hi
        dist = np.abs(sv[lo:hi] - sv[p])
        reach = np.maximum(kd[lo:hi], dist)
        reach_sum = reach.sum() - max(kd[p], 0.0)  # drop the point itself
        size = hi - lo - 1
        lrd[p] = size / reach_sum if reach_sum > 0.0 else np.inf

    lof = np.empty(n)
    neigh_sorted = []
    for p in range(n):
        lo, hi = bounds[p]
        size = hi - lo - 1
        if kd[p] == 0.0:
            lof[p] = 1.0
        else:
            lof[p] = (lrd[lo:hi].sum() - lrd[p]) / size / lrd[p]
        ids = np.concatenate((order[lo:p], order[p + 1 : hi]))
        neigh_sorted.append(np.sort(ids))

    inv = np.empty(n, dtype=np.int64)
    inv[order] = np.arange(n)
    neighborhoods = tuple(neigh_sorted[inv[i]] for i in range(n))
    return LofTable(
        k_distance=kd[inv],
        neighborhoods=neighborhoods,
        lrd=lrd[inv],
        lof=lof[inv],
        k=k,
    )


def count_salient(scores, table: LofTable, params: LofParams) -> int:
    """Number of outliers on the informative side: factor above tau and
    score above the median."""
    s = np.asarray(scores, dtype=np.float64)
    median = np.median(s)
    return int(np.count_nonzero((table.lof > params.tau) & (s > median)))


def dynamic_select(scores, params: LofParams, fallback: bool) -> np.ndarray:
    """Select the m top-scoring indices, m = number of high-side outliers.

    Ties break toward the lower index. With m == 0 and ``fallback`` on,
    the top ``fallback_keep`` indices are returned instead of none. Tiny
    inputs (n <= k) are returned whole since the factor is undefined there
    and compressing them buys nothing.
    """
    s = np.asarray(scores, dtype=np.float64)
    n = len(s)
    if n <= params.k:
        return np.arange(n, dtype=np.int64)
    table = build_lof_table(s, params)
    m = count_salient(s, table, params)
    if m == 0:
        if not fallback:
            return np.empty(0, dtype=np.int64)
        m = min(params.fallback_keep, n)
    ranked = np.argsort(-s, kind="stable")
    return np.sort(ranked[:m]).astype(np.int64)
