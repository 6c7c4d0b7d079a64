"""Background token consolidation: seed, cluster, and merge the leftovers.

Outlier tokens among the leftovers (by the same dynamic scale filter,
usually with its own parameters) become fixed cluster centers; every
leftover token joins the center it is most similar to by dot product;
each cluster collapses to the mean of its members. Centers are fixed,
there is no iterative re-centering.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .lof import dynamic_select
from .types import LofParams


def seed_centers(leftover_scores, params2: LofParams) -> np.ndarray:
    """Pick cluster centers among leftover tokens by their score outliers.

    The fallback guarantees at least one center, so background content is
    never dropped entirely.
    """
    scores = np.asarray(leftover_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("empty leftover: nothing to seed")
    return dynamic_select(scores, params2, fallback=True)


def assign_clusters(leftover_tokens: np.ndarray, seed_ids) -> np.ndarray:
    """Assign every leftover token to the most similar center by dot product.

    Ties break toward the lowest seed index. Each center is anchored to
    its own cluster: with unnormalized embeddings a center's dot product
    with another center can exceed its self-similarity, which would leave
    a cluster empty and its merged token undefined.
    """
    seeds = np.unique(np.asarray(seed_ids, dtype=np.int64))
    if seeds.size == 0:
        raise ValueError("need at least one seed")
    tokens = np.asarray(leftover_tokens, dtype=np.float64)
    sims = tokens @ tokens[seeds].T
    assignment = seeds[np.argmax(sims, axis=1)]
    assignment[seeds] = seeds
    return assignment


def merge_clusters(
    leftover_tokens: np.ndarray, assignment, seed_ids
) -> Tuple[np.ndarray, np.ndarray]:
    """Collapse each cluster to the mean of its members.

    Members accumulate in ascending row order with a sequential float64
    fold, so results are bit-deterministic. Returns the merged matrix
    (one row per seed, seeds ascending) and each row's placement: the
    seed's index into ``leftover_tokens``.
    """
    tokens = np.asarray(leftover_tokens, dtype=np.float64)
    assignment = np.asarray(assignment, dtype=np.int64)
    seeds = np.unique(np.asarray(seed_ids, dtype=np.int64))
    if assignment.shape[0] != tokens.shape[0]:
        raise ValueError("assignment length does not match token count")

    merged = np.empty((seeds.size, tokens.shape[1]), dtype=np.float32)
    for j, seed in enumerate(seeds):
        members = np.flatnonzero(assignment == seed)
        if members.size == 0 or seed not in members:
            raise ValueError("cluster %d lost its seed" % seed)
        acc = np.zeros(tokens.shape[1], dtype=np.float64)
        for row in members:
            acc += tokens[row]
        merged[j] = (acc / members.size).astype(np.float32)
    return merged, seeds.copy()
