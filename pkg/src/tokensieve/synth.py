"""Synthetic fixtures with planted ground truth, plus naive reference oracles.

The pseudo-random source is PCG32 (PCG-XSH-RR, 64-bit state / 32-bit
output, Melissa O'Neill's constants) with Box-Muller for normals, fully
specified here so fixtures can be regenerated bit-identically anywhere.
Bundle metadata records the generator identity.

Planted structure: background tokens are isotropic noise drawn from a
small pool of repeated vectors, so the background scores like a
featureless band (exact ties, which the outlier filter treats as dense
inliers); visually salient tokens get a large component along the class
direction; text salient tokens get a large component along the text
direction pulled back through the projection, orthogonalized against
the class direction so only text similarity can find them.
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from .lof import LofTable
from .types import ProjectionMap, TokenBundle

GENERATOR_ID = "pcg32-xsh-rr-64/32+box-muller-v1"

_PCG_MULT = np.uint64(6364136223846793005)

# Planted spikes sit this many noise standard deviations above background,
# calibrated once so they clear the outlier filter with margin.
_VISUAL_SPIKE_SIGMA = 10.0
_TEXT_SPIKE_SIGMA = 10.0


class Pcg32:
    """PCG-XSH-RR 64/32: state = state * 6364136223846793005 + inc (mod 2^64),
    output = rotr32((state ^ (state >> 18)) >> 27, state >> 59)."""

    def __init__(self, seed: int, stream: int = 0):
        inc = ((int(stream) << 1) | 1) & 0xFFFFFFFFFFFFFFFF
        state = (inc + int(seed)) & 0xFFFFFFFFFFFFFFFF
        state = (state * int(_PCG_MULT) + inc) & 0xFFFFFFFFFFFFFFFF
        self._state = np.uint64(state)
        self._inc = np.uint64(inc)

    def _advance(self, count: int) -> np.ndarray:
        """Return ``count`` consecutive states (closed form, vectorized)."""
        # state_i = a^i * s0 + c * sum_{j<i} a^j, all mod 2^64
        powers = np.full(count + 1, _PCG_MULT, dtype=np.uint64)
        powers[0] = np.uint64(1)
        powers = np.multiply.accumulate(powers)  # [1, a, a^2, ...]
        prefix = np.zeros(count + 1, dtype=np.uint64)
        prefix[1:] = np.cumsum(powers[:-1])
        states = powers * self._state + prefix * self._inc
        self._state = states[-1]
        return states[:-1]

    def uint32(self, count: int) -> np.ndarray:
        states = self._advance(count)
        xorshifted = (((states >> np.uint64(18)) ^ states) >> np.uint64(27)).astype(
            np.uint32
        )
        rot = (states >> np.uint64(59)).astype(np.uint32)
        inv = ((np.uint32(32) - rot) & np.uint32(31)).astype(np.uint32)
        return (xorshifted >> rot) | (xorshifted << inv)

    def uniform(self, count: int) -> np.ndarray:
        """Doubles in (0, 1]."""
        return (self.uint32(count).astype(np.float64) + 1.0) / 4294967296.0

    def normal(self, count: int) -> np.ndarray:
        """Standard normals via Box-Muller pairs."""
        pairs = (count + 1) // 2
        u1 = self.uniform(pairs)
        u2 = (self.uint32(pairs).astype(np.float64)) / 4294967296.0
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * math.pi * u2)
        z[1::2] = r * np.sin(2.0 * math.pi * u2)
        return z[:count]

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")


def gen_synthetic(
    seed: int,
    n: int = 576,
    d: int = 64,
    dt: int = 32,
    n_visual_salient: int = 20,
    n_text_salient: int = 20,
    noise_sigma: float = 1.0,
    background_pool: int = 12,
) -> Tuple[TokenBundle, np.ndarray, np.ndarray]:
    """Deterministic bundle with disjoint planted salient sets.

    Returns (bundle, visual_truth, text_truth) where the truth arrays hold
    the planted original indices, sorted. The text embedding (and the
    projection) are only present when ``n_text_salient`` > 0.

    Background tokens are sampled from ``background_pool`` distinct noise
    vectors; repeats score identically, giving the flat-band-with-spikes
    score profile the filter is built for. With the default pool, each
    value repeats often enough to stay degenerate (inlier) for k up to
    ~40 at the default sizes.
    """
    if n < 1 or d < 1 or dt < 1:
        raise ValueError("invalid counts: n, d, dt must be positive")
    if n_visual_salient < 0 or n_text_salient < 0:
        raise ValueError("invalid counts: salient counts must be non-negative")
    if n_visual_salient + n_text_salient > n:
        raise ValueError(
            "invalid counts: %d + %d planted tokens exceed n=%d"
            % (n_visual_salient, n_text_salient, n)
        )
    if noise_sigma <= 0:
        raise ValueError("noise_sigma must be positive")
    if background_pool < 1:
        raise ValueError("invalid counts: background_pool must be positive")

    rng = Pcg32(seed)
    cls_dir = rng.normal(d)
    cls_dir /= np.linalg.norm(cls_dir)
    cls = cls_dir * math.sqrt(d)  # token . cls / sqrt(d) == token . cls_dir

    pool = (rng.normal(background_pool * d).reshape(background_pool, d) * noise_sigma)
    pool = pool.astype(np.float32).astype(np.float64)  # freeze at storage precision
    choice = rng.uint32(n) % np.uint32(background_pool)
    tokens = pool[choice]

    perm = rng.permutation(n)
    v_star = np.sort(perm[:n_visual_salient])
    t_star = np.sort(perm[n_visual_salient : n_visual_salient + n_text_salient])

    spikes = rng.normal(n_visual_salient * d).reshape(n_visual_salient, d) * noise_sigma
    tokens[v_star] = spikes + _VISUAL_SPIKE_SIGMA * noise_sigma * cls_dir

    text = None
    proj = None
    if n_text_salient > 0:
        weight = rng.normal(dt * d).reshape(dt, d) / math.sqrt(d)
        text_vec = rng.normal(dt)
        pulled = weight.T @ text_vec  # token-space direction of text similarity
        pulled_perp = pulled - (pulled @ cls_dir) * cls_dir
        norm_sq = pulled_perp @ pulled_perp
        if norm_sq <= 0:
            raise ValueError("degenerate projection: text direction parallel to cls")
        scale = _TEXT_SPIKE_SIGMA * noise_sigma * np.linalg.norm(pulled) / norm_sq
        base = rng.normal(n_text_salient * d).reshape(n_text_salient, d) * noise_sigma
        base -= np.outer(base @ cls_dir, cls_dir)  # near-zero class alignment
        tokens[t_star] = base + scale * pulled_perp
        text = text_vec.astype(np.float32)
        proj = ProjectionMap(weight.astype(np.float32))

    side = math.isqrt(n)
    grid = (side, side) if side * side == n else None

    bundle = TokenBundle(
        tokens=tokens.astype(np.float32),
        cls=cls.astype(np.float32),
        text=text,
        proj=proj,
        grid=grid,
        meta={
            "generator": GENERATOR_ID,
            "seed": int(seed),
            "noise_sigma": float(noise_sigma),
            "background_pool": int(background_pool),
            "planted_visual": [int(i) for i in v_star],
            "planted_text": [int(i) for i in t_star],
        },
    )
    return bundle, v_star.astype(np.int64), t_star.astype(np.int64)


def oracle_lof(scores, k: int) -> LofTable:
    """Quadratic reference: full distance matrix, per-point masks.

    Same tie and degeneracy conventions as the production table; used to
    cross-check it.
    """
    s = np.asarray(scores, dtype=np.float64)
    n = len(s)
    if n <= k:
        raise ValueError("too few points: need n > k, got n=%d, k=%d" % (n, k))
    dist = np.abs(s[:, None] - s[None, :])
    off_diag = ~np.eye(n, dtype=bool)
    masked = np.where(off_diag, dist, np.inf)
    kd = np.sort(masked, axis=1)[:, k - 1]
    neighbor = (dist <= kd[:, None]) & off_diag
    sizes = neighbor.sum(axis=1)

    reach = np.maximum(kd[None, :], dist)  # reach(p, o) = max(kd[o], d(p, o))
    reach_sums = np.where(neighbor, reach, 0.0).sum(axis=1)
    with np.errstate(divide="ignore"):
        lrd = np.where(reach_sums > 0.0, sizes / reach_sums, np.inf)
    neighbor_lrd = np.where(neighbor, lrd[None, :], 0.0).sum(axis=1)
    with np.errstate(invalid="ignore"):
        lof = neighbor_lrd / sizes / lrd
    lof[kd == 0.0] = 1.0

    neighborhoods = tuple(np.flatnonzero(neighbor[i]) for i in range(n))
    return LofTable(
        k_distance=kd, neighborhoods=neighborhoods, lrd=lrd, lof=lof, k=k
    )


def oracle_assign(tokens, seeds) -> np.ndarray:
    """Brute-force clustering reference: per-token loop over every seed.

    Mirrors the production rule, including anchoring each seed to itself.
    """
    t = np.asarray(tokens, dtype=np.float64)
    seed_list = sorted(int(s) for s in set(int(x) for x in np.asarray(seeds)))
    if not seed_list:
        raise ValueError("need at least one seed")
    assignment = np.empty(t.shape[0], dtype=np.int64)
    for i in range(t.shape[0]):
        if i in seed_list:
            assignment[i] = i
            continue
        best_seed = seed_list[0]
        best_sim = None
        for s in seed_list:
            sim = float(np.dot(t[i], t[s]))
            if best_sim is None or sim > best_sim:
                best_sim = sim
                best_seed = s
        assignment[i] = best_seed
    return assignment
