"""Four-stage compression: visual filter, text recovery, background merge,
order-preserving assembly.

LLMs are trained on inputs in original token order, so the compressed
sequence keeps every surviving token (and every merged stand-in, placed
at its seed's position) sorted by original index.

The bundle is canonicalized to ascending original-index order up front;
together with row-local scoring and ordered accumulation this makes the
whole pipeline bit-deterministic under input row permutations.
"""

from __future__ import annotations

import time
from typing import Optional, Tuple

import numpy as np

from .cost import ModelConfig, prefill_flops
from .lof import dynamic_select
from .recovery import assign_clusters, merge_clusters, seed_centers
from .scoring import text_score, visual_score
from .types import (
    BundleError,
    CompressionReport,
    LofParams,
    OutputSlot,
    PipelineError,
    SelectionResult,
    TokenBundle,
    validate_bundle,
)


def order_output(kept, merged_placement) -> Tuple[OutputSlot, ...]:
    """Merge kept originals and placed clusters into one ascending sequence."""
    kept = np.asarray(kept, dtype=np.int64)
    placement = np.asarray(merged_placement, dtype=np.int64)
    combined = np.concatenate((kept, placement))
    if len(np.unique(combined)) != len(combined):
        raise PipelineError("duplicate placement: kept and merged indices collide")
    slots = [OutputSlot("kept", int(i)) for i in np.sort(kept)]
    for cluster_id, idx in enumerate(placement):
        slots.append(OutputSlot("merged", int(idx), cluster=cluster_id))
    slots.sort(key=lambda slot: slot.original_index)
    return tuple(slots)


def _take_rows(bundle: TokenBundle, positions: np.ndarray) -> TokenBundle:
    return TokenBundle(
        tokens=bundle.tokens[positions],
        cls=bundle.cls,
        text=bundle.text,
        proj=bundle.proj,
        original_indices=bundle.original_indices[positions],
    )


def compress(
    bundle: TokenBundle,
    k_lof: LofParams,
    k_lof2: Optional[LofParams] = None,
    model_config: Optional[ModelConfig] = None,
    text_len: int = 60,
    threads: int = 1,
    measure_time: bool = True,
) -> Tuple[SelectionResult, TokenBundle, CompressionReport]:
    """Compress a bundle; returns (selection, compressed bundle, report).

    ``k_lof`` drives both the visual filter and the text recovery;
    ``k_lof2`` (defaulting to ``k_lof``) drives the background seeding.
    FLOPs are estimated with ``text_len`` prompt text tokens appended
    when a model config is supplied.
    """
    start = time.perf_counter()
    validate_bundle(bundle)
    if bundle.cls is None:
        raise BundleError("missing cls: compression needs the class token")
    if k_lof2 is None:
        k_lof2 = k_lof

    order = np.argsort(bundle.original_indices, kind="stable")
    work = _take_rows(bundle, order)
    n = work.n_tokens
    all_pos = np.arange(n, dtype=np.int64)

    # 1. visual filter (fallback on: the model must see at least one token)
    vs = visual_score(work, threads=threads)
    s1_pos = dynamic_select(vs.normalized, k_lof, fallback=True)

    # 2. text recovery over the remainder, scored and normalized within it
    r1_pos = np.setdiff1d(all_pos, s1_pos)
    if work.text is not None and r1_pos.size > 0:
        sub1 = _take_rows(work, r1_pos)
        ts = text_score(sub1, threads=threads)
        s2_pos = r1_pos[dynamic_select(ts.normalized, k_lof, fallback=False)]
    else:
        s2_pos = np.empty(0, dtype=np.int64)

    # 3. background merge of whatever remains
    r2_pos = np.setdiff1d(r1_pos, s2_pos)
    if r2_pos.size > 0:
        sub2 = _take_rows(work, r2_pos)
        vs2 = visual_score(sub2, threads=threads)
        seed_rel = seed_centers(vs2.normalized, k_lof2)
        assignment = assign_clusters(sub2.tokens, seed_rel)
        merged, placement_rel = merge_clusters(sub2.tokens, assignment, seed_rel)
        placement = sub2.original_indices[placement_rel]
    else:
        merged = np.empty((0, work.dim), dtype=np.float32)
        placement = np.empty(0, dtype=np.int64)

    # 4. assembly in original order
    s1 = work.original_indices[s1_pos]
    s2 = work.original_indices[s2_pos]
    kept = np.sort(np.concatenate((s1, s2)))
    slots = order_output(kept, placement)

    selection = SelectionResult(
        visual_kept=np.sort(s1),
        text_recovered=np.sort(s2),
        cluster_seeds=placement,
        merged_tokens=merged,
        merged_placement=placement,
        output_order=slots,
    )

    rows = np.empty((len(slots), work.dim), dtype=np.float32)
    out_indices = np.empty(len(slots), dtype=np.int64)
    pos_of = {int(idx): p for p, idx in enumerate(work.original_indices)}
    for i, slot in enumerate(slots):
        if slot.kind == "kept":
            rows[i] = work.tokens[pos_of[slot.original_index]]
        else:
            rows[i] = merged[slot.cluster]
        out_indices[i] = slot.original_index
    compressed = TokenBundle(
        tokens=rows,
        cls=work.cls,
        text=work.text,
        proj=work.proj,
        original_indices=out_indices,
        meta={
            **bundle.meta,
            "selection": {
                "n_input": int(n),
                "visual_kept": [int(i) for i in selection.visual_kept],
                "text_recovered": [int(i) for i in selection.text_recovered],
                "merged_placement": [int(i) for i in placement],
            },
        },
    )

    n_out = len(slots)
    flops_before = flops_after = 0.0
    if model_config is not None:
        flops_before = prefill_flops(model_config, n + text_len)
        flops_after = prefill_flops(model_config, n_out + text_len)
    # threads is an execution knob with no effect on results; not echoed
    params_used = {
        "k_lof": {"k": k_lof.k, "tau": k_lof.tau, "fallback_keep": k_lof.fallback_keep},
        "k_lof2": {
            "k": k_lof2.k,
            "tau": k_lof2.tau,
            "fallback_keep": k_lof2.fallback_keep,
        },
        "text_len": text_len,
    }
    if model_config is not None:
        params_used["model"] = {
            "layers": model_config.layers,
            "hidden": model_config.hidden,
            "ffn": model_config.ffn,
            "vocab": model_config.vocab,
            "bytes_per_param": model_config.bytes_per_param,
        }
    report = CompressionReport(
        n_input=n,
        n_visual_kept=int(s1.size),
        n_text_recovered=int(s2.size),
        n_merged=int(merged.shape[0]),
        retention_ratio=n_out / n,
        flops_before=flops_before,
        flops_after=flops_after,
        wall_time=(time.perf_counter() - start) if measure_time else 0.0,
        params_used=params_used,
    )
    return selection, compressed, report
