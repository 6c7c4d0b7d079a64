"""Command-line surface: synth, compress, score, cost, oracle-check.

Exit codes: 0 success, 2 usage error (argparse), 3 malformed or invalid
input, 4 oracle-check failure. All randomness flows through --seed; with
--no-timing every output is byte-deterministic.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io as tio
from .cost import ModelConfig, kv_cache_bytes, prefill_flops
from .lof import build_lof_table
from .pipeline import compress
from .recovery import assign_clusters
from .scoring import text_score, visual_score
from .synth import Pcg32, gen_synthetic, oracle_assign, oracle_lof
from .types import LofParams, TokenBundle, TokenSieveError
from .viz import render_heat, render_mask


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokensieve",
        description="Compress visual token bundles with text-guided recovery.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic fixture bundle")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=576)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--dt", type=int, default=32)
    p.add_argument("--salient-visual", type=int, default=20)
    p.add_argument("--salient-text", type=int, default=20)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compress", help="run the compression pipeline")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--k-lof", type=int, default=20)
    p.add_argument("--k-lof2", type=int, default=None)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--viz", default=None, metavar="PREFIX")
    p.add_argument("--model-config", default=None)
    p.add_argument("--no-timing", action="store_true")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("score", help="write per-token scores as CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mode", choices=("visual", "text"), required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("cost", help="estimate prefill FLOPs and KV bytes")
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--dmodel", type=int, required=True)
    p.add_argument("--dff", type=int, required=True)
    p.add_argument("--n-visual", type=int, required=True)
    p.add_argument("--n-text", type=int, default=60)
    p.add_argument("--bytes-per-param", type=float, default=2.0)

    p = sub.add_parser("oracle-check", help="run oracle-equivalence suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=50)
    return parser


def _load_model_config(path):
    """Parse a model-config JSON file; returns (ModelConfig, text_len)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return (
        ModelConfig(
            layers=int(raw["layers"]),
            hidden=int(raw["hidden"]),
            ffn=int(raw["ffn"]),
            vocab=int(raw.get("vocab", 32000)),
            bytes_per_param=float(raw.get("bytes_per_param", 2.0)),
            param_count=raw.get("param_count"),
        ),
        int(raw.get("text_len", 60)),
    )


def _cmd_synth(args) -> int:
    bundle, _, _ = gen_synthetic(
        seed=args.seed,
        n=args.n,
        d=args.d,
        dt=args.dt,
        n_visual_salient=args.salient_visual,
        n_text_salient=args.salient_text,
        noise_sigma=args.noise_sigma,
    )
    tio.write_bundle(bundle, args.out)
    print("wrote %s: n=%d d=%d" % (args.out, bundle.n_tokens, bundle.dim))
    return 0


def _cmd_compress(args) -> int:
    bundle = tio.read_bundle(args.infile)
    k_lof = LofParams(k=args.k_lof, tau=args.tau)
    k2 = args.k_lof2 if args.k_lof2 is not None else args.k_lof
    k_lof2 = LofParams(k=k2, tau=args.tau)
    model_config = None
    text_len = 60
    if args.model_config is not None:
        model_config, text_len = _load_model_config(args.model_config)
    selection, compressed, report = compress(
        bundle,
        k_lof,
        k_lof2,
        model_config=model_config,
        text_len=text_len,
        threads=args.threads,
        measure_time=not args.no_timing,
    )
    tio.write_bundle(compressed, args.out)
    tio.write_report(report, args.report)
    if args.viz is not None:
        if bundle.grid is None:
            raise TokenSieveError("missing grid: cannot render without a patch layout")
        order = np.argsort(bundle.original_indices, kind="stable")
        work = TokenBundle(
            tokens=bundle.tokens[order],
            cls=bundle.cls,
            text=bundle.text,
            proj=bundle.proj,
            original_indices=bundle.original_indices[order],
            grid=bundle.grid,
        )
        render_heat(
            visual_score(work, threads=args.threads).normalized,
            bundle.grid,
            args.viz + "_visual.pgm",
        )
        if bundle.text is not None:
            render_heat(
                text_score(work, threads=args.threads).normalized,
                bundle.grid,
                args.viz + "_text.pgm",
            )
        render_mask(selection, bundle.grid, args.viz + "_mask.pgm")
    print(
        "compressed %d -> %d tokens (retention %.4f)"
        % (report.n_input, selection.n_output, report.retention_ratio)
    )
    return 0


def _cmd_score(args) -> int:
    bundle = tio.read_bundle(args.infile)
    if args.mode == "visual":
        score = visual_score(bundle, threads=args.threads)
    else:
        score = text_score(bundle, threads=args.threads)
    tio.write_scores_csv(args.out_csv, bundle.original_indices, score)
    return 0


def _cmd_cost(args) -> int:
    cfg = ModelConfig(
        layers=args.layers,
        hidden=args.dmodel,
        ffn=args.dff,
        bytes_per_param=args.bytes_per_param,
    )
    n = args.n_visual + args.n_text
    print("n_tokens = %d" % n)
    print("prefill_flops = %.5e" % prefill_flops(cfg, n))
    print("kv_cache_bytes = %.5e" % kv_cache_bytes(cfg, n))
    return 0


def _cmd_oracle_check(args) -> int:
    rng = Pcg32(args.seed)
    lof_pass = 0
    for _ in range(args.cases):
        k = int(rng.uint32(1)[0] % 4)
        k = (5, 20, 30, 90)[k]
        n = k + 1 + int(rng.uint32(1)[0] % (600 - k))
        scores = rng.uniform(n)
        ours = build_lof_table(scores, LofParams(k=k))
        ref = oracle_lof(scores, k)
        ok = (
            np.allclose(ours.k_distance, ref.k_distance, rtol=0.0, atol=1e-9)
            and np.array_equal(np.isinf(ours.lrd), np.isinf(ref.lrd))
            and np.allclose(
                ours.lrd[np.isfinite(ref.lrd)],
                ref.lrd[np.isfinite(ref.lrd)],
                rtol=0.0,
                atol=1e-9,
            )
            and np.array_equal(np.isinf(ours.lof), np.isinf(ref.lof))
            and np.allclose(
                ours.lof[np.isfinite(ref.lof)],
                ref.lof[np.isfinite(ref.lof)],
                rtol=0.0,
                atol=1e-9,
            )
        )
        lof_pass += int(ok)
    print("lof oracle: %d/%d passed" % (lof_pass, args.cases))

    assign_pass = 0
    for _ in range(args.cases):
        m = 2 + int(rng.uint32(1)[0] % 60)
        d = 2 + int(rng.uint32(1)[0] % 16)
        n_seeds = 1 + int(rng.uint32(1)[0] % min(6, m))
        tokens = rng.normal(m * d).reshape(m, d).astype(np.float32)
        seeds = np.sort(rng.permutation(m)[:n_seeds])
        ok = np.array_equal(
            assign_clusters(tokens, seeds), oracle_assign(tokens, seeds)
        )
        assign_pass += int(ok)
    print("assign oracle: %d/%d passed" % (assign_pass, args.cases))

    return 0 if (lof_pass == args.cases and assign_pass == args.cases) else 4


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "synth": _cmd_synth,
        "compress": _cmd_compress,
        "score": _cmd_score,
        "cost": _cmd_cost,
        "oracle-check": _cmd_oracle_check,
    }
    try:
        return handlers[args.command](args)
    except TokenSieveError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
