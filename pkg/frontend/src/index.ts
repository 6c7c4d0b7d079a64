/**
 * In-memory bindings for the visual-token compression engine.
 *
 * `compress` takes contiguous row-major float32 buffers, round-trips
 * them through the engine's TKB1 container and CLI, and returns the
 * selected indices plus merged background tokens. `genSynthetic`
 * exposes the engine's deterministic fixture generator.
 */

import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { parseReport, type CompressionReport } from "./report.js";
import { runEngine } from "./runner.js";
import {
  decodeBundle,
  encodeBundle,
  matrix,
  type Bundle,
  type Matrix,
  type Projection,
} from "./tkb.js";

export { EngineError } from "./runner.js";
export { TkbFormatError, decodeBundle, encodeBundle, matrix } from "./tkb.js";
export type { Bundle, Matrix, Projection } from "./tkb.js";
export type { CompressionReport } from "./report.js";

export class ValidationError extends Error {}

export interface CompressOptions {
  text?: Float32Array;
  proj?: Projection;
  /** neighborhood size for the visual/text filter (default 20) */
  kLof?: number;
  /** neighborhood size for the background seeding (default: kLof) */
  kLof2?: number;
  /** outlier threshold (default 1.0) */
  tau?: number;
}

export interface CompressResult {
  /** sorted original indices kept as-is (visual + text-recovered) */
  keptIndices: number[];
  visualKept: number[];
  textRecovered: number[];
  /** one merged background embedding per cluster */
  mergedTokens: Matrix;
  /** original index each merged row occupies (its cluster seed) */
  mergedPlacement: number[];
  report: CompressionReport;
}

function assertFinite(name: string, data: Float32Array): void {
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new ValidationError(`non-finite value in ${name} at offset ${i}`);
    }
  }
}

function validateInputs(
  tokens: Matrix,
  cls: Float32Array,
  opts: CompressOptions,
): void {
  if (tokens.rows < 1 || tokens.cols < 1) {
    throw new ValidationError("empty bundle: need at least one token");
  }
  if (tokens.data.length !== tokens.rows * tokens.cols) {
    throw new ValidationError("tokens buffer does not match its shape");
  }
  if (cls.length !== tokens.cols) {
    throw new ValidationError(
      `dimension mismatch: cls has length ${cls.length}, tokens have dim ${tokens.cols}`,
    );
  }
  assertFinite("tokens", tokens.data);
  assertFinite("cls", cls);
  if (opts.text) {
    assertFinite("text", opts.text);
    if (opts.text.length !== tokens.cols && !opts.proj) {
      throw new ValidationError(
        `dimension mismatch: text dim ${opts.text.length} != token dim ${tokens.cols} and no projection given`,
      );
    }
  }
  if (opts.proj) {
    const w = opts.proj.weight;
    if (w.cols !== tokens.cols) {
      throw new ValidationError(
        `dimension mismatch: projection expects dim ${w.cols}, tokens have ${tokens.cols}`,
      );
    }
    if (opts.text && w.rows !== opts.text.length) {
      throw new ValidationError(
        `dimension mismatch: projection outputs dim ${w.rows}, text has ${opts.text.length}`,
      );
    }
    assertFinite("proj weight", w.data);
    if (opts.proj.bias) {
      assertFinite("proj bias", opts.proj.bias);
    }
  }
}

interface SelectionMeta {
  visual_kept: number[];
  text_recovered: number[];
  merged_placement: number[];
}

function extractResult(
  outBundle: Bundle,
  report: CompressionReport,
): CompressResult {
  const selection = (outBundle.meta?.selection ?? null) as SelectionMeta | null;
  if (!selection) {
    throw new Error("engine output bundle carries no selection metadata");
  }
  const merged = new Set(selection.merged_placement);
  const dim = outBundle.tokens.cols;
  const mergedRows = new Float32Array(merged.size * dim);
  let cursor = 0;
  const keptIndices: number[] = [];
  outBundle.originalIndices.forEach((originalIndex, row) => {
    if (merged.has(originalIndex)) {
      mergedRows.set(
        outBundle.tokens.data.subarray(row * dim, (row + 1) * dim),
        cursor * dim,
      );
      cursor += 1;
    } else {
      keptIndices.push(originalIndex);
    }
  });
  return {
    keptIndices,
    visualKept: selection.visual_kept,
    textRecovered: selection.text_recovered,
    mergedTokens: matrix(merged.size, dim, mergedRows),
    mergedPlacement: selection.merged_placement,
    report,
  };
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "tokensieve-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

export function compress(
  tokens: Matrix,
  cls: Float32Array,
  opts: CompressOptions = {},
): CompressResult {
  validateInputs(tokens, cls, opts);
  const kLof = opts.kLof ?? 20;
  const kLof2 = opts.kLof2 ?? kLof;
  const tau = opts.tau ?? 1.0;
  return withTempDir((dir) => {
    const inPath = join(dir, "in.tkb");
    const outPath = join(dir, "out.tkb");
    const reportPath = join(dir, "report.txt");
    writeFileSync(
      inPath,
      encodeBundle({
        tokens,
        cls,
        text: opts.text,
        proj: opts.proj,
        originalIndices: Array.from({ length: tokens.rows }, (_, i) => i),
      }),
    );
    runEngine([
      "compress",
      "--in", inPath,
      "--k-lof", String(kLof),
      "--k-lof2", String(kLof2),
      "--tau", String(tau),
      "--out", outPath,
      "--report", reportPath,
      "--no-timing",
    ]);
    const outBundle = decodeBundle(new Uint8Array(readFileSync(outPath)));
    const report = parseReport(readFileSync(reportPath, "utf-8"));
    return extractResult(outBundle, report);
  });
}

export interface SyntheticOptions {
  seed: number;
  n?: number;
  d?: number;
  dt?: number;
  salientVisual?: number;
  salientText?: number;
  noiseSigma?: number;
}

export interface SyntheticBundle {
  bundle: Bundle;
  plantedVisual: number[];
  plantedText: number[];
}

export function genSynthetic(opts: SyntheticOptions): SyntheticBundle {
  return withTempDir((dir) => {
    const outPath = join(dir, "synth.tkb");
    const args = ["synth", "--seed", String(opts.seed), "--out", outPath];
    if (opts.n !== undefined) args.push("--n", String(opts.n));
    if (opts.d !== undefined) args.push("--d", String(opts.d));
    if (opts.dt !== undefined) args.push("--dt", String(opts.dt));
    if (opts.salientVisual !== undefined) {
      args.push("--salient-visual", String(opts.salientVisual));
    }
    if (opts.salientText !== undefined) {
      args.push("--salient-text", String(opts.salientText));
    }
    if (opts.noiseSigma !== undefined) {
      args.push("--noise-sigma", String(opts.noiseSigma));
    }
    runEngine(args);
    const bundle = decodeBundle(new Uint8Array(readFileSync(outPath)));
    return {
      bundle,
      plantedVisual: (bundle.meta?.planted_visual as number[]) ?? [],
      plantedText: (bundle.meta?.planted_text as number[]) ?? [],
    };
  });
}
