/**
 * TKB1 container codec.
 *
 * Layout: 4-byte magic "TKB1", unsigned 64-bit little-endian header
 * length, UTF-8 JSON header, raw payload. Every tensor is row-major
 * 32-bit little-endian float; the header records its shape and byte
 * offset into the payload. "tokens" and "cls" are required, "text",
 * "proj_w", "proj_b" optional. Optional "original_indices", "grid" and
 * free-form "meta" ride along in the header JSON.
 */

const MAGIC = new Uint8Array([0x54, 0x4b, 0x42, 0x31]); // "TKB1"

const HOST_IS_LITTLE_ENDIAN =
  new Uint8Array(new Uint32Array([1]).buffer)[0] === 1;

if (!HOST_IS_LITTLE_ENDIAN) {
  throw new Error("TKB1 codec requires a little-endian host");
}

export interface Matrix {
  rows: number;
  cols: number;
  /** row-major, length rows * cols */
  data: Float32Array;
}

export interface Projection {
  weight: Matrix;
  bias?: Float32Array;
}

export interface Bundle {
  tokens: Matrix;
  cls: Float32Array;
  text?: Float32Array;
  proj?: Projection;
  originalIndices: number[];
  grid?: [number, number];
  meta?: Record<string, unknown>;
}

interface TensorEntry {
  shape: number[];
  offset: number;
}

export class TkbFormatError extends Error {}

function f32Bytes(view: Float32Array): Uint8Array {
  return new Uint8Array(view.buffer, view.byteOffset, view.byteLength);
}

export function matrix(rows: number, cols: number, data: Float32Array): Matrix {
  if (data.length !== rows * cols) {
    throw new TkbFormatError(
      `matrix data length ${data.length} != ${rows}x${cols}`,
    );
  }
  return { rows, cols, data };
}

export function encodeBundle(bundle: Bundle): Uint8Array {
  const tensors: Array<[string, number[], Float32Array]> = [
    ["tokens", [bundle.tokens.rows, bundle.tokens.cols], bundle.tokens.data],
    ["cls", [bundle.cls.length], bundle.cls],
  ];
  if (bundle.text) {
    tensors.push(["text", [bundle.text.length], bundle.text]);
  }
  if (bundle.proj) {
    const w = bundle.proj.weight;
    tensors.push(["proj_w", [w.rows, w.cols], w.data]);
    if (bundle.proj.bias) {
      tensors.push(["proj_b", [bundle.proj.bias.length], bundle.proj.bias]);
    }
  }

  const entries: Record<string, TensorEntry> = {};
  let payloadLen = 0;
  for (const [name, shape, data] of tensors) {
    entries[name] = { shape, offset: payloadLen };
    payloadLen += data.byteLength;
  }

  const header: Record<string, unknown> = { tensors: entries };
  header.original_indices = bundle.originalIndices;
  if (bundle.grid) {
    header.grid = [bundle.grid[0], bundle.grid[1]];
  }
  if (bundle.meta && Object.keys(bundle.meta).length > 0) {
    header.meta = bundle.meta;
  }
  const headerBytes = new TextEncoder().encode(JSON.stringify(header));

  const out = new Uint8Array(12 + headerBytes.length + payloadLen);
  out.set(MAGIC, 0);
  new DataView(out.buffer).setBigUint64(4, BigInt(headerBytes.length), true);
  out.set(headerBytes, 12);
  let cursor = 12 + headerBytes.length;
  for (const [, , data] of tensors) {
    out.set(f32Bytes(data), cursor);
    cursor += data.byteLength;
  }
  return out;
}

function readTensor(
  payload: Uint8Array,
  entry: TensorEntry,
  name: string,
): Float32Array {
  if (!Array.isArray(entry.shape) || typeof entry.offset !== "number") {
    throw new TkbFormatError(`malformed header: bad entry for tensor ${name}`);
  }
  const count = entry.shape.reduce((a, b) => a * b, 1);
  const end = entry.offset + 4 * count;
  if (entry.offset < 0 || end > payload.byteLength) {
    throw new TkbFormatError(
      `truncated payload: tensor ${name} needs bytes [${entry.offset}, ${end}) of ${payload.byteLength}`,
    );
  }
  // copy out so the result owns aligned memory
  const bytes = payload.slice(entry.offset, end);
  return new Float32Array(bytes.buffer, 0, count);
}

export function decodeBundle(blob: Uint8Array): Bundle {
  if (blob.length < 12 || !MAGIC.every((b, i) => blob[i] === b)) {
    throw new TkbFormatError("bad magic: not a TKB1 file");
  }
  const headerLen = Number(
    new DataView(blob.buffer, blob.byteOffset).getBigUint64(4, true),
  );
  if (12 + headerLen > blob.length) {
    throw new TkbFormatError("truncated payload: header exceeds file size");
  }
  let header: Record<string, unknown>;
  try {
    header = JSON.parse(
      new TextDecoder("utf-8", { fatal: true }).decode(
        blob.subarray(12, 12 + headerLen),
      ),
    ) as Record<string, unknown>;
  } catch (err) {
    throw new TkbFormatError(`malformed header: ${String(err)}`);
  }
  const entries = (header.tensors ?? {}) as Record<string, TensorEntry>;
  for (const required of ["tokens", "cls"]) {
    if (!(required in entries)) {
      throw new TkbFormatError(
        `malformed header: required tensor ${required} absent`,
      );
    }
  }
  const payload = blob.subarray(12 + headerLen);

  const tokensEntry = entries.tokens;
  if (tokensEntry.shape.length !== 2) {
    throw new TkbFormatError("malformed header: tokens must be 2-D");
  }
  const tokens = matrix(
    tokensEntry.shape[0],
    tokensEntry.shape[1],
    readTensor(payload, tokensEntry, "tokens"),
  );
  const cls = readTensor(payload, entries.cls, "cls");
  const text = entries.text
    ? readTensor(payload, entries.text, "text")
    : undefined;
  let proj: Projection | undefined;
  if (entries.proj_w) {
    const w = entries.proj_w;
    proj = {
      weight: matrix(w.shape[0], w.shape[1], readTensor(payload, w, "proj_w")),
      bias: entries.proj_b
        ? readTensor(payload, entries.proj_b, "proj_b")
        : undefined,
    };
  }

  const originalIndices = Array.isArray(header.original_indices)
    ? (header.original_indices as number[]).map(Number)
    : Array.from({ length: tokens.rows }, (_, i) => i);
  const grid = Array.isArray(header.grid)
    ? ([Number(header.grid[0]), Number(header.grid[1])] as [number, number])
    : undefined;

  return {
    tokens,
    cls,
    text,
    proj,
    originalIndices,
    grid,
    meta: header.meta as Record<string, unknown> | undefined,
  };
}
