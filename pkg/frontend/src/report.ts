/** Parser for the engine's fixed-order `key = value` report files. */

export interface CompressionReport {
  nInput: number;
  nVisualKept: number;
  nTextRecovered: number;
  nMerged: number;
  retentionRatio: number;
  flopsBefore: number;
  flopsAfter: number;
  wallTime: number;
  /** parameter echo lines (param.*), raw string values */
  params: Record<string, string>;
}

export function parseReport(text: string): CompressionReport {
  const fields: Record<string, string> = {};
  const params: Record<string, string> = {};
  for (const line of text.split("\n")) {
    const idx = line.indexOf(" = ");
    if (idx < 0) {
      continue;
    }
    const key = line.slice(0, idx);
    const value = line.slice(idx + 3);
    if (key.startsWith("param.")) {
      params[key.slice("param.".length)] = value;
    } else {
      fields[key] = value;
    }
  }
  const need = (key: string): string => {
    if (!(key in fields)) {
      throw new Error(`report is missing field ${key}`);
    }
    return fields[key];
  };
  return {
    nInput: Number(need("n_input")),
    nVisualKept: Number(need("n_visual_kept")),
    nTextRecovered: Number(need("n_text_recovered")),
    nMerged: Number(need("n_merged")),
    retentionRatio: Number(need("retention_ratio")),
    flopsBefore: Number(need("flops_before")),
    flopsAfter: Number(need("flops_after")),
    wallTime: Number(need("wall_time")),
    params,
  };
}
