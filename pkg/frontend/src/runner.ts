/**
 * Engine process invocation. The bindings talk to the compression
 * engine only through its command-line interface and on-disk formats,
 * so every result is bit-identical to a manual CLI run.
 */

import { spawnSync } from "node:child_process";

export class EngineError extends Error {
  constructor(
    message: string,
    public readonly exitCode: number | null,
    public readonly stderr: string,
  ) {
    super(message);
  }
}

/** Command used to reach the engine CLI; override with TOKENSIEVE_CLI. */
export function engineCommand(): string[] {
  const override = process.env.TOKENSIEVE_CLI;
  if (override) {
    return override.split(" ");
  }
  return ["python3", "-m", "tokensieve.cli"];
}

export function runEngine(args: string[]): string {
  const [cmd, ...prefix] = engineCommand();
  const result = spawnSync(cmd, [...prefix, ...args], {
    encoding: "utf-8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (result.error) {
    throw new EngineError(
      `failed to launch engine CLI (${cmd}): ${result.error.message}`,
      null,
      "",
    );
  }
  if (result.status !== 0) {
    throw new EngineError(
      `engine exited with code ${result.status}: ${result.stderr.trim()}`,
      result.status,
      result.stderr,
    );
  }
  return result.stdout;
}
