/**
 * Client for the curvemem streaming engine.
 *
 * Spawns `python3 -m curvemem score --input - --output -` and speaks the
 * engine's documented JSONL contracts over the child's pipes: one stream
 * record per push on stdin, one decision line back on stdout. All scoring
 * runs inside the engine process in double precision, so the decisions a
 * pusher receives are field-for-field identical to a CLI trace of the same
 * frames — this package only adapts the boundary, it computes nothing.
 */

import { spawn, spawnSync } from "node:child_process";
import type { ChildProcessWithoutNullStreams } from "node:child_process";
import { createInterface } from "node:readline";

/** Version of this package. Must match `curvemem --version` (see tests). */
export const VERSION = "0.1.0";

/**
 * Engine parameters, a subset of the CLI's configuration flags.
 * Constraints are enforced by the engine itself (for example k1 < k2);
 * violations reject {@link createEngine} with the engine's message, which
 * names the offending field.
 */
export interface EngineConfig {
  /** Curvature weight in the composite score (CLI `--lambda`). */
  lambda?: number;
  /** EMA decay for the running score statistics. */
  gamma?: number;
  /** Lower threshold offset, in sigmas. */
  k1?: number;
  /** Upper threshold offset, in sigmas; must exceed k1. */
  k2?: number;
  /** Memory queue bound. */
  capacity?: number;
  costHigh?: number;
  costLow?: number;
  highResSide?: number;
  transitionSize?: number;
}

const CONFIG_FLAGS: Record<keyof EngineConfig, string> = {
  lambda: "--lambda",
  gamma: "--gamma",
  k1: "--k1",
  k2: "--k2",
  capacity: "--capacity",
  costHigh: "--cost-high",
  costLow: "--cost-low",
  highResSide: "--high-res-side",
  transitionSize: "--transition-size",
};

export type RetentionState = "Clear" | "Blurred" | "Discard";

/**
 * One engine decision, with the exact field names and values of the trace
 * JSONL contract. Score and threshold fields are null on warm-up frames.
 */
export interface Decision {
  t: number;
  id: number;
  M: number | null;
  C: number | null;
  CS: number | null;
  mu: number;
  sigma: number;
  g1: number | null;
  g2: number | null;
  state: RetentionState | null;
  forced: boolean;
  evicted: number[];
  queue_len: number;
  tokens_total: number;
}

export interface EngineOptions {
  /** Interpreter to launch; defaults to `python3`. */
  pythonPath?: string;
}

/** Run `curvemem --version` and return its output. */
export function cliVersion(options: EngineOptions = {}): string {
  const python = options.pythonPath ?? "python3";
  const result = spawnSync(python, ["-m", "curvemem", "--version"], {
    encoding: "utf8",
  });
  if (result.error) throw result.error;
  if (result.status !== 0) {
    throw new Error(`curvemem --version exited ${result.status}: ${result.stderr}`);
  }
  return result.stdout.trim();
}

function buildArgs(config: EngineConfig): string[] {
  const args = ["-m", "curvemem", "score", "--input", "-", "--output", "-"];
  for (const [key, flag] of Object.entries(CONFIG_FLAGS)) {
    const value = config[key as keyof EngineConfig];
    if (value === undefined) continue;
    if (typeof value !== "number" || !Number.isFinite(value)) {
      throw new TypeError(`config.${key} must be a finite number, got ${value}`);
    }
    args.push(flag, String(value));
  }
  return args;
}

/** Pull the engine's own diagnostic out of captured stderr, if present. */
function engineError(stderr: string, fallback: string): Error {
  const reported = stderr
    .split("\n")
    .reverse()
    .find((line) => line.startsWith("error:"));
  return new Error(reported ?? fallback);
}

/**
 * Start an engine process and wait for its `ready` handshake.
 *
 * Resolves once the engine has validated the configuration and is reading
 * frames; rejects with the engine's own error message if the configuration
 * is refused (the process exits before ever saying `ready`).
 */
export function createEngine(
  config: EngineConfig = {},
  options: EngineOptions = {},
): Promise<BoundEngine> {
  const python = options.pythonPath ?? "python3";
  const child = spawn(python, buildArgs(config), {
    stdio: ["pipe", "pipe", "pipe"],
  });
  const engine = new BoundEngine(child);
  return engine.waitReady();
}

interface Pending {
  resolve: (decision: Decision) => void;
  reject: (error: Error) => void;
}

/**
 * A live engine session. One decision per {@link push}; pushes must be
 * awaited one at a time (see the in-flight guard). Multiple engines may
 * run concurrently — each owns its own process.
 */
export class BoundEngine {
  private readonly child: ChildProcessWithoutNullStreams;
  private stderrText = "";
  private ready = false;
  private readonly exited: Promise<number | null>;
  private inflight: Pending | null = null;
  private failure: Error | null = null;
  private closing = false;
  private nextId = 0;
  private dimension: number | null = null;

  /** @internal Use {@link createEngine}. */
  constructor(child: ChildProcessWithoutNullStreams) {
    this.child = child;
    // a dead pipe raises on write/end; exit handling already covers that
    child.stdin.on("error", () => {});
    child.stderr.setEncoding("utf8");
    child.stderr.on("data", (chunk: string) => {
      this.stderrText += chunk;
    });

    const lines = createInterface({ input: child.stdout });
    lines.on("line", (line) => {
      const pending = this.inflight;
      this.inflight = null;
      if (pending === null) {
        // one answer per push is the protocol; anything else is fatal
        this.fail(new Error(`unexpected engine output: ${line}`));
        return;
      }
      pending.resolve(JSON.parse(line) as Decision);
    });

    this.exited = new Promise((resolve) => {
      child.on("error", (error) => {
        this.fail(error);
        resolve(null);
      });
      child.on("close", (code) => {
        if (!this.closing) {
          this.fail(engineError(this.stderrText, `engine exited with code ${code}`));
        }
        resolve(code);
      });
    });
  }

  /** @internal Resolve with this engine once the handshake line arrives. */
  waitReady(): Promise<BoundEngine> {
    return new Promise((resolve, reject) => {
      const check = () => {
        if (this.ready) return;
        const newline = this.stderrText.indexOf("\n");
        if (newline === -1) return;
        // first stderr line is "ready" iff the config was accepted
        if (this.stderrText.slice(0, newline).trim() === "ready") {
          this.ready = true;
          resolve(this);
        }
      };
      this.child.stderr.on("data", check);
      this.exited.then((code) => {
        if (!this.ready) {
          reject(engineError(this.stderrText, `engine exited with code ${code}`));
        }
      });
      check();
    });
  }

  private fail(error: Error): void {
    if (this.failure === null) this.failure = error;
    const pending = this.inflight;
    this.inflight = null;
    pending?.reject(error);
  }

  /**
   * Score one feature vector. Frame ids and timestamps are assigned
   * sequentially from 0, matching what the stream simulator emits.
   *
   * @param vector - Feature values; dimension must stay constant.
   * @param isQuery - Force this frame into Clear regardless of score.
   * @returns The engine's decision for this frame.
   * @throws If a push is already awaiting its decision, after close(),
   *   or after the engine process has failed.
   */
  push(vector: ArrayLike<number>, isQuery = false): Promise<Decision> {
    if (this.failure) throw this.failure;
    if (this.closing) throw new Error("engine is closed");
    if (this.inflight) {
      throw new Error("push already in flight: await the previous decision first");
    }
    const vec = Array.from(vector, Number);
    if (vec.some((v) => !Number.isFinite(v))) {
      throw new TypeError("vector values must be finite numbers");
    }
    if (this.dimension === null) {
      this.dimension = vec.length;
    } else if (vec.length !== this.dimension) {
      throw new Error(
        `dimension changed from ${this.dimension} to ${vec.length}`,
      );
    }
    const id = this.nextId++;
    const record = isQuery
      ? { id, t: id, vec, q: true }
      : { id, t: id, vec };
    return new Promise<Decision>((resolve, reject) => {
      this.inflight = { resolve, reject };
      this.child.stdin.write(JSON.stringify(record) + "\n");
    });
  }

  /**
   * End the stream and wait for the engine to finish.
   * @returns The engine's run summary (its final stderr line).
   */
  async close(): Promise<string> {
    if (!this.closing) {
      this.closing = true;
      this.child.stdin.end();
    }
    await this.exited;
    const lines = this.stderrText
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line.length > 0 && line !== "ready");
    return lines[lines.length - 1] ?? "";
  }
}
