/**
 * Line-delimited JSON scorer server over stdin/stdout.
 *
 * First line in each direction is the hello handshake; afterwards every
 * request {id, mode, tokens, left_context, right_context} is answered
 * exactly once with {id, logprob} or {id, error}.  Requests are consumed
 * into micro-batches and each batch is answered in reverse arrival order,
 * so responses are routinely out of order; ids carry the correspondence.
 * Per-request failures become error frames and the process stays alive.
 */

import { createInterface } from "readline";
import { Scorer } from "./scorer";

export const PROTOCOL_VERSION = 1;

interface PendingRequest {
  id: unknown;
  mode: string;
  body: { tokens: string[]; left_context: string[]; right_context: string[] };
}

function asStringArray(value: unknown, field: string): string[] {
  if (!Array.isArray(value) || value.some((x) => typeof x !== "string")) {
    throw new Error(`${field} must be an array of strings`);
  }
  return value as string[];
}

export function startServer(
  scorer: Scorer,
  input: NodeJS.ReadableStream = process.stdin,
  output: NodeJS.WritableStream = process.stdout,
  batchSize = 8
): Promise<void> {
  const write = (obj: unknown) => output.write(JSON.stringify(obj) + "\n");
  const reader = createInterface({ input, crlfDelay: Infinity });

  let greeted = false;
  let pending: PendingRequest[] = [];

  const flush = () => {
    // Reverse order on purpose: exercises client-side id matching.
    const batch = pending;
    pending = [];
    for (let i = batch.length - 1; i >= 0; i--) {
      const req = batch[i];
      try {
        const value = scorer.score(req.mode, req.body);
        write({ id: req.id, logprob: value });
      } catch (err) {
        write({ id: req.id, error: err instanceof Error ? err.message : String(err) });
      }
    }
  };

  return new Promise((resolve) => {
    reader.on("line", (line: string) => {
      const trimmed = line.trim();
      if (!trimmed) return;

      if (!greeted) {
        let hello: Record<string, unknown> | null = null;
        try {
          hello = JSON.parse(trimmed);
        } catch {
          hello = null;
        }
        if (!hello || hello.type !== "hello" || !("version" in hello)) {
          write({ type: "error", error: "bad hello" });
          reader.close();
          return;
        }
        greeted = true;
        write({
          type: "hello",
          version: PROTOCOL_VERSION,
          modes: scorer.config.modes,
          max_window: scorer.config.maxWindow,
          name: `bridge:${scorer.config.model}`,
          provenance: scorer.config.provenance,
        });
        return;
      }

      let obj: Record<string, unknown>;
      try {
        obj = JSON.parse(trimmed);
      } catch {
        return; // nothing to answer without an id
      }
      if (!("id" in obj)) return;
      try {
        pending.push({
          id: obj.id,
          mode: String(obj.mode),
          body: {
            tokens: asStringArray(obj.tokens, "tokens"),
            left_context: asStringArray(obj.left_context, "left_context"),
            right_context: asStringArray(obj.right_context, "right_context"),
          },
        });
      } catch (err) {
        write({ id: obj.id, error: err instanceof Error ? err.message : String(err) });
        return;
      }
      if (pending.length >= batchSize) flush();
      else setImmediate(() => {
        if (pending.length > 0) flush();
      });
    });

    reader.on("close", () => {
      flush();
      resolve();
    });
  });
}
