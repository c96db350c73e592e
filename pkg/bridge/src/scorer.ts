/**
 * Masked pseudo-log-likelihood and causal log-likelihood over the
 * hypothesis region of an augmented sequence.
 *
 * Masked mode runs the model once per hypothesis subword with that subword
 * replaced by [MASK]; context subwords are never masked or scored.  Causal
 * mode sums next-token log probabilities over the hypothesis region given
 * the left context only, so any right context cannot change the result.
 * One aggregate number per request crosses the wire.
 */

import { DEFAULT_CONFIG, TinyTransformer } from "./model";
import { Tokenizer, MASK } from "./tokenizer";

export interface BridgeConfig {
  model: string;
  seed: number;
  /** advertised request budget in words */
  maxWindow: number;
  modes: string[];
  provenance: string;
}

export const DEFAULT_BRIDGE_CONFIG: BridgeConfig = {
  model: "builtin-tiny",
  seed: DEFAULT_CONFIG.seed,
  maxWindow: 128,
  modes: ["causal", "masked"],
  provenance: "scratch",
};

export interface WireRequestBody {
  tokens: string[];
  left_context: string[];
  right_context: string[];
}

export class Scorer {
  readonly config: BridgeConfig;
  readonly tokenizer: Tokenizer;
  readonly model: TinyTransformer;

  constructor(config: Partial<BridgeConfig> = {}) {
    this.config = { ...DEFAULT_BRIDGE_CONFIG, ...config };
    if (this.config.model !== "builtin-tiny") {
      throw new Error(
        `unknown model ${this.config.model}; this bridge ships "builtin-tiny"`
      );
    }
    this.tokenizer = new Tokenizer();
    this.model = new TinyTransformer({
      ...DEFAULT_CONFIG,
      seed: this.config.seed,
      vocabSize: this.tokenizer.size,
    });
    // A word is at least one subword; the word budget may never exceed what
    // the position table can hold even in the best case.
    const positionalLimit = this.model.config.maxPositions - 2;
    if (this.config.maxWindow > positionalLimit) {
      this.config.maxWindow = positionalLimit;
    }
  }

  checkWindow(body: WireRequestBody): void {
    const words =
      body.tokens.length + body.left_context.length + body.right_context.length;
    if (words > this.config.maxWindow) {
      throw new Error(
        `request of ${words} tokens exceeds max_window=${this.config.maxWindow}`
      );
    }
  }

  /** number of positions masked mode will score (subwords of the hypothesis) */
  scoredPositions(body: WireRequestBody): number {
    const { regions } = this.tokenizer.encode(
      body.tokens,
      body.left_context,
      body.right_context
    );
    return regions.hypothesis[1] - regions.hypothesis[0];
  }

  maskedPll(body: WireRequestBody): number {
    if (body.tokens.length === 0) return 0.0;
    const { ids, regions } = this.tokenizer.encode(
      body.tokens,
      body.left_context,
      body.right_context
    );
    const [start, end] = regions.hypothesis;
    const maskId = this.tokenizer.id(MASK);
    let total = 0.0;
    for (let pos = start; pos < end; pos++) {
      const original = ids[pos];
      const masked = ids.slice();
      masked[pos] = maskId;
      const hidden = this.model.forward(masked, false);
      total += this.model.logProbs(hidden, pos)[original];
    }
    return total;
  }

  causalScore(body: WireRequestBody): number {
    if (body.tokens.length === 0) return 0.0;
    // Right context is dropped before the forward pass; with causal
    // attention it could not influence the scored prefix anyway.
    const { ids, regions } = this.tokenizer.encode(
      body.tokens,
      body.left_context,
      []
    );
    const [start, end] = regions.hypothesis;
    const hidden = this.model.forward(ids, true);
    let total = 0.0;
    for (let pos = start; pos < end; pos++) {
      total += this.model.logProbs(hidden, pos - 1)[ids[pos]];
    }
    return total;
  }

  score(mode: string, body: WireRequestBody): number {
    this.checkWindow(body);
    if (mode === "masked") return this.maskedPll(body);
    if (mode === "causal") return this.causalScore(body);
    throw new Error(`unsupported mode ${mode}`);
  }

  /** identical values to scoring each sequence individually */
  batchMaskedPll(bodies: WireRequestBody[]): number[] {
    return bodies.map((body) => this.maskedPll(body));
  }
}
