/**
 * A small self-contained transformer language model with deterministic
 * seeded weights, supporting bidirectional (masked) and causal attention.
 *
 * No weight files are loaded: the sandbox has no model-hub access, so the
 * bridge ships this scratch-provenance model instead of a downloaded
 * checkpoint.  The scoring semantics (masked conditionals over subwords,
 * causal next-token factorization) match what a hub-loaded model would use.
 */

export interface ModelConfig {
  vocabSize: number;
  dim: number;
  layers: number;
  maxPositions: number;
  seed: number;
}

export const DEFAULT_CONFIG: Omit<ModelConfig, "vocabSize"> = {
  dim: 24,
  layers: 2,
  maxPositions: 2048,
  seed: 1234,
};

/** mulberry32: tiny deterministic PRNG, same stream on every platform. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randMatrix(rand: () => number, rows: number, cols: number, scale: number): Float64Array {
  const out = new Float64Array(rows * cols);
  for (let i = 0; i < out.length; i++) out[i] = (rand() * 2 - 1) * scale;
  return out;
}

interface Layer {
  wq: Float64Array;
  wk: Float64Array;
  wv: Float64Array;
  wo: Float64Array;
  mlpIn: Float64Array; // dim x (2*dim)
  mlpOut: Float64Array; // (2*dim) x dim
}

export class TinyTransformer {
  readonly config: ModelConfig;
  private readonly embed: Float64Array; // vocab x dim
  private readonly positions: Float64Array; // maxPositions x dim
  private readonly layersW: Layer[];

  constructor(config: ModelConfig) {
    this.config = config;
    const rand = mulberry32(config.seed);
    const d = config.dim;
    const scale = 1.0 / Math.sqrt(d);
    this.embed = randMatrix(rand, config.vocabSize, d, scale * 2);
    this.positions = randMatrix(rand, config.maxPositions, d, scale);
    this.layersW = [];
    for (let l = 0; l < config.layers; l++) {
      this.layersW.push({
        wq: randMatrix(rand, d, d, scale),
        wk: randMatrix(rand, d, d, scale),
        wv: randMatrix(rand, d, d, scale),
        wo: randMatrix(rand, d, d, scale),
        mlpIn: randMatrix(rand, d, 2 * d, scale),
        mlpOut: randMatrix(rand, 2 * d, d, scale),
      });
    }
  }

  /** hidden states for the whole sequence; causal limits attention to the prefix */
  forward(ids: number[], causal: boolean): Float64Array {
    const { dim: d } = this.config;
    const n = ids.length;
    if (n > this.config.maxPositions) {
      throw new Error(`sequence of ${n} subwords exceeds positional limit`);
    }
    let h: Float64Array = new Float64Array(n * d);
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < d; j++) {
        h[i * d + j] = this.embed[ids[i] * d + j] + this.positions[i * d + j];
      }
    }
    for (const layer of this.layersW) {
      h = this.block(h, n, layer, causal);
    }
    return h;
  }

  private block(h: Float64Array, n: number, layer: Layer, causal: boolean): Float64Array {
    const d = this.config.dim;
    const q = matmul(h, layer.wq, n, d, d);
    const k = matmul(h, layer.wk, n, d, d);
    const v = matmul(h, layer.wv, n, d, d);
    const attnOut = new Float64Array(n * d);
    const invSqrt = 1.0 / Math.sqrt(d);
    const scores = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      const limit = causal ? i + 1 : n;
      let maxScore = -Infinity;
      for (let t = 0; t < limit; t++) {
        let s = 0;
        for (let j = 0; j < d; j++) s += q[i * d + j] * k[t * d + j];
        scores[t] = s * invSqrt;
        if (scores[t] > maxScore) maxScore = scores[t];
      }
      let z = 0;
      for (let t = 0; t < limit; t++) {
        scores[t] = Math.exp(scores[t] - maxScore);
        z += scores[t];
      }
      for (let j = 0; j < d; j++) {
        let acc = 0;
        for (let t = 0; t < limit; t++) acc += (scores[t] / z) * v[t * d + j];
        attnOut[i * d + j] = acc;
      }
    }
    const mixed = matmul(attnOut, layer.wo, n, d, d);
    const afterAttn = new Float64Array(n * d);
    for (let i = 0; i < n * d; i++) afterAttn[i] = h[i] + mixed[i];
    normalizeRows(afterAttn, n, d);
    const inner = matmul(afterAttn, layer.mlpIn, n, d, 2 * d);
    for (let i = 0; i < inner.length; i++) inner[i] = Math.tanh(inner[i]);
    const outer = matmul(inner, layer.mlpOut, n, 2 * d, d);
    const out = new Float64Array(n * d);
    for (let i = 0; i < n * d; i++) out[i] = afterAttn[i] + outer[i];
    normalizeRows(out, n, d);
    return out;
  }

  /** log softmax over the vocabulary at one position (tied output embedding) */
  logProbs(hidden: Float64Array, position: number): Float64Array {
    const { dim: d, vocabSize } = this.config;
    const logits = new Float64Array(vocabSize);
    let maxLogit = -Infinity;
    for (let w = 0; w < vocabSize; w++) {
      let s = 0;
      for (let j = 0; j < d; j++) s += hidden[position * d + j] * this.embed[w * d + j];
      logits[w] = s;
      if (s > maxLogit) maxLogit = s;
    }
    let z = 0;
    for (let w = 0; w < vocabSize; w++) z += Math.exp(logits[w] - maxLogit);
    const logZ = maxLogit + Math.log(z);
    for (let w = 0; w < vocabSize; w++) logits[w] -= logZ;
    return logits;
  }
}

function matmul(
  a: Float64Array,
  b: Float64Array,
  n: number,
  inner: number,
  cols: number
): Float64Array {
  const out = new Float64Array(n * cols);
  for (let i = 0; i < n; i++) {
    for (let k = 0; k < inner; k++) {
      const aik = a[i * inner + k];
      if (aik === 0) continue;
      for (let j = 0; j < cols; j++) {
        out[i * cols + j] += aik * b[k * cols + j];
      }
    }
  }
  return out;
}

function normalizeRows(m: Float64Array, n: number, d: number): void {
  for (let i = 0; i < n; i++) {
    let ss = 0;
    for (let j = 0; j < d; j++) ss += m[i * d + j] * m[i * d + j];
    const inv = 1.0 / Math.sqrt(ss / d + 1e-8);
    for (let j = 0; j < d; j++) m[i * d + j] *= inv;
  }
}
