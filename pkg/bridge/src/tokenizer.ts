/**
 * Character-level wordpiece tokenizer for the built-in model.
 *
 * Every word splits into its characters: the first becomes a plain piece,
 * the rest continuation pieces ("##x").  Characters outside the inventory
 * map to [UNK].  The scheme is deterministic and needs no vocabulary files,
 * while keeping the word -> multiple-subwords structure of real models.
 */

export const PAD = "[PAD]";
export const UNK = "[UNK]";
export const CLS = "[CLS]";
export const SEP = "[SEP]";
export const MASK = "[MASK]";

const CHARS = "abcdefghijklmnopqrstuvwxyz0123456789'-";

export interface Encoded {
  /** subword ids including [CLS] ... [SEP] */
  ids: number[];
  /** [start, end) id positions of each input region, by region name */
  regions: { left: [number, number]; hypothesis: [number, number]; right: [number, number] };
}

export class Tokenizer {
  readonly vocab: string[];
  readonly index: Map<string, number>;

  constructor() {
    this.vocab = [PAD, UNK, CLS, SEP, MASK];
    for (const ch of CHARS) this.vocab.push(ch);
    for (const ch of CHARS) this.vocab.push(`##${ch}`);
    this.index = new Map(this.vocab.map((piece, i) => [piece, i]));
  }

  get size(): number {
    return this.vocab.length;
  }

  id(piece: string): number {
    const found = this.index.get(piece);
    return found === undefined ? this.index.get(UNK)! : found;
  }

  wordToPieces(word: string): number[] {
    const pieces: number[] = [];
    const lowered = word.toLowerCase();
    for (let i = 0; i < lowered.length; i++) {
      const piece = i === 0 ? lowered[i] : `##${lowered[i]}`;
      pieces.push(this.id(piece));
    }
    return pieces.length > 0 ? pieces : [this.id(UNK)];
  }

  wordsToPieces(words: string[]): number[] {
    const out: number[] = [];
    for (const word of words) out.push(...this.wordToPieces(word));
    return out;
  }

  /**
   * Build the full scoring sequence: [CLS] left hypothesis right [SEP].
   * Begin/end markers appear once around the whole augmented sequence;
   * nothing marks the internal boundaries.
   */
  encode(tokens: string[], left: string[], right: string[]): Encoded {
    const leftIds = this.wordsToPieces(left);
    const hypIds = this.wordsToPieces(tokens);
    const rightIds = this.wordsToPieces(right);
    const ids = [this.id(CLS), ...leftIds, ...hypIds, ...rightIds, this.id(SEP)];
    const leftStart = 1;
    const hypStart = leftStart + leftIds.length;
    const rightStart = hypStart + hypIds.length;
    return {
      ids,
      regions: {
        left: [leftStart, hypStart],
        hypothesis: [hypStart, rightStart],
        right: [rightStart, rightStart + rightIds.length],
      },
    };
  }
}
