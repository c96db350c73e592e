"""WER alignment, oracle selection, frequency classes, and error analysis.

WER is pooled over the corpus: (S + D + I) / total reference length.
Alignments use unit costs with a deterministic backtrace (substitution
preferred over delete+insert, deletion preferred over insertion on ties).
For the lexical analysis each substitution counts as one deletion of the
reference word plus one insertion of the hypothesis word, classified by the
unigram-probability class of the word involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from ._kernels import OP_DEL, OP_INS, OP_MATCH, OP_SUB
from .errors import EmptyCorpus, MissingReference, ZeroReferenceLength
from .nbest import Session
from .ngram import UnigramTable

CLASS_HIGH = "high"
CLASS_MEDIUM = "medium"
CLASS_LOW = "low"
CLASSES = (CLASS_HIGH, CLASS_MEDIUM, CLASS_LOW)

ERR_DEL = "del"
ERR_INS = "ins"

# Threshold profiles (t_high, t_med): a word is high-frequency iff its
# unigram probability strictly exceeds t_high, medium iff it exceeds t_med.
# "paper-literal" keeps the published cutoffs verbatim even though they are
# inconsistent with the published class sizes; "fractional" is a plausible
# fraction-valued reading.  Reports always echo the thresholds used.
THRESHOLD_PROFILES = {
    "paper-literal": (0.1, 0.0001),
    "fractional": (0.001, 0.000001),
}


class _Interner:
    """Word -> dense int32 ids, shared across one corpus-level computation."""

    def __init__(self):
        self._ids: dict[str, int] = {}

    def encode(self, words: Sequence[str]) -> np.ndarray:
        ids = self._ids
        out = np.empty(len(words), dtype=np.int32)
        for i, w in enumerate(words):
            idx = ids.get(w)
            if idx is None:
                idx = len(ids)
                ids[w] = idx
            out[i] = idx
        return out


@dataclass(frozen=True)
class AlignOp:
    kind: str  # "match" | "sub" | "del" | "ins"
    ref: str | None
    hyp: str | None


_KIND = {OP_MATCH: "match", OP_SUB: "sub", OP_DEL: "del", OP_INS: "ins"}


@dataclass(frozen=True)
class Alignment:
    ops: tuple[AlignOp, ...]

    @property
    def substitutions(self) -> int:
        return sum(1 for op in self.ops if op.kind == "sub")

    @property
    def deletions(self) -> int:
        return sum(1 for op in self.ops if op.kind == "del")

    @property
    def insertions(self) -> int:
        return sum(1 for op in self.ops if op.kind == "ins")

    @property
    def errors(self) -> int:
        return sum(1 for op in self.ops if op.kind != "match")

    def reference_side(self) -> tuple[str, ...]:
        return tuple(op.ref for op in self.ops if op.ref is not None)

    def hypothesis_side(self) -> tuple[str, ...]:
        return tuple(op.hyp for op in self.ops if op.hyp is not None)


def align(reference: Sequence[str], hypothesis: Sequence[str]) -> Alignment:
    """Minimal-cost alignment between a reference and a hypothesis."""
    interner = _Interner()
    ref_ids = interner.encode(reference)
    hyp_ids = interner.encode(hypothesis)
    codes = _kernels.align_ops(ref_ids, hyp_ids)

    ops = []
    i = j = 0
    for code in codes:
        kind = _KIND[int(code)]
        if kind in ("match", "sub"):
            ops.append(AlignOp(kind, reference[i], hypothesis[j]))
            i += 1
            j += 1
        elif kind == "del":
            ops.append(AlignOp(kind, reference[i], None))
            i += 1
        else:
            ops.append(AlignOp(kind, None, hypothesis[j]))
            j += 1
    return Alignment(ops=tuple(ops))


@dataclass(frozen=True)
class WerCounts:
    substitutions: int
    deletions: int
    insertions: int
    ref_length: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return self.errors / self.ref_length

    def as_dict(self) -> dict:
        return {
            "wer": self.wer,
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "ref_length": self.ref_length,
        }


def corpus_wer(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> WerCounts:
    """Pooled WER over (reference, hypothesis) pairs."""
    s = d = ins = n = 0
    count = 0
    for reference, hypothesis in pairs:
        a = align(reference, hypothesis)
        s += a.substitutions
        d += a.deletions
        ins += a.insertions
        n += len(reference)
        count += 1
    if count == 0:
        raise EmptyCorpus("no (reference, hypothesis) pairs")
    if n == 0:
        raise ZeroReferenceLength("pooled reference length is zero")
    return WerCounts(substitutions=s, deletions=d, insertions=ins, ref_length=n)


def _require_reference(utt):
    if utt.reference is None:
        raise MissingReference(f"no reference for {utt.utterance_id!r}")
    return utt.reference


def baseline_wer(sessions: Iterable[Session]) -> WerCounts:
    """WER of the ASR rank-0 hypotheses."""
    pairs = [
        (_require_reference(utt), utt.nbest.one_best.tokens)
        for session in sessions
        for utt in session.utterances
    ]
    return corpus_wer(pairs)


def oracle_wer(sessions: Iterable[Session], n: int) -> WerCounts:
    """WER of the per-utterance error-minimizing choice among ranks 0..n-1.

    Ties go to the lowest rank; the per-utterance objective is the raw error
    count, which is what minimizes pooled WER.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    interner = _Interner()
    chosen = []
    for session in sessions:
        for utt in session.utterances:
            reference = _require_reference(utt)
            ref_ids = interner.encode(reference)
            best_tokens = None
            best_cost = None
            for hyp in utt.nbest.hypotheses[:n]:
                cost = _kernels.edit_cost(ref_ids, interner.encode(hyp.tokens))
                if best_cost is None or cost < best_cost:
                    best_cost = cost
                    best_tokens = hyp.tokens
            chosen.append((reference, best_tokens))
    return corpus_wer(chosen)


@dataclass(frozen=True)
class FrequencyLexicon:
    """Word -> {high, medium, low} by unigram-probability thresholds.

    Words above t_high are high, words in (t_med, t_high] are medium, and
    everything else, including words missing from the table, is low.
    """

    table: dict[str, str]
    t_high: float
    t_med: float

    @classmethod
    def from_unigram_table(
        cls, unigrams: UnigramTable, t_high: float, t_med: float
    ) -> "FrequencyLexicon":
        if not t_high > t_med >= 0.0:
            raise ValueError("need t_high > t_med >= 0")
        table = {}
        for word, p in unigrams.probs.items():
            if p > t_high:
                table[word] = CLASS_HIGH
            elif p > t_med:
                table[word] = CLASS_MEDIUM
            else:
                table[word] = CLASS_LOW
        return cls(table=table, t_high=t_high, t_med=t_med)

    @classmethod
    def from_profile(cls, unigrams: UnigramTable, profile: str) -> "FrequencyLexicon":
        t_high, t_med = THRESHOLD_PROFILES[profile]
        return cls.from_unigram_table(unigrams, t_high, t_med)

    def classify(self, word: str) -> str:
        return self.table.get(word, CLASS_LOW)


def classify_word_frequency(lexicon: FrequencyLexicon, word: str) -> str:
    return lexicon.classify(word)


@dataclass
class ErrorBreakdown:
    """Deletion/insertion counts per frequency class, substitutions split."""

    counts: dict[str, dict[str, int]] = field(
        default_factory=lambda: {c: {ERR_DEL: 0, ERR_INS: 0} for c in CLASSES}
    )

    def total(self) -> int:
        return sum(v for per_class in self.counts.values() for v in per_class.values())

    def add(self, other: "ErrorBreakdown") -> "ErrorBreakdown":
        out = ErrorBreakdown()
        for c in CLASSES:
            for e in (ERR_DEL, ERR_INS):
                out.counts[c][e] = self.counts[c][e] + other.counts[c][e]
        return out


def decompose_errors(alignment: Alignment, lexicon: FrequencyLexicon) -> ErrorBreakdown:
    """Split alignment errors by frequency class and deletion/insertion type.

    A substitution contributes one deletion under the reference word's class
    and one insertion under the hypothesis word's class.
    """
    breakdown = ErrorBreakdown()
    for op in alignment.ops:
        if op.kind == "match":
            continue
        if op.kind in ("del", "sub"):
            breakdown.counts[lexicon.classify(op.ref)][ERR_DEL] += 1
        if op.kind in ("ins", "sub"):
            breakdown.counts[lexicon.classify(op.hyp)][ERR_INS] += 1
    return breakdown


@dataclass(frozen=True)
class ReductionReport:
    """Relative error reduction rates (percent) against a baseline breakdown.

    Cells with a zero baseline count are undefined (None) and listed in
    ``undefined_cells``.  Per class, the overall rate equals the weighted
    average of the deletion and insertion rates with baseline counts as
    weights whenever both are defined.
    """

    rates: dict[str, dict[str, float | None]]
    baseline: ErrorBreakdown
    system: ErrorBreakdown
    undefined_cells: tuple[tuple[str, str], ...]


def error_reduction_report(
    baseline: ErrorBreakdown, system: ErrorBreakdown
) -> ReductionReport:
    rates: dict[str, dict[str, float | None]] = {}
    undefined = []
    for c in CLASSES:
        row: dict[str, float | None] = {}
        for e in (ERR_DEL, ERR_INS):
            b = baseline.counts[c][e]
            s = system.counts[c][e]
            if b == 0:
                row[e] = None
                undefined.append((c, e))
            else:
                row[e] = 100.0 * (b - s) / b
        b_total = baseline.counts[c][ERR_DEL] + baseline.counts[c][ERR_INS]
        s_total = system.counts[c][ERR_DEL] + system.counts[c][ERR_INS]
        if b_total == 0:
            row["overall"] = None
            undefined.append((c, "overall"))
        else:
            row["overall"] = 100.0 * (b_total - s_total) / b_total
        rates[c] = row
    return ReductionReport(
        rates=rates,
        baseline=baseline,
        system=system,
        undefined_cells=tuple(undefined),
    )
