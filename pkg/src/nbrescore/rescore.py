"""Score combination, hypothesis selection, λ sweeps, and context augmentation.

The combined score is (1 - λ) * am + λ * lm.  Ties in the combined score
break toward the lowest original rank, which makes λ=0 reproduce the ASR
1-best exactly.  The λ grid sweep computes LM scores once and reuses them
for every λ; the best λ is the largest grid value attaining the minimum
unweighted mean WER across test sets.

Context augmentation processes a session in temporal order: the left context
is the concatenation of cached past 1-bests (each chosen at a fixed cache λ
with whatever context had accumulated by then), the right context is the
baseline rank-0 1-best of the next utterance.  No boundary markers are
inserted between concatenated utterances; backends attach their own begin
and end markers once around the full augmented sequence.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import _kernels
from .errors import MissingReference
from .evaluate import _Interner, corpus_wer
from .nbest import Hypothesis, NBestList, Session, Utterance
from .scoring import truncate_context

DEFAULT_GRID = tuple(i * 5 / 100 for i in range(21))
DEFAULT_LEFT_BUDGET = 40
DEFAULT_RIGHT_BUDGET = 20
DEFAULT_LAMBDA_CACHE = 0.20

ABLATION_PRESETS = ((40, 20), (40, 0), (0, 20), (20, 10), (80, 40))


def _check_lambda(lam: float) -> float:
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return float(lam)


def combine_scores(am_score: float, lm_score: float, lam: float) -> float:
    """Linear interpolation of the ASR and LM log scores."""
    _check_lambda(lam)
    if not (math.isfinite(am_score) and math.isfinite(lm_score)):
        raise ValueError("scores must be finite")
    return (1.0 - lam) * am_score + lam * lm_score


def select_best(
    nbest: NBestList, lm_scores: Sequence[float], lam: float
) -> Hypothesis:
    """Argmax of the combined score; exact ties keep the lowest rank."""
    if len(lm_scores) != len(nbest.hypotheses):
        raise ValueError(
            f"{len(lm_scores)} LM scores for {len(nbest.hypotheses)} hypotheses"
        )
    best = None
    best_score = -math.inf
    for hyp, lm in zip(nbest.hypotheses, lm_scores):
        combined = combine_scores(hyp.am_score, lm, lam)
        if best is None or combined > best_score:
            best = hyp
            best_score = combined
    return best


@dataclass(frozen=True)
class RescoreResult:
    utterance_id: str
    chosen_rank: int
    chosen_tokens: tuple[str, ...]
    combined_scores: tuple[float, ...]
    lm_scores: tuple[float, ...]
    lam: float
    left_context: tuple[str, ...]
    right_context: tuple[str, ...]
    # ranks whose hypothesis was empty (scored as the empty product, 0.0)
    empty_ranks: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "chosen_rank": self.chosen_rank,
            "chosen_tokens": list(self.chosen_tokens),
            "combined_scores": list(self.combined_scores),
            "lm_scores": list(self.lm_scores),
            "lambda": self.lam,
            "left_context": list(self.left_context),
            "right_context": list(self.right_context),
            "empty_ranks": list(self.empty_ranks),
        }


def _score_nbest(scorer, utt: Utterance, left=(), right=()) -> list[float]:
    return [
        scorer.score_hypothesis(h.tokens, left, right) for h in utt.nbest.hypotheses
    ]


def _result(utt: Utterance, lm_scores, lam, left=(), right=()) -> RescoreResult:
    chosen = select_best(utt.nbest, lm_scores, lam)
    combined = tuple(
        combine_scores(h.am_score, lm, lam)
        for h, lm in zip(utt.nbest.hypotheses, lm_scores)
    )
    return RescoreResult(
        utterance_id=utt.utterance_id,
        chosen_rank=chosen.rank,
        chosen_tokens=chosen.tokens,
        combined_scores=combined,
        lm_scores=tuple(lm_scores),
        lam=lam,
        left_context=tuple(left),
        right_context=tuple(right),
        empty_ranks=tuple(h.rank for h in utt.nbest.hypotheses if h.is_empty),
    )


def rescore_plain(
    sessions: Iterable[Session], scorer, lam: float, threads: int = 1
) -> list[RescoreResult]:
    """Rescore every utterance without any cross-utterance context."""
    _check_lambda(lam)
    utts = [utt for session in sessions for utt in session.utterances]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            score_rows = list(pool.map(lambda u: _score_nbest(scorer, u), utts))
    else:
        score_rows = [_score_nbest(scorer, u) for u in utts]
    return [_result(u, row, lam) for u, row in zip(utts, score_rows)]


def rescore_session_with_context(
    session: Session,
    scorer,
    lam_final: float,
    left_budget: int = DEFAULT_LEFT_BUDGET,
    right_budget: int = DEFAULT_RIGHT_BUDGET,
    lam_cache: float = DEFAULT_LAMBDA_CACHE,
) -> list[RescoreResult]:
    """Session-ordered rescoring with past/future 1-best context attached.

    Each utterance's hypotheses are scored once given the contexts; the
    final choice uses ``lam_final`` while the copy appended to the past
    cache uses ``lam_cache``.  The right context always comes from the
    *baseline* (unrescored) 1-best of the following utterance.
    """
    _check_lambda(lam_final)
    _check_lambda(lam_cache)
    cache: list[str] = []
    results = []
    utterances = session.utterances
    for i, utt in enumerate(utterances):
        if i + 1 < len(utterances):
            future_tokens = utterances[i + 1].nbest.one_best.tokens
        else:
            future_tokens = ()
        left, right = truncate_context(cache, future_tokens, left_budget, right_budget)
        lm_scores = _score_nbest(scorer, utt, left, right)
        results.append(_result(utt, lm_scores, lam_final, left, right))
        cache_choice = select_best(utt.nbest, lm_scores, lam_cache)
        cache.extend(cache_choice.tokens)
    return results


def rescore_with_context(
    sessions: Iterable[Session],
    scorer,
    lam_final: float,
    left_budget: int = DEFAULT_LEFT_BUDGET,
    right_budget: int = DEFAULT_RIGHT_BUDGET,
    lam_cache: float = DEFAULT_LAMBDA_CACHE,
    threads: int = 1,
) -> list[RescoreResult]:
    """Context pipeline over many sessions (sequential inside, parallel across)."""
    sessions = list(sessions)

    def run(session: Session) -> list[RescoreResult]:
        return rescore_session_with_context(
            session, scorer, lam_final, left_budget, right_budget, lam_cache
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run, sessions))
    else:
        chunks = [run(s) for s in sessions]
    return [r for chunk in chunks for r in chunk]


@dataclass(frozen=True)
class SweepReport:
    grid: tuple[float, ...]
    set_names: tuple[str, ...]
    wer_by_set: dict[str, tuple[float, ...]]
    avg_wer: tuple[float, ...]
    best_lambda: float
    scorer_name: str
    scorer_provenance: str

    def as_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "sets": list(self.set_names),
            "wer": {name: list(vals) for name, vals in self.wer_by_set.items()},
            "avg_wer": list(self.avg_wer),
            "best_lambda": self.best_lambda,
            "scorer": {
                "name": self.scorer_name,
                "provenance": self.scorer_provenance,
            },
        }


def _utterances_with_references(sessions: Iterable[Session]) -> list[Utterance]:
    utts = []
    for session in sessions:
        for utt in session.utterances:
            if utt.reference is None:
                raise MissingReference(f"no reference for {utt.utterance_id!r}")
            utts.append(utt)
    return utts


def sweep_lambda(
    test_sets: Mapping[str, Iterable[Session]] | Iterable[Session],
    scorer,
    grid: Sequence[float] = DEFAULT_GRID,
    threads: int = 1,
) -> SweepReport:
    """WER per grid λ per test set; LM scores are computed once.

    ``test_sets`` is either a mapping of set name to sessions or a bare
    iterable treated as one set named "all".  best_lambda is the largest λ
    whose unweighted mean WER across sets equals the grid minimum.
    """
    if not isinstance(test_sets, Mapping):
        test_sets = {"all": test_sets}
    grid = tuple(_check_lambda(l) for l in grid)
    if not grid:
        raise ValueError("empty lambda grid")

    per_set: dict[str, list[tuple[Utterance, list[float]]]] = {}
    for name, sessions in test_sets.items():
        utts = _utterances_with_references(sessions)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(lambda u: _score_nbest(scorer, u), utts))
        else:
            rows = [_score_nbest(scorer, u) for u in utts]
        per_set[name] = list(zip(utts, rows))

    interner = _Interner()
    encoded: dict[str, list[tuple]] = {}
    for name, scored in per_set.items():
        encoded[name] = [
            (
                interner.encode(utt.reference),
                len(utt.reference),
                utt.nbest,
                lm_scores,
                [interner.encode(h.tokens) for h in utt.nbest.hypotheses],
            )
            for utt, lm_scores in scored
        ]

    wer_by_set: dict[str, list[float]] = {name: [] for name in encoded}
    for lam in grid:
        for name, items in encoded.items():
            errors = 0
            total = 0
            for ref_ids, ref_len, nbest, lm_scores, hyp_ids in items:
                chosen = select_best(nbest, lm_scores, lam)
                errors += _kernels.edit_cost(ref_ids, hyp_ids[chosen.rank])
                total += ref_len
            wer_by_set[name].append(errors / total)

    names = tuple(encoded)
    avg = tuple(
        sum(wer_by_set[name][i] for name in names) / len(names)
        for i in range(len(grid))
    )
    minimum = min(avg)
    best_lambda = max(lam for lam, value in zip(grid, avg) if value == minimum)

    return SweepReport(
        grid=grid,
        set_names=names,
        wer_by_set={name: tuple(vals) for name, vals in wer_by_set.items()},
        avg_wer=avg,
        best_lambda=best_lambda,
        scorer_name=getattr(scorer, "name", "scorer"),
        scorer_provenance=getattr(scorer, "provenance", "scratch"),
    )


def run_ablation(
    sessions: Iterable[Session],
    scorer,
    lam: float,
    configs: Sequence[tuple[int, int]] = ABLATION_PRESETS,
    lam_cache: float = DEFAULT_LAMBDA_CACHE,
    threads: int = 1,
) -> list[dict]:
    """One pooled-WER row per (left_budget, right_budget) context size."""
    sessions = list(sessions)
    _utterances_with_references(sessions)
    refs = {
        utt.utterance_id: utt.reference
        for session in sessions
        for utt in session.utterances
    }
    rows = []
    for left_budget, right_budget in configs:
        results = rescore_with_context(
            sessions, scorer, lam, left_budget, right_budget, lam_cache, threads
        )
        pairs = [(refs[r.utterance_id], r.chosen_tokens) for r in results]
        counts = corpus_wer(pairs)
        rows.append(
            {
                "left_budget": left_budget,
                "right_budget": right_budget,
                "wer": counts.wer,
                "errors": counts.errors,
                "ref_length": counts.ref_length,
            }
        )
    return rows
