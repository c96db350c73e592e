"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a [PASS] line on success (run with -s or check the captured
output); a failing criterion fails its test.  Everything here is synthetic
and self-contained; external scorers appear only as in-process doubles.
"""

import itertools
import random
import time

from nbrescore import ngram, synth
from nbrescore.cli import main
from nbrescore.evaluate import (
    CLASSES,
    ErrorBreakdown,
    FrequencyLexicon,
    align,
    baseline_wer,
    corpus_wer,
    decompose_errors,
    error_reduction_report,
    oracle_wer,
)
from nbrescore.nbest import (
    Hypothesis,
    NBestList,
    Session,
    Utterance,
    attach_references,
    load_nbest,
    load_references,
)
from nbrescore.rescore import (
    rescore_plain,
    rescore_session_with_context,
    sweep_lambda,
)
from nbrescore.scoring import (
    BidirectionalNgramScorer,
    CausalNgramScorer,
    ScoreRequest,
    score_masked_pll,
)

from oracles import min_alignment_cost, pll_bruteforce


def announce(name):
    print(f"[PASS] {name}")


# ---------------------------------------------------------------------------


def test_pll_oracle_equivalence_1000_sequences():
    """score_masked_pll == independent brute force, 1e-12, < 10 s."""
    rng = random.Random(20240901)
    start = time.monotonic()
    checked = 0
    while checked < 1000:
        vocab = [f"v{i}" for i in range(rng.randint(2, 10))]
        lines = [
            " ".join(rng.choices(vocab, k=rng.randint(1, 6)))
            for _ in range(rng.randint(3, 12))
        ]
        fwd = ngram.train(lines, order=2, min_count=1)
        bwd = ngram.train(lines, order=2, direction="backward", min_count=1)
        scorer = BidirectionalNgramScorer(fwd, bwd)
        for _ in range(5):
            tokens = tuple(rng.choices(vocab, k=rng.randint(1, 5)))
            left = tuple(rng.choices(vocab, k=rng.randint(0, 3)))
            right = tuple(rng.choices(vocab, k=rng.randint(0, 3)))
            got = score_masked_pll(scorer, ScoreRequest(tokens, left, right))
            want = pll_bruteforce(fwd, bwd, tokens, left, right)
            assert abs(got - want) <= 1e-12, (tokens, left, right, got, want)
            checked += 1
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    announce(
        f"PLL oracle equivalence: {checked} sequences within 1e-12 in {elapsed:.1f}s"
    )


def test_alignment_optimality_exhaustive():
    """DP cost == enumerated minimum on every pair of length <= 4, < 30 s."""
    start = time.monotonic()
    vocab = ["a", "b", "c"]
    seqs = [list(s) for n in range(5) for s in itertools.product(vocab, repeat=n)]
    assert len(seqs) == 121
    pairs = 0
    for ref in seqs:
        for hyp in seqs:
            assert align(ref, hyp).errors == min_alignment_cost(ref, hyp)
            pairs += 1
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"took {elapsed:.1f}s"
    announce(f"alignment optimality: {pairs} pairs exact in {elapsed:.1f}s")


def test_lambda_zero_identity_and_sweep_dominance(tmp_path):
    """Sweep row at lambda=0 equals baseline WER exactly; grid min <= baseline."""
    data = tmp_path / "synth"
    assert (
        main(
            ["synth", "--out-dir", str(data), "--sessions", "25",
             "--utterances", "20", "--nbest-size", "16", "--seed", "7"]
        )
        == 0
    )
    sessions = load_nbest(data / "nbest.jsonl")
    refs = load_references(data / "refs.tsv")
    sessions = attach_references(sessions, refs, require_all=True)
    assert sum(len(s) for s in sessions) == 500

    corpus = (data / "corpus.txt").read_text().splitlines()
    scorer = CausalNgramScorer(ngram.train(corpus, order=3, min_count=1))
    report = sweep_lambda(sessions, scorer)

    baseline = baseline_wer(sessions).wer
    assert report.grid[0] == 0.0
    assert report.avg_wer[0] == baseline  # identical floats, not approx
    assert min(report.avg_wer) <= baseline
    announce(
        f"lambda-0 identity & dominance: baseline {baseline:.4f}, "
        f"grid min {min(report.avg_wer):.4f}"
    )


def test_synthetic_rescoring_gain_five_seeds():
    """True-LM rescoring at the swept best lambda cuts WER >= 10% relative."""
    gains = []
    for seed in range(5):
        config = synth.SynthConfig(
            sessions=10, utterances_per_session=20, nbest_size=16, seed=seed,
            am_correlation=0.7,
        )
        sessions, true_lm, _corpus = synth.generate(config)
        scorer = CausalNgramScorer(true_lm)
        base = baseline_wer(sessions).wer
        best = sweep_lambda(sessions, scorer).best_lambda
        results = rescore_plain(sessions, scorer, best)
        refs = {
            utt.utterance_id: utt.reference
            for session in sessions
            for utt in session.utterances
        }
        rescored = corpus_wer(
            [(refs[r.utterance_id], r.chosen_tokens) for r in results]
        ).wer
        gain = 100.0 * (base - rescored) / base
        assert gain > 0.0, f"seed {seed}: no improvement ({base} -> {rescored})"
        gains.append(gain)
    mean_gain = sum(gains) / len(gains)
    assert mean_gain >= 10.0, f"mean relative gain {mean_gain:.1f}% < 10%"
    announce(
        "synthetic rescoring gain: per-seed "
        + ", ".join(f"{g:.1f}%" for g in gains)
        + f"; mean {mean_gain:.1f}%"
    )


def test_oracle_properties():
    """oracle(1) == baseline, non-increasing in n, planted rank found."""
    sessions, _lm, _corpus = synth.generate(
        synth.SynthConfig(sessions=8, utterances_per_session=16, seed=13)
    )
    assert oracle_wer(sessions, 1).wer == baseline_wer(sessions).wer
    wers = [oracle_wer(sessions, n).wer for n in (1, 2, 4, 8, 16, 100)]
    assert all(a >= b for a, b in zip(wers, wers[1:])), wers

    planted, _lm, _corpus = synth.generate(
        synth.SynthConfig(sessions=4, utterances_per_session=10, seed=14, plant_rank=7)
    )
    assert oracle_wer(planted, 8).wer == 0.0
    assert oracle_wer(planted, 4).wer > 0.0
    announce(
        f"oracle properties: n-sweep {['%.4f' % w for w in wers]}, "
        "planted oracle(8)=0, oracle(4)>0"
    )


def test_error_accounting_identities():
    """Breakdown total == D + I + 2S exactly; overall == weighted avg to 1e-9."""
    rng = random.Random(99)
    vocab = [f"w{i}" for i in range(12)]
    probs = {w: p / sum(range(1, 13)) for w, p in zip(vocab, range(12, 0, -1))}
    lexicon = FrequencyLexicon.from_unigram_table(
        ngram.UnigramTable(probs=probs, total_tokens=1000), 0.1, 0.04
    )
    for _ in range(1000):
        ref = rng.choices(vocab, k=rng.randint(0, 8))
        hyp = rng.choices(vocab, k=rng.randint(0, 8))
        alignment = align(ref, hyp)
        breakdown = decompose_errors(alignment, lexicon)
        assert breakdown.total() == (
            alignment.deletions + alignment.insertions + 2 * alignment.substitutions
        )

    for _ in range(1000):
        base = ErrorBreakdown()
        system = ErrorBreakdown()
        for c in CLASSES:
            for e in ("del", "ins"):
                base.counts[c][e] = rng.randint(1, 1000)
                system.counts[c][e] = rng.randint(0, 1000)
        report = error_reduction_report(base, system)
        for c in CLASSES:
            b_del, b_ins = base.counts[c]["del"], base.counts[c]["ins"]
            weighted = (
                b_del * report.rates[c]["del"] + b_ins * report.rates[c]["ins"]
            ) / (b_del + b_ins)
            assert abs(report.rates[c]["overall"] - weighted) <= 1e-9
    announce("error accounting: count identity exact, weighted average within 1e-9")


class TableScorer:
    """Raises KeyError on any request outside the hand-built table."""

    name = "table"
    provenance = "scratch"

    def __init__(self, table):
        self.table = dict(table)
        self.seen = []

    def score_hypothesis(self, tokens, left_context=(), right_context=()):
        key = (tuple(tokens), tuple(left_context), tuple(right_context))
        self.seen.append(key)
        return self.table[key]


def test_context_pipeline_trace():
    """Three-utterance session reproduces the hand simulation exactly."""
    A = tuple(f"a{i}" for i in range(45))  # u0 cache choice, 45 tokens
    B = ("b",)
    C = ("c",)
    D = ("d", "d")
    E = tuple(f"e{i}" for i in range(25))  # u2 baseline 1-best, 25 tokens
    F = ("f",)

    def utt(i, hyps):
        return Utterance(
            utterance_id=f"u{i}",
            session_id="s",
            index_in_session=i,
            nbest=NBestList(
                utterance_id=f"u{i}",
                hypotheses=tuple(
                    Hypothesis(tokens=t, am_score=am, rank=r)
                    for r, (t, am) in enumerate(hyps)
                ),
            ),
        )

    session = Session(
        session_id="s",
        utterances=(
            utt(0, [(A, -1.0), (B, -3.0)]),
            utt(1, [(C, -1.0), (D, -1.2)]),
            utt(2, [(E, -1.0), (F, -2.0)]),
        ),
    )

    # Hand simulation with lam_cache=0.2, lam_final=0.8, budgets (40, 20):
    #   u0: left=(), right=C[:20]=("c",)
    #       cache: A -> .8(-1)+.2(-4)   = -1.6   B -> .8(-3)+.2(-1) = -2.6  => A
    #       final: A -> .2(-1)+.8(-4)   = -3.4   B -> .2(-3)+.8(-1) = -1.4  => B (rank 1)
    #   u1: left=A[5:] (last 40 of 45), right=E[:20] (first 20 of 25)
    #       cache: C -> .8(-1)+.2(-2)   = -1.2   D -> .8(-1.2)+.2(-1) = -1.16 => D
    #       final: C -> .2(-1)+.8(-2)   = -1.8   D -> .2(-1.2)+.8(-1) = -1.04 => D (rank 1)
    #   u2: left=(A + D)[-40:] = A[7:] + D, right=()
    #       final: E -> .2(-1)+.8(-1)   = -1.0   F -> .2(-2)+.8(-9) = -7.6  => E (rank 0)
    table = {
        (A, (), C[:20]): -4.0,
        (B, (), C[:20]): -1.0,
        (C, A[5:], E[:20]): -2.0,
        (D, A[5:], E[:20]): -1.0,
        (E, A[7:] + D, ()): -1.0,
        (F, A[7:] + D, ()): -9.0,
    }
    scorer = TableScorer(table)
    results = rescore_session_with_context(
        session, scorer, lam_final=0.8, left_budget=40, right_budget=20, lam_cache=0.2
    )

    assert [r.chosen_rank for r in results] == [1, 1, 0]
    assert results[0].left_context == () and results[0].right_context == ("c",)
    assert results[1].left_context == A[5:]          # last 40 kept
    assert len(results[1].left_context) == 40
    assert results[1].right_context == E[:20]        # first 20 kept
    assert len(results[1].right_context) == 20
    assert results[2].left_context == A[7:] + D      # cache = lam_cache choices
    assert results[2].right_context == ()
    # every request matched the hand-built table (KeyError otherwise)
    assert len(scorer.seen) == 6
    announce("context pipeline trace: cache, truncation sides, and choices exact")


def test_arpa_round_trip_100_random_models(tmp_path):
    """save/load preserves every conditional log probability within 1e-6."""
    rng = random.Random(321)
    for index in range(100):
        vocab = [f"v{i}" for i in range(rng.randint(2, 8))]
        lines = [
            " ".join(rng.choices(vocab, k=rng.randint(1, 6)))
            for _ in range(rng.randint(2, 12))
        ]
        order = rng.randint(1, 3)
        model = ngram.train(lines, order=order, min_count=rng.choice([1, 1, 2]))
        path = tmp_path / f"model{index}.arpa"
        ngram.save_arpa(model, path)
        loaded = ngram.load_arpa(path)

        contexts = {()}
        for level in model.probs:
            contexts.update(level.keys())
        for _ in range(5):
            contexts.add(tuple(rng.choices(vocab + ["zzz"], k=rng.randint(1, order))))
        for ctx in contexts:
            for word in model.predictable:
                a = model.cond_logprob(word, ctx)
                b = loaded.cond_logprob(word, ctx)
                assert abs(a - b) <= 1e-6, (index, ctx, word, a, b)
    announce("ARPA round trip: 100 random models preserved within 1e-6")
