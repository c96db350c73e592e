"""Synthetic sessions for self-contained end-to-end checks.

References are sampled from a trigram model trained on a generated corpus
(the "true LM"); N-best lists are built by noisy-channel corruption of each
reference, with AM scores negatively correlated with the corruption level at
a configurable strength.  Ranks follow AM-score order, so λ=0 selection
reproduces the baseline exactly.  Everything is driven by one RNG seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .nbest import Hypothesis, NBestList, Session, Utterance
from .ngram import BOS, EOS, UNK, NgramLike, conditional_distribution, train


@dataclass(frozen=True)
class SynthConfig:
    sessions: int = 10
    utterances_per_session: int = 10
    nbest_size: int = 16
    vocab_size: int = 25
    corpus_lines: int = 400
    min_len: int = 3
    max_len: int = 12
    am_correlation: float = 0.7
    am_scale: float = 1.0
    seed: int = 0
    # When set, every utterance carries one pristine hypothesis at exactly
    # this rank and corrupted hypotheses everywhere else.
    plant_rank: int | None = None


def _base_corpus(rng: random.Random, config: SynthConfig) -> list[str]:
    """Markov-chain text with skewed word frequencies."""
    words = [f"w{i}" for i in range(config.vocab_size)]
    # Zipf-ish unigram weights plus a sparse random bigram affinity table.
    weights = [1.0 / (i + 1) ** 0.8 for i in range(config.vocab_size)]
    affinity = {
        w: rng.sample(words, k=max(2, config.vocab_size // 4)) for w in words
    }
    lines = []
    for _ in range(config.corpus_lines):
        length = rng.randint(config.min_len, config.max_len)
        line = [rng.choices(words, weights=weights)[0]]
        while len(line) < length:
            prev = line[-1]
            if rng.random() < 0.75:
                line.append(rng.choice(affinity[prev]))
            else:
                line.append(rng.choices(words, weights=weights)[0])
        lines.append(" ".join(line))
    return lines


def sample_sentence(
    model: NgramLike, rng: random.Random, min_len: int = 1, max_len: int = 20
) -> list[str]:
    """Sample one sentence from a forward model, excluding the unknown symbol."""
    history: list[str] = [BOS] * (model.order - 1)
    out: list[str] = []
    while len(out) < max_len:
        dist = conditional_distribution(model, history)
        dist.pop(UNK, None)
        if len(out) < min_len:
            dist.pop(EOS, None)
        words = list(dist)
        word = rng.choices(words, weights=[dist[w] for w in words])[0]
        if word == EOS:
            break
        out.append(word)
        history.append(word)
    return out


def _corrupt(
    tokens: list[str], rng: random.Random, n_ops: int, vocab: list[str]
) -> list[str]:
    out = list(tokens)
    for _ in range(n_ops):
        choice = rng.random()
        if choice < 0.5 and out:  # substitute with a different word
            pos = rng.randrange(len(out))
            alternatives = [w for w in vocab if w != out[pos]]
            out[pos] = rng.choice(alternatives)
        elif choice < 0.75 and out:  # delete
            out.pop(rng.randrange(len(out)))
        else:  # insert
            out.insert(rng.randrange(len(out) + 1), rng.choice(vocab))
    return out


def _noise_sigma(levels: list[int], rho: float) -> float:
    mean = sum(levels) / len(levels)
    var = sum((l - mean) ** 2 for l in levels) / len(levels)
    if var == 0 or rho >= 1.0:
        return 0.0
    return math.sqrt(var) * math.sqrt(1.0 / (rho * rho) - 1.0)


def generate(config: SynthConfig):
    """Build (sessions, true_lm, corpus_lines); references are attached."""
    rng = random.Random(config.seed)
    corpus = _base_corpus(rng, config)
    true_lm = train(corpus, order=3, smoothing="kneser_ney", min_count=1)
    vocab = sorted(true_lm.vocab - {BOS, EOS, UNK})

    n = config.nbest_size
    levels_template = list(range(n))
    sigma = _noise_sigma(levels_template, config.am_correlation)

    sessions = []
    utt_counter = 0
    for s in range(config.sessions):
        utterances = []
        for i in range(config.utterances_per_session):
            reference = sample_sentence(
                true_lm, rng, min_len=config.min_len, max_len=config.max_len
            )
            if config.plant_rank is not None:
                hyps = _planted_nbest(reference, rng, config, vocab)
            else:
                hyps = _noisy_nbest(reference, rng, config, vocab, sigma)
            utt_id = f"u{utt_counter:06d}"
            utt_counter += 1
            utterances.append(
                Utterance(
                    utterance_id=utt_id,
                    session_id=f"s{s:04d}",
                    index_in_session=i,
                    nbest=NBestList(utterance_id=utt_id, hypotheses=tuple(hyps)),
                    reference=tuple(reference),
                )
            )
        sessions.append(Session(session_id=f"s{s:04d}", utterances=tuple(utterances)))
    return sessions, true_lm, corpus


def _noisy_nbest(reference, rng, config, vocab, sigma) -> list[Hypothesis]:
    candidates = []
    for level in range(config.nbest_size):
        tokens = _corrupt(list(reference), rng, level, vocab)
        am = -config.am_scale * (level + rng.gauss(0.0, sigma))
        candidates.append((am, level, tokens))
    candidates.sort(key=lambda item: (-item[0], item[1]))
    return [
        Hypothesis(tokens=tuple(tokens), am_score=am, rank=rank)
        for rank, (am, _level, tokens) in enumerate(candidates)
    ]


def _planted_nbest(reference, rng, config, vocab) -> list[Hypothesis]:
    """One pristine hypothesis at config.plant_rank, guaranteed errors elsewhere."""
    rank_of_truth = min(config.plant_rank, config.nbest_size - 1)
    hyps = []
    for rank in range(config.nbest_size):
        if rank == rank_of_truth:
            tokens = list(reference)
        else:
            tokens = list(reference)
            while tokens == list(reference):
                tokens = _corrupt(list(reference), rng, 1 + rank % 3, vocab)
        hyps.append(
            Hypothesis(
                tokens=tuple(tokens),
                am_score=-0.5 * rank,
                rank=rank,
            )
        )
    return hyps
