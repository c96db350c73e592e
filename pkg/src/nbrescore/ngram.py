"""Smoothed n-gram language models in forward or backward direction.

Two trainable flavors share one query interface:

* interpolated Kneser-Ney with a single count-of-counts discount per order,
  stored as backoff tables (the production model, ARPA-serializable);
* additive (add-k) smoothing computed straight from counts, kept because its
  probabilities are hand-checkable; k=0 is exact maximum likelihood.

Token accounting: start symbols condition but are never predicted, the end
symbol is predicted.  A backward model is literally a forward model over
line-reversed text; its query context is the *following* words, given in
reversed order so the rightmost context word is always the one adjacent to
the predicted position.  Disk format is ARPA (log10); memory is natural log.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyCorpus, InvalidOrder, MalformedArpa

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

FORWARD = "forward"
BACKWARD = "backward"

LN10 = math.log(10.0)
# ARPA convention for "context-only" entries that carry a backoff weight but
# no meaningful probability of their own.
_ARPA_DUMMY_LOG10 = -99.0

Context = tuple[str, ...]


def _tokenize_corpus(corpus: Iterable[Sequence[str] | str]) -> list[list[str]]:
    lines = []
    for entry in corpus:
        tokens = entry.split() if isinstance(entry, str) else list(entry)
        if tokens:
            lines.append(tokens)
    if not lines:
        raise EmptyCorpus("no non-empty lines in training corpus")
    return lines


def _count_all_orders(
    lines: list[list[str]], order: int, vocab: set[str]
) -> list[dict[Context, Counter]]:
    """counts[k-1][ctx][w] over events (words and EOS, never BOS)."""
    counts: list[dict[Context, Counter]] = [{} for _ in range(order)]
    pad = [BOS] * (order - 1)
    for words in lines:
        mapped = [w if w in vocab else UNK for w in words]
        seq = pad + mapped + [EOS]
        for pos in range(order - 1, len(seq)):
            w = seq[pos]
            for k in range(1, order + 1):
                ctx = tuple(seq[pos - k + 1 : pos])
                counts[k - 1].setdefault(ctx, Counter())[w] += 1
    return counts


@dataclass(frozen=True)
class UnigramTable:
    """Word -> unigram probability over the real words of a corpus."""

    probs: dict[str, float]
    total_tokens: int

    def get(self, word: str) -> float:
        return self.probs.get(word, 0.0)


def unigram_table(corpus: Iterable[Sequence[str] | str]) -> UnigramTable:
    lines = _tokenize_corpus(corpus)
    counts: Counter = Counter()
    for words in lines:
        counts.update(words)
    total = sum(counts.values())
    return UnigramTable(
        probs={w: c / total for w, c in counts.items()}, total_tokens=total
    )


def save_unigrams(table: UnigramTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# total_tokens\t{table.total_tokens}\n")
        for word in sorted(table.probs):
            fh.write(f"{word}\t{table.probs[word]:.17g}\n")


def load_unigrams(path) -> UnigramTable:
    probs: dict[str, float] = {}
    total = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# total_tokens\t"):
                total = int(line.split("\t")[1])
                continue
            word, val = line.split("\t")
            probs[word] = float(val)
    return UnigramTable(probs=probs, total_tokens=total)


class _NgramBase:
    """Shared context handling for both model flavors."""

    order: int
    direction: str
    vocab: frozenset[str]

    @property
    def predictable(self) -> tuple[str, ...]:
        """The event space of every conditional (vocab minus the start symbol)."""
        return tuple(sorted(self.vocab - {BOS}))

    def _map(self, word: str) -> str:
        return word if word in self.vocab else UNK

    def _prep_context(self, context: Sequence[str]) -> Context:
        ctx = tuple(self._map(w) for w in context)
        if len(ctx) > self.order - 1:
            ctx = ctx[len(ctx) - (self.order - 1) :]
        return ctx


@dataclass(frozen=True)
class NGramModel(_NgramBase):
    """Backoff-form n-gram model (Kneser-Ney trained or ARPA loaded).

    probs[k] maps a length-k context to word -> natural log probability;
    backoffs[k] maps a length-k context to its natural log backoff weight.
    A query walks down the orders, adding backoff weights until it hits an
    explicit entry; every predictable word has an explicit unigram entry, so
    the walk always terminates with a finite value.
    """

    order: int
    direction: str
    vocab: frozenset[str]
    probs: tuple[dict[Context, dict[str, float]], ...]
    backoffs: tuple[dict[Context, float], ...]
    smoothing: str = "kneser_ney"

    def cond_logprob(self, word: str, context: Sequence[str] = ()) -> float:
        w = self._map(word)
        ctx = self._prep_context(context)
        acc = 0.0
        while True:
            table = self.probs[len(ctx)].get(ctx)
            if table is not None and w in table:
                return acc + table[w]
            if not ctx:
                # Closed vocabulary: every predictable word has a unigram
                # entry, so only non-events (e.g. the start symbol) land here.
                return acc + _ARPA_DUMMY_LOG10 * LN10
            acc += self.backoffs[len(ctx)].get(ctx, 0.0)
            ctx = ctx[1:]


@dataclass(frozen=True)
class AddKNgramModel(_NgramBase):
    """Additively smoothed model answering queries straight from counts.

    With k > 0 every conditional is defined at the full context length.
    With k = 0 (exact MLE) an unseen context falls back to shorter ones and
    an unseen event in a seen context has probability zero (log -inf).
    """

    order: int
    direction: str
    vocab: frozenset[str]
    k: float
    counts: tuple[dict[Context, Counter], ...]
    totals: tuple[dict[Context, int], ...] = field(default=())
    smoothing: str = "add_k"

    def cond_logprob(self, word: str, context: Sequence[str] = ()) -> float:
        w = self._map(word)
        ctx = self._prep_context(context)
        n_events = len(self.predictable)
        for start in range(len(ctx) + 1):
            sub = ctx[start:]
            total = self.totals[len(sub)].get(sub, 0)
            if self.k > 0:
                count = self.counts[len(sub)].get(sub, Counter()).get(w, 0)
                return math.log((count + self.k) / (total + self.k * n_events))
            if total > 0:
                count = self.counts[len(sub)].get(sub, Counter()).get(w, 0)
                return math.log(count / total) if count else -math.inf
        raise AssertionError("empty-context total cannot be zero for a trained model")


NgramLike = NGramModel | AddKNgramModel


def conditional_distribution(model: NgramLike, context: Sequence[str] = ()) -> dict[str, float]:
    """Full conditional distribution (linear probabilities) over the event space."""
    return {w: math.exp(model.cond_logprob(w, context)) for w in model.predictable}


def _discount(values: Iterable[int]) -> float:
    n1 = n2 = 0
    for v in values:
        if v == 1:
            n1 += 1
        elif v == 2:
            n2 += 1
    if n1 == 0 or n2 == 0:
        return 0.5
    return n1 / (n1 + 2.0 * n2)


def _continuation_counts(
    raw_higher: dict[Context, Counter], raw_same: dict[Context, Counter]
) -> dict[Context, Counter]:
    """Type counts of distinct left-extensions; BOS-initial contexts keep raw counts."""
    adj: dict[Context, Counter] = {}
    for ctx, words in raw_higher.items():
        suffix = ctx[1:]
        target = adj.setdefault(suffix, Counter())
        for w in words:
            target[w] += 1
    for ctx, words in raw_same.items():
        if ctx and ctx[0] == BOS:
            adj[ctx] = Counter(words)
    return adj


def _build_kneser_ney(
    counts: list[dict[Context, Counter]],
    order: int,
    direction: str,
    vocab: frozenset[str],
) -> NGramModel:
    predictable = sorted(vocab - {BOS})
    n_events = len(predictable)

    # Adjusted (continuation) counts for every level below the top.
    adjusted: list[dict[Context, Counter]] = [dict() for _ in range(order)]
    adjusted[order - 1] = counts[order - 1]
    for k in range(order - 1, 0, -1):
        adjusted[k - 1] = _continuation_counts(adjusted[k], counts[k - 1])

    discounts = [
        _discount(c for table in adjusted[k].values() for c in table.values())
        for k in range(order)
    ]

    probs: list[dict[Context, dict[str, float]]] = [dict() for _ in range(order)]
    backoffs: list[dict[Context, float]] = [dict() for _ in range(order)]

    # Level 1: explicit entries for the whole event space, uniform floor folded in.
    uni = adjusted[0].get((), Counter())
    total = sum(uni.values())
    d = discounts[0]
    gamma = d * len(uni) / total
    probs[0][()] = {
        w: math.log(max(uni.get(w, 0) - d, 0.0) / total + gamma / n_events)
        for w in predictable
    }

    def resolve(w: str, ctx: Context) -> float:
        acc = 0.0
        while True:
            table = probs[len(ctx)].get(ctx)
            if table is not None and w in table:
                return acc + table[w]
            acc += backoffs[len(ctx)].get(ctx, 0.0)
            ctx = ctx[1:]

    for k in range(2, order + 1):
        d = discounts[k - 1]
        for ctx, words in adjusted[k - 1].items():
            if len(ctx) != k - 1:
                continue
            ctx_total = sum(words.values())
            gamma = d * len(words) / ctx_total
            backoffs[k - 1][ctx] = math.log(gamma)
            table = {}
            for w, c in words.items():
                lower = math.exp(resolve(w, ctx[1:]))
                table[w] = math.log(max(c - d, 0.0) / ctx_total + gamma * lower)
            probs[k - 1][ctx] = table

    return NGramModel(
        order=order,
        direction=direction,
        vocab=vocab,
        probs=tuple(probs),
        backoffs=tuple(backoffs),
    )


def train(
    corpus: Iterable[Sequence[str] | str],
    order: int,
    direction: str = FORWARD,
    smoothing: str = "kneser_ney",
    k: float = 0.0,
    min_count: int = 2,
) -> NgramLike:
    """Train a smoothed n-gram model.

    ``smoothing`` is "kneser_ney" or "add_k" (with the additive constant
    ``k``).  Words occurring fewer than ``min_count`` times map to the
    unknown symbol.  ``direction=backward`` reverses every line before
    counting.
    """
    if order < 1:
        raise InvalidOrder(f"order must be >= 1, got {order}")
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"unknown direction {direction!r}")
    if smoothing not in ("kneser_ney", "add_k"):
        raise ValueError(f"unknown smoothing {smoothing!r}")

    lines = _tokenize_corpus(corpus)
    if direction == BACKWARD:
        lines = [list(reversed(words)) for words in lines]

    word_counts: Counter = Counter()
    for words in lines:
        word_counts.update(words)
    vocab = frozenset(
        {w for w, c in word_counts.items() if c >= min_count} | {BOS, EOS, UNK}
    )

    counts = _count_all_orders(lines, order, set(vocab))

    if smoothing == "add_k":
        totals = tuple(
            {ctx: sum(words.values()) for ctx, words in level.items()}
            for level in counts
        )
        return AddKNgramModel(
            order=order,
            direction=direction,
            vocab=vocab,
            k=float(k),
            counts=tuple({ctx: Counter(w) for ctx, w in level.items()} for level in counts),
            totals=totals,
        )
    return _build_kneser_ney(counts, order, direction, vocab)


def _materialize(model: AddKNgramModel, max_entries: int = 5_000_000) -> NGramModel:
    """Expand an add-k model into explicit backoff-free tables."""
    if model.k <= 0:
        raise ValueError(
            "exact MLE (k=0) assigns zero probabilities and cannot be written "
            "as a backoff ARPA model"
        )
    predictable = model.predictable
    context_words = sorted(model.vocab)

    n_contexts = sum(len(context_words) ** j for j in range(model.order))
    if n_contexts * len(predictable) > max_entries:
        raise ValueError(
            f"materializing this add-k model needs {n_contexts * len(predictable)} "
            f"entries (> {max_entries}); train with kneser_ney instead"
        )

    probs: list[dict[Context, dict[str, float]]] = [dict() for _ in range(model.order)]
    backoffs: list[dict[Context, float]] = [dict() for _ in range(model.order)]

    def contexts_of(length: int):
        if length == 0:
            yield ()
            return
        for prefix in contexts_of(length - 1):
            for w in context_words:
                yield prefix + (w,)

    for length in range(model.order):
        for ctx in contexts_of(length):
            probs[length][ctx] = {
                w: model.cond_logprob(w, ctx) for w in predictable
            }
    return NGramModel(
        order=model.order,
        direction=model.direction,
        vocab=model.vocab,
        probs=tuple(probs),
        backoffs=tuple(backoffs),
        smoothing="add_k",
    )


def save_arpa(model: NgramLike, path) -> None:
    """Write the standard ARPA text format (log10 on disk)."""
    if isinstance(model, AddKNgramModel):
        model = _materialize(model)

    # Every context that carries a backoff weight needs a line at its own
    # order; emit dummy-probability lines for the ones that are not events.
    entries: list[dict[Context, float]] = [dict() for _ in range(model.order)]
    for k in range(model.order):
        for ctx, table in model.probs[k].items():
            for w, lp in table.items():
                entries[k][ctx + (w,)] = lp / LN10
    for k in range(1, model.order):
        for ctx in model.backoffs[k]:
            entries[k - 1].setdefault(ctx, _ARPA_DUMMY_LOG10)

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# nbrescore ngram model: direction={model.direction}\n\n")
        fh.write("\\data\\\n")
        for k in range(model.order):
            fh.write(f"ngram {k + 1}={len(entries[k])}\n")
        for k in range(model.order):
            fh.write(f"\n\\{k + 1}-grams:\n")
            for gram in sorted(entries[k]):
                lp10 = entries[k][gram]
                line = f"{lp10:.10g}\t{' '.join(gram)}"
                if k + 1 < model.order and gram in model.backoffs[k + 1]:
                    line += f"\t{model.backoffs[k + 1][gram] / LN10:.10g}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def load_arpa(path, direction: str | None = None) -> NGramModel:
    """Read an ARPA file back into a backoff model (natural log in memory)."""
    path = Path(path)
    header_direction = FORWARD
    declared: dict[int, int] = {}

    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    pos = 0
    while pos < len(lines) and lines[pos].strip() != "\\data\\":
        if lines[pos].startswith("#") and "direction=" in lines[pos]:
            header_direction = lines[pos].split("direction=")[1].strip()
        pos += 1
    if pos == len(lines):
        raise MalformedArpa(f"{path}: no \\data\\ section")
    pos += 1

    while pos < len(lines):
        line = lines[pos].strip()
        if not line:
            pos += 1
            continue
        if not line.startswith("ngram"):
            break
        try:
            lhs, rhs = line.split("=")
            declared[int(lhs.split()[1])] = int(rhs)
        except (ValueError, IndexError) as exc:
            raise MalformedArpa(f"{path}: bad count line {line!r}") from exc
        pos += 1
    if not declared or sorted(declared) != list(range(1, max(declared) + 1)):
        raise MalformedArpa(f"{path}: missing or non-contiguous ngram counts")

    order = max(declared)
    probs: list[dict[Context, dict[str, float]]] = [dict() for _ in range(order)]
    backoffs: list[dict[Context, float]] = [dict() for _ in range(order)]

    for k in range(1, order + 1):
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos == len(lines) or lines[pos].strip() != f"\\{k}-grams:":
            raise MalformedArpa(f"{path}: expected \\{k}-grams: section")
        pos += 1
        n_read = 0
        while pos < len(lines):
            line = lines[pos].strip()
            if not line or line.startswith("\\"):
                break
            parts = line.split()
            if len(parts) == k + 1:
                lp10, gram, bow10 = parts[0], tuple(parts[1:]), None
            elif len(parts) == k + 2:
                lp10, gram, bow10 = parts[0], tuple(parts[1 : k + 1]), parts[-1]
            else:
                raise MalformedArpa(f"{path}: bad {k}-gram line {line!r}")
            try:
                lp = float(lp10) * LN10
                bow = float(bow10) * LN10 if bow10 is not None else None
            except ValueError as exc:
                raise MalformedArpa(f"{path}: non-numeric value in {line!r}") from exc
            probs[k - 1].setdefault(gram[:-1], {})[gram[-1]] = lp
            if bow is not None:
                if k == order:
                    raise MalformedArpa(f"{path}: backoff weight on top-order gram")
                backoffs[k][gram] = bow
            n_read += 1
            pos += 1
        if n_read != declared[k]:
            raise MalformedArpa(
                f"{path}: \\data\\ declares {declared[k]} {k}-grams, found {n_read}"
            )

    while pos < len(lines) and lines[pos].strip() != "\\end\\":
        if lines[pos].strip():
            raise MalformedArpa(f"{path}: unexpected content before \\end\\")
        pos += 1
    if pos == len(lines):
        raise MalformedArpa(f"{path}: missing \\end\\")

    vocab = frozenset(w for w in probs[0].get((), {})) | {BOS, EOS, UNK}
    return NGramModel(
        order=order,
        direction=direction or header_direction,
        vocab=frozenset(vocab),
        probs=tuple(probs),
        backoffs=tuple(backoffs),
        smoothing="arpa",
    )
