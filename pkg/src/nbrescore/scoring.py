"""Hypothesis scoring: causal log-likelihood and masked pseudo-log-likelihood.

A scorer backend exposes ``modes`` (subset of {"causal", "masked"}), an
optional ``max_window``, and ``score(request, mode)``.  The built-in n-gram
backends insert their own sentence start/end symbols once around the full
augmented sequence (left context + hypothesis + right context) and never
score context positions.  An empty hypothesis scores 0 by definition (the
empty product), regardless of backend.

The bidirectional backend realizes each masked conditional as the
renormalized product of a forward and a backward n-gram prediction, which is
an exact, enumerable distribution over the shared event space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

from .errors import BackendError
from .ngram import BOS, EOS, UNK, NgramLike

CAUSAL = "causal"
MASKED = "masked"

KIND_CAUSAL_NGRAM = "causal_ngram"
KIND_BIDIRECTIONAL_NGRAM = "bidirectional_ngram"
KIND_EXTERNAL = "external"

PROVENANCES = ("scratch", "pretrained", "finetuned")


@dataclass(frozen=True)
class ScoreRequest:
    """A hypothesis to score plus conditioning-only context windows."""

    tokens: tuple[str, ...]
    left_context: tuple[str, ...] = ()
    right_context: tuple[str, ...] = ()

    def total_length(self) -> int:
        return len(self.tokens) + len(self.left_context) + len(self.right_context)


@dataclass(frozen=True)
class ScorerConfig:
    """How to build a scorer; provenance is report metadata only."""

    kind: str
    provenance: str = "scratch"
    forward_path: str | None = None
    backward_path: str | None = None
    command: str | None = None
    tcp_addr: str | None = None
    mode: str = MASKED
    max_inflight: int = 32
    timeout_s: float = 60.0

    def __post_init__(self):
        if self.kind not in (KIND_CAUSAL_NGRAM, KIND_BIDIRECTIONAL_NGRAM, KIND_EXTERNAL):
            raise ValueError(f"unknown scorer kind {self.kind!r}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.kind == KIND_BIDIRECTIONAL_NGRAM and not (
            self.forward_path and self.backward_path
        ):
            raise ValueError("bidirectional_ngram needs forward and backward models")


@runtime_checkable
class Scorer(Protocol):
    name: str
    provenance: str
    modes: frozenset[str]
    max_window: int | None

    def score(self, request: ScoreRequest, mode: str) -> float: ...

    def score_hypothesis(
        self,
        tokens: Sequence[str],
        left_context: Sequence[str] = (),
        right_context: Sequence[str] = (),
    ) -> float: ...


def truncate_context(
    left: Sequence[str],
    right: Sequence[str],
    left_budget: int,
    right_budget: int,
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Keep the most recent ``left_budget`` left tokens and the soonest
    ``right_budget`` right tokens."""
    if left_budget < 0 or right_budget < 0:
        raise ValueError("context budgets must be >= 0")
    left = tuple(left)
    right = tuple(right)
    kept_left = left[len(left) - left_budget :] if left_budget else ()
    kept_right = right[:right_budget] if right_budget else ()
    return kept_left, kept_right


def masked_conditional(
    fwd: NgramLike,
    bwd: NgramLike,
    position: int,
    tokens: Sequence[str],
    left_context: Sequence[str] = (),
    right_context: Sequence[str] = (),
) -> dict[str, float]:
    """Distribution over the event space for the token at ``position``,
    proportional to P_fwd(v | words before) * P_bwd(v | words after)."""
    if fwd.vocab != bwd.vocab:
        raise ValueError("forward and backward models must share a vocabulary")
    if not 0 <= position < len(tokens):
        raise ValueError(f"position {position} outside hypothesis of {len(tokens)} tokens")

    ctx_fwd = (
        (BOS,) * (fwd.order - 1) + tuple(left_context) + tuple(tokens[:position])
    )
    future = tuple(tokens[position + 1 :]) + tuple(right_context)
    ctx_bwd = (BOS,) * (bwd.order - 1) + tuple(reversed(future))

    support = fwd.predictable
    weights = [
        math.exp(fwd.cond_logprob(v, ctx_fwd) + bwd.cond_logprob(v, ctx_bwd))
        for v in support
    ]
    total = sum(weights)
    if total <= 0.0:
        raise BackendError(
            "masked conditional has zero total mass; use smoothed models"
        )
    return {v: w / total for v, w in zip(support, weights)}


class CausalNgramScorer:
    """Chain-rule scorer over a forward n-gram model.

    The score of a hypothesis is the sum of next-word conditionals over its
    tokens plus the end-symbol term conditioned on left context and the
    hypothesis only, so scores never depend on the right context.
    """

    kind = KIND_CAUSAL_NGRAM
    modes = frozenset({CAUSAL})
    max_window: int | None = None

    def __init__(self, model: NgramLike, provenance: str = "scratch", name: str = "causal-ngram"):
        if model.direction != "forward":
            raise ValueError("causal scoring needs a forward-direction model")
        self.model = model
        self.provenance = provenance
        self.name = name

    def score(self, request: ScoreRequest, mode: str = CAUSAL) -> float:
        if mode != CAUSAL:
            raise BackendError(f"{self.name} does not support mode {mode!r}")
        if not request.tokens:
            return 0.0
        model = self.model
        history = [BOS] * (model.order - 1) + list(request.left_context)
        total = 0.0
        for word in request.tokens:
            total += model.cond_logprob(word, history)
            history.append(word)
        # Models without an end symbol (hand-built tables) skip the boundary term.
        if EOS in model.vocab:
            total += model.cond_logprob(EOS, history)
        return total

    def score_hypothesis(self, tokens, left_context=(), right_context=()) -> float:
        return self.score(
            ScoreRequest(tuple(tokens), tuple(left_context), tuple(right_context))
        )


class BidirectionalNgramScorer:
    """Masked pseudo-log-likelihood over a forward/backward n-gram pair."""

    kind = KIND_BIDIRECTIONAL_NGRAM
    modes = frozenset({MASKED})
    max_window: int | None = None

    def __init__(
        self,
        forward: NgramLike,
        backward: NgramLike,
        provenance: str = "scratch",
        name: str = "bidirectional-ngram",
    ):
        if forward.direction != "forward" or backward.direction != "backward":
            raise ValueError("scorer needs one forward and one backward model")
        if forward.vocab != backward.vocab:
            raise ValueError("forward and backward models must share a vocabulary")
        self.forward = forward
        self.backward = backward
        self.provenance = provenance
        self.name = name

    def score(self, request: ScoreRequest, mode: str = MASKED) -> float:
        if mode != MASKED:
            raise BackendError(f"{self.name} does not support mode {mode!r}")
        tokens = request.tokens
        if not tokens:
            return 0.0
        total = 0.0
        for t in range(len(tokens)):
            dist = masked_conditional(
                self.forward,
                self.backward,
                t,
                tokens,
                request.left_context,
                request.right_context,
            )
            word = tokens[t] if tokens[t] in self.forward.vocab else UNK
            prob = dist.get(word)
            if prob is None:
                raise BackendError(
                    f"{word!r} is outside the scorer's event space"
                )
            total += math.log(prob)
        return total

    def score_hypothesis(self, tokens, left_context=(), right_context=()) -> float:
        return self.score(
            ScoreRequest(tuple(tokens), tuple(left_context), tuple(right_context))
        )


class ExternalScorer:
    """Adapter from the wire-protocol client to the scorer interface."""

    kind = KIND_EXTERNAL

    def __init__(self, client, mode: str):
        caps = client.capabilities
        if caps is None:
            raise BackendError("client has not completed the handshake")
        if mode not in caps.modes:
            raise BackendError(f"backend {caps.name!r} does not support mode {mode!r}")
        self.client = client
        self.mode = mode
        self.modes = frozenset(caps.modes)
        self.max_window = caps.max_window
        self.name = caps.name
        self.provenance = caps.provenance

    def score(self, request: ScoreRequest, mode: str) -> float:
        if mode not in self.modes:
            raise BackendError(f"{self.name} does not support mode {mode!r}")
        if not request.tokens:
            return 0.0
        return self.client.score(request, mode)

    def score_hypothesis(self, tokens, left_context=(), right_context=()) -> float:
        return self.score(
            ScoreRequest(tuple(tokens), tuple(left_context), tuple(right_context)),
            self.mode,
        )


def score_causal(backend, request: ScoreRequest) -> float:
    """Eq.-style causal log-likelihood; right context is ignored by definition."""
    if CAUSAL not in backend.modes:
        raise BackendError(f"backend {backend.name!r} is not causal-capable")
    if not request.tokens:
        return 0.0
    return backend.score(request, CAUSAL)


def score_masked_pll(backend, request: ScoreRequest) -> float:
    """Masked pseudo-log-likelihood: one masked evaluation per hypothesis token."""
    if MASKED not in backend.modes:
        raise BackendError(f"backend {backend.name!r} is not bidirectional-capable")
    if not request.tokens:
        return 0.0
    return backend.score(request, MASKED)
