"""Domain types for N-best hypothesis lists and their file formats.

The on-disk N-best format is JSON-lines, one utterance per line::

    {"utterance_id": "u1", "session_id": "s1", "index": 0,
     "hypotheses": [{"tokens": ["hi", "there"], "am_score": -12.3}, ...]}

Hypothesis rank is positional (first entry is the ASR 1-best).  Reference
transcripts live in a separate tab-separated file: ``utterance_id<TAB>words``.

Everything in this module is immutable after load; parsers never repair
invalid input, they raise.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateUtterance, NonContiguousIndex, ParseError


@dataclass(frozen=True)
class Hypothesis:
    """One N-best entry: surface tokens plus the ASR model's log score."""

    tokens: tuple[str, ...]
    am_score: float
    rank: int

    @property
    def is_empty(self) -> bool:
        return len(self.tokens) == 0


@dataclass(frozen=True)
class NBestList:
    utterance_id: str
    hypotheses: tuple[Hypothesis, ...]

    def __len__(self) -> int:
        return len(self.hypotheses)

    @property
    def one_best(self) -> Hypothesis:
        return self.hypotheses[0]


@dataclass(frozen=True)
class Utterance:
    utterance_id: str
    session_id: str
    index_in_session: int
    nbest: NBestList
    reference: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Session:
    """All utterances of one conversation side, in temporal order."""

    session_id: str
    utterances: tuple[Utterance, ...]

    def __len__(self) -> int:
        return len(self.utterances)


def _parse_record(path, line_no: int, line: str, n_max: int | None) -> Utterance:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ParseError(path, line_no, "record is not a JSON object")
    try:
        utt_id = obj["utterance_id"]
        sess_id = obj["session_id"]
        index = obj["index"]
        raw_hyps = obj["hypotheses"]
    except KeyError as exc:
        raise ParseError(path, line_no, f"missing field {exc.args[0]!r}") from exc
    if not isinstance(utt_id, str) or not isinstance(sess_id, str):
        raise ParseError(path, line_no, "utterance_id and session_id must be strings")
    if not isinstance(index, int) or isinstance(index, bool) or index < 0:
        raise ParseError(path, line_no, "index must be a nonnegative integer")
    if not isinstance(raw_hyps, list) or not raw_hyps:
        raise ParseError(path, line_no, "hypotheses must be a non-empty list")
    if n_max is not None and len(raw_hyps) > n_max:
        raise ParseError(path, line_no, f"{len(raw_hyps)} hypotheses exceed n_max={n_max}")

    hyps = []
    for rank, h in enumerate(raw_hyps):
        if not isinstance(h, dict) or "tokens" not in h or "am_score" not in h:
            raise ParseError(path, line_no, f"hypothesis {rank} needs tokens and am_score")
        tokens = h["tokens"]
        if not isinstance(tokens, list) or any(not isinstance(t, str) for t in tokens):
            raise ParseError(path, line_no, f"hypothesis {rank} tokens must be a list of strings")
        try:
            am = float(h["am_score"])
        except (TypeError, ValueError) as exc:
            raise ParseError(path, line_no, f"hypothesis {rank} am_score is not a number") from exc
        if not math.isfinite(am):
            raise ParseError(path, line_no, f"hypothesis {rank} am_score is not finite")
        hyps.append(Hypothesis(tokens=tuple(tokens), am_score=am, rank=rank))

    return Utterance(
        utterance_id=utt_id,
        session_id=sess_id,
        index_in_session=index,
        nbest=NBestList(utterance_id=utt_id, hypotheses=tuple(hyps)),
    )


def load_nbest(path, n_max: int | None = None) -> list[Session]:
    """Load a JSON-lines N-best file into sessions sorted by session_id.

    Raises ParseError on malformed lines, DuplicateUtterance on repeated
    (session_id, index) or utterance_id keys, NonContiguousIndex when a
    session's indices are not exactly 0..n-1.  Emits a warning when a list's
    am_scores are not non-increasing with rank, since the rank-0-is-baseline
    assumption then no longer follows from the scores.
    """
    path = Path(path)
    seen_keys: set[tuple[str, int]] = set()
    seen_ids: set[str] = set()
    by_session: dict[str, list[Utterance]] = {}
    rank_order_ok = True

    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            utt = _parse_record(path, line_no, line, n_max)
            key = (utt.session_id, utt.index_in_session)
            if key in seen_keys:
                raise DuplicateUtterance(f"duplicate (session, index) {key}")
            if utt.utterance_id in seen_ids:
                raise DuplicateUtterance(f"duplicate utterance_id {utt.utterance_id!r}")
            seen_keys.add(key)
            seen_ids.add(utt.utterance_id)
            by_session.setdefault(utt.session_id, []).append(utt)
            scores = [h.am_score for h in utt.nbest.hypotheses]
            if any(a < b for a, b in zip(scores, scores[1:])):
                rank_order_ok = False

    if not rank_order_ok:
        warnings.warn(
            "N-best ranks are not ordered by am_score; rank 0 is still treated "
            "as the baseline 1-best",
            stacklevel=2,
        )

    sessions = []
    for sess_id in sorted(by_session):
        utts = sorted(by_session[sess_id], key=lambda u: u.index_in_session)
        indices = [u.index_in_session for u in utts]
        if indices != list(range(len(utts))):
            raise NonContiguousIndex(
                f"session {sess_id!r} has indices {indices}, expected 0..{len(utts) - 1}"
            )
        sessions.append(Session(session_id=sess_id, utterances=tuple(utts)))
    return sessions


def save_nbest(sessions: Iterable[Session], path) -> None:
    """Write sessions back to the canonical JSON-lines form (UTF-8, \\n)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for session in sessions:
            for utt in session.utterances:
                obj = {
                    "utterance_id": utt.utterance_id,
                    "session_id": utt.session_id,
                    "index": utt.index_in_session,
                    "hypotheses": [
                        {"tokens": list(h.tokens), "am_score": h.am_score}
                        for h in utt.nbest.hypotheses
                    ],
                }
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_references(path) -> dict[str, tuple[str, ...]]:
    """Load ``utterance_id<TAB>space-separated-words`` lines.

    Empty references (nothing after the tab) are permitted.
    """
    path = Path(path)
    refs: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ParseError(path, line_no, "expected utterance_id<TAB>words")
            utt_id, text = line.split("\t", 1)
            if not utt_id:
                raise ParseError(path, line_no, "empty utterance_id")
            if utt_id in refs:
                raise DuplicateUtterance(f"duplicate utterance_id {utt_id!r}")
            refs[utt_id] = tuple(text.split())
    return refs


def save_references(refs: Mapping[str, Sequence[str]], path) -> None:
    """Write the tab-separated transcript format (also used for 1-best files)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for utt_id, words in refs.items():
            fh.write(f"{utt_id}\t{' '.join(words)}\n")


def attach_references(
    sessions: Iterable[Session],
    refs: Mapping[str, Sequence[str]],
    require_all: bool = False,
) -> list[Session]:
    """Return new sessions with Utterance.reference filled from ``refs``."""
    from .errors import MissingReference

    out = []
    for session in sessions:
        utts = []
        for utt in session.utterances:
            if utt.utterance_id in refs:
                utts.append(replace(utt, reference=tuple(refs[utt.utterance_id])))
            elif require_all:
                raise MissingReference(f"no reference for {utt.utterance_id!r}")
            else:
                utts.append(utt)
        out.append(Session(session_id=session.session_id, utterances=tuple(utts)))
    return out
