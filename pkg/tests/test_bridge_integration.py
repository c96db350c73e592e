"""Cross-language checks against the TypeScript bridge, when it is built.

The primary suite never requires these; they skip unless node and the
compiled bridge are present.
"""

import json
import shutil
from pathlib import Path

import pytest

from nbrescore import protocol
from nbrescore.cli import main
from nbrescore.scoring import ExternalScorer, ScoreRequest, score_causal, score_masked_pll

BRIDGE_MAIN = Path(__file__).resolve().parent.parent / "bridge" / "dist" / "main.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not BRIDGE_MAIN.is_file(),
    reason="node or built bridge unavailable",
)


@pytest.fixture()
def client():
    c = protocol.connect_stdio(["node", str(BRIDGE_MAIN)], timeout_s=30)
    yield c
    c.close()


def test_handshake_capabilities(client):
    caps = client.capabilities
    assert caps.modes == frozenset({"causal", "masked"})
    assert caps.name == "bridge:builtin-tiny"
    assert caps.provenance == "scratch"
    assert caps.max_window is not None


def test_masked_and_causal_scoring(client):
    scorer = ExternalScorer(client, "masked")
    req = ScoreRequest(("hello", "world"), ("hi",), ("there",))
    masked = score_masked_pll(scorer, req)
    assert masked < 0.0
    assert score_masked_pll(scorer, req) == masked  # deterministic

    causal_scorer = ExternalScorer(client, "causal")
    with_right = score_causal(causal_scorer, req)
    without_right = score_causal(
        causal_scorer, ScoreRequest(("hello", "world"), ("hi",), ())
    )
    assert with_right == without_right


def test_pipelined_out_of_order_resolution(client):
    futures = [
        client.submit(ScoreRequest((w,), (), ()), "masked")
        for w in ("aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh")
    ]
    values = [f.result(timeout=30) for f in futures]
    assert all(isinstance(v, float) for v in values)
    again = [
        client.submit(ScoreRequest((w,), (), ()), "masked")
        for w in ("aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh")
    ]
    assert [f.result(timeout=30) for f in again] == values


def test_error_frames_propagate(client):
    caps = client.capabilities
    too_big = ScoreRequest(tuple(f"w{i}" for i in range(caps.max_window + 1)))
    with pytest.raises(protocol.ProtocolError):
        client.submit(too_big, "masked")


def test_cli_rescore_through_bridge(tmp_path):
    nbest = tmp_path / "nbest.jsonl"
    rows = [
        {
            "utterance_id": f"u{i}",
            "session_id": "s0",
            "index": i,
            "hypotheses": [
                {"tokens": ["hello", "world"], "am_score": -1.0},
                {"tokens": ["yellow", "word"], "am_score": -1.1},
            ],
        }
        for i in range(3)
    ]
    nbest.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    out = tmp_path / "res.jsonl"
    code = main(
        [
            "rescore", "--nbest", str(nbest), "--lambda", "0.5",
            "--context", "--left", "10", "--right", "5",
            "--scorer", "external",
            "--scorer-cmd", f"node {BRIDGE_MAIN}",
            "--scorer-mode", "masked",
            "--out", str(out),
        ]
    )
    assert code == 0
    results = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(results) == 3
    assert all(len(r["lm_scores"]) == 2 for r in results)
