import json

import pytest

from nbrescore import ngram
from nbrescore.cli import main
from nbrescore.nbest import load_nbest, load_references


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic corpus + trained LMs shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["synth", "--out-dir", str(data), "--sessions", "6",
                 "--utterances", "8", "--seed", "11"]) == 0
    lm_dir = root / "lm"
    assert main(["train-lm", "--corpus", str(data / "corpus.txt"),
                 "--out-dir", str(lm_dir), "--order", "3", "--min-count", "1"]) == 0
    return root


def scorer_flags(workspace):
    return ["--scorer", "causal-ngram", "--lm", str(workspace / "lm" / "lm.fwd.arpa")]


def test_synth_outputs_exist_and_load(workspace):
    data = workspace / "data"
    sessions = load_nbest(data / "nbest.jsonl")
    refs = load_references(data / "refs.tsv")
    assert sum(len(s) for s in sessions) == 48
    assert set(refs) == {
        u.utterance_id for s in sessions for u in s.utterances
    }
    assert (data / "corpus.txt").read_text().strip()


def test_train_lm_emits_loadable_models(workspace):
    lm_dir = workspace / "lm"
    fwd = ngram.load_arpa(lm_dir / "lm.fwd.arpa")
    bwd = ngram.load_arpa(lm_dir / "lm.bwd.arpa")
    assert fwd.order == 3 and fwd.direction == "forward"
    assert bwd.direction == "backward"
    assert "\\3-grams:" in (lm_dir / "lm.fwd.arpa").read_text()
    table = ngram.load_unigrams(lm_dir / "unigrams.tsv")
    assert abs(sum(table.probs.values()) - 1.0) < 1e-9


def test_train_lm_missing_corpus_fails_before_output(tmp_path):
    out_dir = tmp_path / "never"
    code = main(["train-lm", "--corpus", str(tmp_path / "nope.txt"),
                 "--out-dir", str(out_dir)])
    assert code == 2
    assert not out_dir.exists()


def test_sweep_report_and_lambda_zero_matches_eval(workspace, tmp_path, capsys):
    data = workspace / "data"
    out = tmp_path / "sweep"
    assert main(["sweep", "--nbest", f"syn={data / 'nbest.jsonl'}",
                 "--refs", str(data / "refs.tsv"),
                 "--out", str(out), *scorer_flags(workspace)]) == 0
    report = json.loads((tmp_path / "sweep.json").read_text())
    assert len(report["grid"]) == 21
    assert report["sets"] == ["syn"]
    assert report["best_lambda"] in report["grid"]
    assert min(report["avg_wer"]) <= report["avg_wer"][0]

    # baseline 1-best via rescore at lambda 0, then eval: must equal row 0
    onebest = tmp_path / "baseline.tsv"
    assert main(["rescore", "--nbest", str(data / "nbest.jsonl"),
                 "--lambda", "0.0", "--out", str(tmp_path / "r0.jsonl"),
                 "--out-text", str(onebest), *scorer_flags(workspace)]) == 0
    evaljson = tmp_path / "eval.json"
    assert main(["eval", "--hyp", str(onebest), "--refs", str(data / "refs.tsv"),
                 "--out", str(evaljson)]) == 0
    wer = json.loads(evaljson.read_text())["wer"]
    assert wer == report["wer"]["syn"][0]

    tsv = (tmp_path / "sweep.tsv").read_text().splitlines()
    assert tsv[0] == "lambda\tsyn\tavg"
    assert len(tsv) == 22


def test_sweep_two_sets_reports_average(workspace, tmp_path):
    data = workspace / "data"
    out = tmp_path / "two"
    assert main(["sweep", "--nbest", f"a={data / 'nbest.jsonl'}",
                 "--nbest", f"b={data / 'nbest.jsonl'}",
                 "--refs", str(data / "refs.tsv"),
                 "--grid", "0.0,0.5,1.0",
                 "--out", str(out), *scorer_flags(workspace)]) == 0
    report = json.loads((tmp_path / "two.json").read_text())
    assert report["sets"] == ["a", "b"]
    assert report["avg_wer"] == report["wer"]["a"]  # identical sets average to themselves
    assert len(report["grid"]) == 3


def test_rescore_context_budget_zero_equals_plain(workspace, tmp_path):
    data = workspace / "data"
    plain = tmp_path / "plain.jsonl"
    ctx0 = tmp_path / "ctx0.jsonl"
    base = ["rescore", "--nbest", str(data / "nbest.jsonl"), "--lambda", "0.3",
            *scorer_flags(workspace)]
    assert main(base + ["--out", str(plain)]) == 0
    assert main(base + ["--context", "--left", "0", "--right", "0",
                        "--out", str(ctx0)]) == 0
    plain_rows = [json.loads(l) for l in plain.read_text().splitlines()]
    ctx_rows = [json.loads(l) for l in ctx0.read_text().splitlines()]
    assert [r["chosen_rank"] for r in plain_rows] == [r["chosen_rank"] for r in ctx_rows]


def test_rescore_paper_default_context_flags(workspace, tmp_path):
    data = workspace / "data"
    out = tmp_path / "ctx.jsonl"
    assert main(["rescore", "--nbest", str(data / "nbest.jsonl"),
                 "--lambda", "0.3", "--context", "--left", "40", "--right", "20",
                 "--lambda-cache", "0.20", "--out", str(out),
                 *scorer_flags(workspace)]) == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert all(r["lambda"] == 0.3 for r in rows)
    assert any(r["left_context"] for r in rows)


def test_rescore_rerun_byte_identical(workspace, tmp_path):
    data = workspace / "data"
    args = ["rescore", "--nbest", str(data / "nbest.jsonl"), "--lambda", "0.25",
            "--context", *scorer_flags(workspace)]
    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_rescore_from_sweep_takes_best_lambda(workspace, tmp_path):
    data = workspace / "data"
    out = tmp_path / "sw"
    assert main(["sweep", "--nbest", str(data / "nbest.jsonl"),
                 "--refs", str(data / "refs.tsv"), "--grid", "0.0,0.4",
                 "--out", str(out), *scorer_flags(workspace)]) == 0
    best = json.loads((tmp_path / "sw.json").read_text())["best_lambda"]
    res = tmp_path / "r.jsonl"
    assert main(["rescore", "--nbest", str(data / "nbest.jsonl"),
                 "--from-sweep", str(tmp_path / "sw.json"),
                 "--out", str(res), *scorer_flags(workspace)]) == 0
    rows = [json.loads(l) for l in res.read_text().splitlines()]
    assert all(r["lambda"] == best for r in rows)


def test_analyze_identical_systems_zero_table(workspace, tmp_path, capsys):
    data = workspace / "data"
    onebest = tmp_path / "hyp.tsv"
    assert main(["rescore", "--nbest", str(data / "nbest.jsonl"), "--lambda", "0.0",
                 "--out", str(tmp_path / "r.jsonl"), "--out-text", str(onebest),
                 *scorer_flags(workspace)]) == 0
    out = tmp_path / "analysis"
    assert main(["analyze", "--baseline", str(onebest), "--system", str(onebest),
                 "--refs", str(data / "refs.tsv"),
                 "--unigrams", str(workspace / "lm" / "unigrams.tsv"),
                 "--profile", "fractional", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "profile=fractional" in printed
    payload = json.loads((tmp_path / "analysis.json").read_text())
    for row in payload["rates"].values():
        for value in row.values():
            assert value in (0.0, None)


def test_analyze_single_substitution_hand_case(tmp_path):
    # one medium-frequency substitution corrected by the system
    (tmp_path / "refs.tsv").write_text("u0\tcommon target\n", encoding="utf-8")
    (tmp_path / "base.tsv").write_text("u0\tcommon wrong\n", encoding="utf-8")
    (tmp_path / "sys.tsv").write_text("u0\tcommon target\n", encoding="utf-8")
    table = ngram.unigram_table(["common common common common target wrong rare"])
    ngram.save_unigrams(table, tmp_path / "uni.tsv")
    out = tmp_path / "rep"
    assert main(["analyze", "--baseline", str(tmp_path / "base.tsv"),
                 "--system", str(tmp_path / "sys.tsv"),
                 "--refs", str(tmp_path / "refs.tsv"),
                 "--unigrams", str(tmp_path / "uni.tsv"),
                 "--t-high", "0.5", "--t-med", "0.01", "--out", str(out)]) == 0
    payload = json.loads((tmp_path / "rep.json").read_text())
    # baseline: deletion of "target" (medium) + insertion of "wrong" (medium)
    assert payload["baseline_counts"]["medium"] == {"del": 1, "ins": 1}
    assert payload["rates"]["medium"]["overall"] == 100.0
    assert payload["thresholds"]["profile"] == "custom"


def test_analyze_id_mismatch_rejected(workspace, tmp_path):
    data = workspace / "data"
    (tmp_path / "partial.tsv").write_text("u000000\ta b\n", encoding="utf-8")
    code = main(["analyze", "--baseline", str(tmp_path / "partial.tsv"),
                 "--system", str(tmp_path / "partial.tsv"),
                 "--refs", str(data / "refs.tsv"),
                 "--unigrams", str(workspace / "lm" / "unigrams.tsv")])
    assert code == 2


def test_oracle_rows_and_monotonicity(workspace, tmp_path):
    data = workspace / "data"
    out = tmp_path / "oracle.json"
    assert main(["oracle", "--nbest", str(data / "nbest.jsonl"),
                 "--refs", str(data / "refs.tsv"), "--n", "1,16,100",
                 "--out", str(out)]) == 0
    rows = json.loads(out.read_text())["rows"]
    assert [r["n"] for r in rows] == [1, 16, 100]
    assert rows[1]["wer"] >= rows[2]["wer"]
    assert rows[0]["wer"] >= rows[1]["wer"]


def test_oracle_n1_equals_baseline_eval(workspace, tmp_path):
    data = workspace / "data"
    onebest = tmp_path / "base.tsv"
    assert main(["rescore", "--nbest", str(data / "nbest.jsonl"), "--lambda", "0.0",
                 "--out", str(tmp_path / "r.jsonl"), "--out-text", str(onebest),
                 *scorer_flags(workspace)]) == 0
    ev = tmp_path / "ev.json"
    assert main(["eval", "--hyp", str(onebest), "--refs", str(data / "refs.tsv"),
                 "--out", str(ev)]) == 0
    orc = tmp_path / "orc.json"
    assert main(["oracle", "--nbest", str(data / "nbest.jsonl"),
                 "--refs", str(data / "refs.tsv"), "--n", "1", "--out", str(orc)]) == 0
    assert json.loads(orc.read_text())["rows"][0]["wer"] == json.loads(
        ev.read_text()
    )["wer"]


def test_missing_input_exits_2(tmp_path):
    assert main(["eval", "--hyp", str(tmp_path / "nope.tsv"),
                 "--refs", str(tmp_path / "nope2.tsv")]) == 2


def test_broken_external_scorer_exits_3(workspace, tmp_path):
    data = workspace / "data"
    code = main(["rescore", "--nbest", str(data / "nbest.jsonl"), "--lambda", "0.1",
                 "--scorer", "external", "--scorer-cmd", "head -c 0",
                 "--out", str(tmp_path / "r.jsonl")])
    assert code == 3


def test_config_file_supplies_scorer(workspace, tmp_path, monkeypatch):
    data = workspace / "data"
    config = tmp_path / "exp.cfg"
    config.write_text(
        "scorer.kind = causal-ngram\n"
        f"scorer.lm = {workspace / 'lm' / 'lm.fwd.arpa'}\n"
        "lambda_cache = 0.20  # trailing comment\n",
        encoding="utf-8",
    )
    out = tmp_path / "viaconf"
    assert main(["--config", str(config), "sweep",
                 "--nbest", str(data / "nbest.jsonl"),
                 "--refs", str(data / "refs.tsv"), "--grid", "0.0,1.0",
                 "--out", str(out)]) == 0
    payload = json.loads((tmp_path / "viaconf.json").read_text())
    assert payload["config"]["scorer.kind"] == "causal-ngram"

    monkeypatch.setenv("NBRESCORE_CONFIG", str(config))
    out2 = tmp_path / "viaenv"
    assert main(["sweep", "--nbest", str(data / "nbest.jsonl"),
                 "--refs", str(data / "refs.tsv"), "--grid", "0.0",
                 "--out", str(out2)]) == 0


def test_unknown_config_key_rejected(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("totally.unknown = 1\n", encoding="utf-8")
    assert main(["--config", str(config), "eval",
                 "--hyp", str(tmp_path / "x"), "--refs", str(tmp_path / "y")]) == 2
