"""Command-line entry point for reproducible batch rescoring experiments.

Subcommands: train-lm, sweep, rescore, analyze, oracle, eval, synth.
Exit codes: 0 ok, 2 validation failure, 3 scorer backend failure.

A plain ``key = value`` config file (``--config`` or the NBRESCORE_CONFIG
environment variable) supplies defaults for any documented key; explicit
command-line flags win.  Every JSON report embeds the resolved configuration
it was produced with.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import evaluate, ngram, protocol, rescore, scoring, synth
from .errors import BackendError, UtteranceIdMismatch, ValidationError
from .nbest import (
    attach_references,
    load_nbest,
    load_references,
    save_nbest,
    save_references,
)

CONFIG_ENV_VAR = "NBRESCORE_CONFIG"

CONFIG_KEYS = {
    "scorer.kind": "causal-ngram | bidirectional-ngram | external",
    "scorer.lm": "forward ARPA model path",
    "scorer.backward_lm": "backward ARPA model path",
    "scorer.cmd": "external scorer command line (stdio transport)",
    "scorer.tcp_addr": "external scorer host:port (TCP transport)",
    "scorer.mode": "causal | masked (external scorers)",
    "scorer.max_inflight": "pipelined in-flight request cap",
    "scorer.timeout_s": "per-request timeout in seconds",
    "scorer.provenance": "scratch | pretrained | finetuned (report metadata)",
    "grid": "comma-separated lambda grid",
    "left_budget": "context tokens kept from past 1-bests",
    "right_budget": "context tokens kept from the future 1-best",
    "lambda_cache": "lambda used when caching past 1-bests",
    "threshold_profile": "paper-literal | fractional",
    "threads": "worker cap for parallel sections",
}


def load_config(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{line_no}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ValidationError(f"{path}:{line_no}: unknown config key {key!r}")
            values[key] = value
    return values


class _Resolver:
    """Flag > config file > default, recording what was resolved."""

    def __init__(self, args: argparse.Namespace):
        self.config: dict[str, str] = {}
        path = args.config or os.environ.get(CONFIG_ENV_VAR)
        if path:
            if not Path(path).is_file():
                raise ValidationError(f"config file not found: {path}")
            self.config = load_config(path)
        self.resolved: dict[str, object] = {}

    def get(self, flag_value, key: str, default=None, cast=None):
        if flag_value is not None:
            value = flag_value
        elif key in self.config:
            value = self.config[key]
            if cast is not None:
                value = cast(value)
        else:
            value = default
        self.resolved[key] = value
        return value


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"bad grid {text!r}") from exc


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"{what} not found: {p}")
    return p


def _build_scorer(args, resolver: _Resolver):
    """Returns (scorer, close_fn)."""
    kind = resolver.get(args.scorer, "scorer.kind")
    if kind is None:
        raise ValidationError("no scorer configured (--scorer or scorer.kind)")
    provenance = resolver.get(
        getattr(args, "provenance", None), "scorer.provenance", "scratch"
    )

    if kind == "causal-ngram":
        lm = resolver.get(args.lm, "scorer.lm")
        if lm is None:
            raise ValidationError("causal-ngram scorer needs --lm")
        model = ngram.load_arpa(_require_file(lm, "forward model"))
        return scoring.CausalNgramScorer(model, provenance=provenance), lambda: None

    if kind == "bidirectional-ngram":
        lm = resolver.get(args.lm, "scorer.lm")
        bwd = resolver.get(args.backward_lm, "scorer.backward_lm")
        if lm is None or bwd is None:
            raise ValidationError(
                "bidirectional-ngram scorer needs --lm and --backward-lm"
            )
        fwd_model = ngram.load_arpa(_require_file(lm, "forward model"))
        bwd_model = ngram.load_arpa(_require_file(bwd, "backward model"))
        return (
            scoring.BidirectionalNgramScorer(fwd_model, bwd_model, provenance=provenance),
            lambda: None,
        )

    if kind == "external":
        cmd = resolver.get(args.scorer_cmd, "scorer.cmd")
        tcp = resolver.get(args.scorer_tcp, "scorer.tcp_addr")
        mode = resolver.get(args.scorer_mode, "scorer.mode", scoring.MASKED)
        inflight = int(
            resolver.get(args.max_inflight, "scorer.max_inflight", 32, cast=int)
        )
        timeout = float(
            resolver.get(args.timeout_s, "scorer.timeout_s", 60.0, cast=float)
        )
        if bool(cmd) == bool(tcp):
            raise ValidationError(
                "external scorer needs exactly one of --scorer-cmd / --scorer-tcp"
            )
        if cmd:
            client = protocol.connect_stdio(
                cmd, max_inflight=inflight, timeout_s=timeout
            )
        else:
            client = protocol.connect_tcp(
                tcp, max_inflight=inflight, timeout_s=timeout
            )
        return scoring.ExternalScorer(client, mode), client.close

    raise ValidationError(f"unknown scorer kind {kind!r}")


def _add_scorer_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("scorer")
    group.add_argument(
        "--scorer", choices=["causal-ngram", "bidirectional-ngram", "external"]
    )
    group.add_argument("--lm", help="forward ARPA model")
    group.add_argument("--backward-lm", help="backward ARPA model")
    group.add_argument("--provenance", choices=list(scoring.PROVENANCES))
    group.add_argument("--scorer-cmd", help="external scorer command (stdio)")
    group.add_argument("--scorer-tcp", help="external scorer host:port")
    group.add_argument("--scorer-mode", choices=[scoring.CAUSAL, scoring.MASKED])
    group.add_argument("--max-inflight", type=int)
    group.add_argument("--timeout-s", type=float)


def _load_sets(specs: list[str], refs_path) -> dict[str, list]:
    refs = load_references(_require_file(refs_path, "reference file"))
    sets = {}
    for spec in specs:
        if "=" in spec:
            name, path = spec.split("=", 1)
        else:
            name, path = Path(spec).stem, spec
        sessions = load_nbest(_require_file(path, "N-best file"))
        sets[name] = attach_references(sessions, refs, require_all=True)
    return sets


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_train_lm(args) -> int:
    resolver = _Resolver(args)
    corpus_path = _require_file(args.corpus, "training corpus")
    out_dir = Path(args.out_dir)
    with open(corpus_path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]

    kwargs = dict(
        order=args.order,
        smoothing=args.smoothing,
        k=args.k,
        min_count=args.min_count,
    )
    fwd = ngram.train(lines, direction=ngram.FORWARD, **kwargs)
    bwd = ngram.train(lines, direction=ngram.BACKWARD, **kwargs)
    table = ngram.unigram_table(lines)

    out_dir.mkdir(parents=True, exist_ok=True)
    ngram.save_arpa(fwd, out_dir / "lm.fwd.arpa")
    ngram.save_arpa(bwd, out_dir / "lm.bwd.arpa")
    ngram.save_unigrams(table, out_dir / "unigrams.tsv")
    print(
        f"trained order-{args.order} {args.smoothing} models: "
        f"vocab={len(fwd.vocab)} tokens={table.total_tokens} -> {out_dir}"
    )
    return 0


def cmd_sweep(args) -> int:
    resolver = _Resolver(args)
    grid_text = resolver.get(args.grid, "grid")
    grid = _parse_grid(grid_text) if grid_text else rescore.DEFAULT_GRID
    threads = int(resolver.get(args.threads, "threads", 1, cast=int))
    sets = _load_sets(args.nbest, args.refs)

    scorer, close = _build_scorer(args, resolver)
    try:
        report = rescore.sweep_lambda(sets, scorer, grid=grid, threads=threads)
    finally:
        close()

    payload = report.as_dict()
    payload["config"] = {k: str(v) for k, v in resolver.resolved.items() if v is not None}
    _write_json(args.out + ".json", payload)
    with open(args.out + ".tsv", "w", encoding="utf-8", newline="\n") as fh:
        names = list(report.set_names)
        fh.write("lambda\t" + "\t".join(names) + "\tavg\n")
        for i, lam in enumerate(report.grid):
            cells = [f"{report.wer_by_set[name][i]:.6f}" for name in names]
            fh.write(f"{lam:.2f}\t" + "\t".join(cells) + f"\t{report.avg_wer[i]:.6f}\n")
    print(f"best lambda: {report.best_lambda:.2f} (avg WER {min(report.avg_wer):.6f})")
    return 0


def cmd_rescore(args) -> int:
    resolver = _Resolver(args)
    sessions = load_nbest(_require_file(args.nbest, "N-best file"))

    if args.lam is not None:
        lam = args.lam
    elif args.from_sweep:
        with open(_require_file(args.from_sweep, "sweep report")) as fh:
            lam = float(json.load(fh)["best_lambda"])
    else:
        raise ValidationError("provide --lambda or --from-sweep")

    threads = int(resolver.get(args.threads, "threads", 1, cast=int))
    scorer, close = _build_scorer(args, resolver)
    try:
        if args.context:
            left = int(resolver.get(args.left, "left_budget", 40, cast=int))
            right = int(resolver.get(args.right, "right_budget", 20, cast=int))
            lam_cache = float(
                resolver.get(args.lambda_cache, "lambda_cache", 0.20, cast=float)
            )
            results = rescore.rescore_with_context(
                sessions, scorer, lam, left, right, lam_cache, threads
            )
        else:
            results = rescore.rescore_plain(sessions, scorer, lam, threads)
    finally:
        close()

    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for result in results:
            fh.write(json.dumps(result.as_dict(), ensure_ascii=False) + "\n")
    if args.out_text:
        save_references(
            {r.utterance_id: r.chosen_tokens for r in results}, args.out_text
        )
    print(f"rescored {len(results)} utterances at lambda={lam:.2f} -> {args.out}")
    return 0


def _read_onebest(path) -> dict[str, tuple[str, ...]]:
    return load_references(_require_file(path, "1-best file"))


def cmd_analyze(args) -> int:
    resolver = _Resolver(args)
    baseline = _read_onebest(args.baseline)
    system = _read_onebest(args.system)
    refs = load_references(_require_file(args.refs, "reference file"))
    if set(baseline) != set(refs) or set(system) != set(refs):
        raise UtteranceIdMismatch(
            "baseline, system, and references must cover the same utterance ids"
        )

    unigrams = ngram.load_unigrams(_require_file(args.unigrams, "unigram table"))
    profile = resolver.get(args.profile, "threshold_profile", "paper-literal")
    if args.t_high is not None or args.t_med is not None:
        if args.t_high is None or args.t_med is None:
            raise ValidationError("--t-high and --t-med must be given together")
        t_high, t_med = args.t_high, args.t_med
        profile = "custom"
    else:
        if profile not in evaluate.THRESHOLD_PROFILES:
            raise ValidationError(f"unknown threshold profile {profile!r}")
        t_high, t_med = evaluate.THRESHOLD_PROFILES[profile]
    lexicon = evaluate.FrequencyLexicon.from_unigram_table(unigrams, t_high, t_med)

    def pooled(hyps):
        breakdown = evaluate.ErrorBreakdown()
        for utt_id in sorted(refs):
            alignment = evaluate.align(refs[utt_id], hyps[utt_id])
            breakdown = breakdown.add(evaluate.decompose_errors(alignment, lexicon))
        return breakdown

    base_counts = pooled(baseline)
    sys_counts = pooled(system)
    report = evaluate.error_reduction_report(base_counts, sys_counts)

    def fmt(value):
        return "n/a" if value is None else f"{value:.1f}"

    header = f"# thresholds: profile={profile} t_high={t_high:g} t_med={t_med:g}"
    lines = [header, "class\tdel\tins\toverall"]
    for cls in evaluate.CLASSES:
        row = report.rates[cls]
        lines.append(
            f"{cls}\t{fmt(row['del'])}\t{fmt(row['ins'])}\t{fmt(row['overall'])}"
        )
    text = "\n".join(lines) + "\n"
    print(text, end="")

    if args.out:
        with open(args.out + ".tsv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        payload = {
            "thresholds": {"profile": profile, "t_high": t_high, "t_med": t_med},
            "rates": report.rates,
            "baseline_counts": base_counts.counts,
            "system_counts": sys_counts.counts,
            "undefined_cells": [list(c) for c in report.undefined_cells],
            "config": {
                k: str(v) for k, v in resolver.resolved.items() if v is not None
            },
        }
        _write_json(args.out + ".json", payload)
    return 0


def cmd_oracle(args) -> int:
    refs = load_references(_require_file(args.refs, "reference file"))
    sessions = load_nbest(_require_file(args.nbest, "N-best file"))
    sessions = attach_references(sessions, refs, require_all=True)
    ns = sorted({int(x) for x in args.n.split(",")})
    rows = []
    for n in ns:
        counts = evaluate.oracle_wer(sessions, n)
        rows.append({"n": n, **counts.as_dict()})
        print(
            f"oracle n={n}\twer={counts.wer:.6f}\t"
            f"S={counts.substitutions} D={counts.deletions} "
            f"I={counts.insertions} N={counts.ref_length}"
        )
    if args.out:
        config = {"nbest": str(args.nbest), "refs": str(args.refs), "n": args.n}
        _write_json(args.out, {"rows": rows, "config": config})
    return 0


def cmd_eval(args) -> int:
    refs = load_references(_require_file(args.refs, "reference file"))
    hyps = _read_onebest(args.hyp)
    if set(hyps) != set(refs):
        raise UtteranceIdMismatch(
            "hypothesis and reference files must cover the same utterance ids"
        )
    counts = evaluate.corpus_wer(
        [(refs[utt_id], hyps[utt_id]) for utt_id in sorted(refs)]
    )
    print(
        f"wer={counts.wer:.6f}\tS={counts.substitutions} D={counts.deletions} "
        f"I={counts.insertions} N={counts.ref_length}"
    )
    if args.out:
        payload = counts.as_dict()
        payload["config"] = {"hyp": str(args.hyp), "refs": str(args.refs)}
        _write_json(args.out, payload)
    return 0


def cmd_synth(args) -> int:
    config = synth.SynthConfig(
        sessions=args.sessions,
        utterances_per_session=args.utterances,
        nbest_size=args.nbest_size,
        vocab_size=args.vocab,
        seed=args.seed,
        am_correlation=args.rho,
        plant_rank=args.plant_rank,
    )
    sessions, _true_lm, corpus = synth.generate(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_nbest(sessions, out_dir / "nbest.jsonl")
    save_references(
        {
            utt.utterance_id: utt.reference
            for session in sessions
            for utt in session.utterances
        },
        out_dir / "refs.tsv",
    )
    with open(out_dir / "corpus.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(corpus) + "\n")
    n_utts = sum(len(s) for s in sessions)
    print(f"wrote {n_utts} utterances over {len(sessions)} sessions -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbrescore",
        description="Rescore ASR N-best lists with pluggable LM scorers",
    )
    parser.add_argument("--config", help=f"config file (or ${CONFIG_ENV_VAR})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-lm", help="train forward+backward n-gram models")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--smoothing", choices=["kneser_ney", "add_k"], default="kneser_ney")
    p.add_argument("--k", type=float, default=0.5)
    p.add_argument("--min-count", type=int, default=2)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("sweep", help="grid-sweep the interpolation weight")
    p.add_argument(
        "--nbest",
        action="append",
        required=True,
        metavar="[NAME=]PATH",
        help="N-best file per test set (repeatable)",
    )
    p.add_argument("--refs", required=True)
    p.add_argument("--grid", help="comma-separated lambda values")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True, help="report prefix (.json/.tsv)")
    _add_scorer_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rescore", help="emit the rescored 1-best")
    p.add_argument("--nbest", required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--from-sweep", help="sweep report JSON to take best lambda from")
    p.add_argument("--context", action="store_true", help="attach session context")
    p.add_argument("--left", type=int, help="left context budget (tokens)")
    p.add_argument("--right", type=int, help="right context budget (tokens)")
    p.add_argument("--lambda-cache", dest="lambda_cache", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True, help="JSON-lines results path")
    p.add_argument("--out-text", help="also write utt<TAB>words 1-best file")
    _add_scorer_flags(p)
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("analyze", help="error reduction by frequency class")
    p.add_argument("--baseline", required=True, help="baseline 1-best TSV")
    p.add_argument("--system", required=True, help="system 1-best TSV")
    p.add_argument("--refs", required=True)
    p.add_argument("--unigrams", required=True, help="unigram table from train-lm")
    p.add_argument("--profile", choices=list(evaluate.THRESHOLD_PROFILES))
    p.add_argument("--t-high", type=float)
    p.add_argument("--t-med", type=float)
    p.add_argument("--out", help="report prefix (.tsv/.json)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("oracle", help="oracle WER over top-n hypotheses")
    p.add_argument("--nbest", required=True)
    p.add_argument("--refs", required=True)
    p.add_argument("--n", default="1,16,100", help="comma-separated n values")
    p.add_argument("--out", help="JSON output path")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("eval", help="WER of a 1-best file against references")
    p.add_argument("--hyp", required=True, help="hypothesis TSV (utt<TAB>words)")
    p.add_argument("--refs", required=True)
    p.add_argument("--out", help="JSON output path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic corpus and N-bests")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sessions", type=int, default=10)
    p.add_argument("--utterances", type=int, default=10)
    p.add_argument("--nbest-size", type=int, default=16)
    p.add_argument("--vocab", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=0.7)
    p.add_argument("--plant-rank", type=int)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _Resolver(args)  # validate the config file before any command runs
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
