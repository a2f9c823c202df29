"""Batch command line over the engine: ingest, index, run, evaluate against
ground truth, execute strategies with oracle labels, and generate synthetic
benchmark graphs.

Exit codes: 0 ok, 1 usage, 2 data error (bad files, bad config), 3 internal.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .compare import DDConfig
from .errors import KgDedupError, ParseError
from .learn import (
    LabelStore,
    LearnState,
    MetricPrefs,
    Strategy,
    analyze,
    evaluate_against_truth,
    execute_strategy,
    pair_key,
)
from .store import ServiceState
from .synth import SynthOptions, generate, truth_csv

USAGE_EXIT = 1
DATA_EXIT = 2
INTERNAL_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(USAGE_EXIT)


class DataError(Exception):
    pass


def load_truth(path: str | Path) -> list[tuple[str, str, bool]]:
    """Ground truth CSV: header source_id,target_id,is_duplicate. Unordered
    duplicate rows are rejected when their labels conflict."""
    rows: list[tuple[str, str, bool]] = []
    seen: dict[tuple[str, str], bool] = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["source_id", "target_id", "is_duplicate"]:
            raise DataError(f"{path}:1: expected header source_id,target_id,is_duplicate")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            source, target, flag_raw = row
            flag_norm = flag_raw.strip().lower()
            if flag_norm in ("true", "1"):
                flag = True
            elif flag_norm in ("false", "0"):
                flag = False
            else:
                raise DataError(f"{path}:{lineno}: bad is_duplicate value {flag_raw!r}")
            key = pair_key(source, target)
            if key in seen and seen[key] != flag:
                raise DataError(f"{path}:{lineno}: conflicting label for pair {key}")
            seen[key] = flag
            rows.append((source, target, flag))
    return rows


def _truth_store(rows: list[tuple[str, str, bool]]) -> LabelStore:
    store = LabelStore()
    for source, target, flag in rows:
        store.record(source, target, flag)
    return store


def _load_config(state: ServiceState, pair, config_path: str | None) -> DDConfig:
    if config_path is None:
        return pair.config
    try:
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{config_path}: {exc}") from exc
    return DDConfig.from_json(data)


def _report_text(report) -> str:
    lines = [
        f"precision  {report.precision:.4f}",
        f"recall     {report.recall:.4f}",
        f"f1         {report.f1:.4f}",
        f"tp={report.true_pos} fp={report.false_pos} fn={report.false_neg} tn={report.true_neg}",
        f"labelled   {report.labelled_total}",
    ]
    if report.degenerate:
        lines.append("warning: degenerate report (no positives on one side)")
    return "\n".join(lines)


# -- subcommands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    try:
        text = Path(args.file).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{args.file}: {exc}") from exc
    state = ServiceState(args.state)
    entry = state.ingest_graph(args.name or Path(args.file).stem, text)
    out = {
        "id": entry.id,
        "name": entry.name,
        "triples": len(entry.graph),
        "types": state.type_counts(entry.graph),
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_index(args) -> int:
    state = ServiceState(args.state)
    extra = None
    if args.categories:
        from .schema import load_category_table

        extra = load_category_table(args.categories)
    entry = state.create_index(
        args.graph, args.type, args.spec, args.spec_graph, args.depth,
        extra_categories=extra,
    )
    print(json.dumps({"id": entry.id, "documents": len(entry.index), "spec": entry.spec.to_json()}, indent=2, sort_keys=True))
    return 0


def _ensure_pair(state: ServiceState, args):
    return state.ensure_pair(args.source, args.target)


def cmd_run(args) -> int:
    state = ServiceState(args.state, candidate_limit=args.limit)
    pair = _ensure_pair(state, args)
    config = _load_config(state, pair, args.config)
    if args.config is None:
        config, _ = state.effective_run_config(pair)
    results = state.run_pair(pair.id, config)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for p in results:
                fh.write(json.dumps(p.to_json(), sort_keys=True) + "\n")
    accepted = [p for p in results if p.accepted]
    if args.json:
        print(json.dumps({"pair": pair.id, "total": len(results), "accepted": [p.to_json() for p in accepted]}, indent=2, sort_keys=True))
    else:
        for p in accepted:
            print(f"{p.source_id}\t{p.target_id}\t{p.similarity:.4f}")
        print(f"# {len(accepted)} accepted of {len(results)} scored candidate pairs")
    return 0


def cmd_eval(args) -> int:
    state = ServiceState(args.state, candidate_limit=args.limit)
    pair = _ensure_pair(state, args)
    config = _load_config(state, pair, args.config)
    rows = load_truth(args.truth)
    results = state.run_pair(pair.id, config)
    if args.complete:
        truth_pairs = {pair_key(s, t) for s, t, flag in rows if flag}
        report = evaluate_against_truth(results, truth_pairs)
    else:
        report = analyze(results, _truth_store(rows))
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        print(_report_text(report))
    return 0


def cmd_strategy(args) -> int:
    state = ServiceState(args.state, candidate_limit=args.limit)
    pair = _ensure_pair(state, args)
    try:
        steps = json.loads(Path(args.steps).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{args.steps}: {exc}") from exc
    strategy = Strategy.from_json(steps)
    rows = load_truth(args.truth)
    primary, _, secondary = (args.prefs + ",").partition(",")
    prefs = MetricPrefs(primary.strip(), secondary.strip(",").strip() or "precision")

    src = state.indices[pair.source_index]
    tgt = state.indices[pair.target_index]
    learn = LearnState(
        source=src.index,
        target=tgt.index,
        config=pair.config,
        store=_truth_store(rows),
        prefs=prefs,
        candidate_limit=state.candidate_limit,
    )
    outcome = execute_strategy(learn, strategy)
    state.put_config(pair.id, outcome.config.to_json())
    best = outcome.audit[-1]["report"] if outcome.audit else None
    summary = {
        "steps_completed": outcome.steps_completed,
        "evaluations": len(outcome.audit),
        "error": outcome.error,
        "final_config": outcome.config.to_json(),
    }
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(f"steps completed: {outcome.steps_completed}/{len(strategy.steps)}")
        print(f"evaluations:     {len(outcome.audit)}")
        if outcome.error:
            print(f"error:           {outcome.error}")
        if best:
            print(f"last report:     f1={best['f1']:.4f} p={best['precision']:.4f} r={best['recall']:.4f}")
        print(f"config stored as version {state.get_pair(pair.id).config_version}")
    return 0 if outcome.error is None else DATA_EXIT


def cmd_synth(args) -> int:
    opt = SynthOptions(
        instances=args.instances,
        dup_rate=args.dup_rate,
        seed=args.seed,
        typo_prob=args.typo_prob,
        case_flip_prob=args.case_flip_prob,
        field_drop_prob=args.field_drop_prob,
    )
    ntriples, pairs = generate(opt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "kg.nt").write_text(ntriples, encoding="utf-8")
    (out / "truth.csv").write_text(truth_csv(pairs), encoding="utf-8")
    print(f"wrote {out / 'kg.nt'} and {out / 'truth.csv'} ({len(pairs)} duplicate pairs)")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    ignored = tuple(f.strip() for f in args.ignore.split(",") if f.strip())
    app = create_app(
        args.state, candidate_limit=args.limit, ignored_fields=ignored, ui_dir=args.ui
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="kgdedup", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_state(p):
        p.add_argument("--state", required=True, help="state directory")

    p = sub.add_parser("ingest", help="parse an N-Triples file into the store")
    add_state(p)
    p.add_argument("file")
    p.add_argument("--name", default=None)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("index", help="build a per-type index")
    add_state(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--type", required=True, help="type IRI to index")
    p.add_argument("--spec", default="emergent", help="'emergent' or a shape IRI")
    p.add_argument("--spec-graph", default=None, help="graph id holding the shape")
    p.add_argument("--depth", type=int, default=1)
    p.add_argument(
        "--categories",
        default=None,
        help="JSON file of datatype-category overrides (IRI -> string|number|boolean)",
    )
    p.set_defaults(fn=cmd_index)

    def add_pair_args(p):
        add_state(p)
        p.add_argument("--source", required=True, help="source index id")
        p.add_argument("--target", required=True, help="target index id")
        p.add_argument("--config", default=None, help="config JSON file (default: stored pair config)")
        p.add_argument("--limit", type=int, default=50, help="pre-filter candidate limit")
        p.add_argument("--json", action="store_true")

    p = sub.add_parser("run", help="run duplicate detection for an index pair")
    add_pair_args(p)
    p.add_argument("--out", default=None, help="write all scored pairs as JSON lines")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("eval", help="run detection and score against ground truth")
    add_pair_args(p)
    p.add_argument("--truth", required=True, help="ground truth CSV")
    p.add_argument(
        "--complete",
        action="store_true",
        help="treat the truth file as exhaustive: unlisted pairs are non-duplicates",
    )
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("strategy", help="execute a search strategy with oracle labels")
    add_pair_args(p)
    p.add_argument("--steps", required=True, help="strategy steps JSON file")
    p.add_argument("--truth", required=True, help="ground truth CSV used as labels")
    p.add_argument("--prefs", default="f1,precision", help="primary,secondary metric")
    p.set_defaults(fn=cmd_strategy)

    p = sub.add_parser("synth", help="generate a synthetic KG with known duplicates")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--dup-rate", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--typo-prob", type=float, default=0.15)
    p.add_argument("--case-flip-prob", type=float, default=0.3)
    p.add_argument("--field-drop-prob", type=float, default=0.2)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--state", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--limit", type=int, default=50)
    p.add_argument(
        "--ignore",
        default="compliesWith",
        help="comma-separated field names excluded from default configs",
    )
    p.add_argument("--ui", default=None, help="directory of built UI assets to serve at /ui")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return DATA_EXIT
    except (DataError, KgDedupError, KeyError) as exc:
        msg = exc.args[0] if exc.args else exc
        sys.stderr.write(f"data error: {msg}\n")
        return DATA_EXIT
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(f"internal error: {exc}\n")
        return INTERNAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
