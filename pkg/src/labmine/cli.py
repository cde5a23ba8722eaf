"""Command-line entry point: ``labmine <subcommand> [options]``.

Exit status is 0 on success, 1 on a usage error and 2 when the input data
cannot be used. Every report and artifact starts with ``# key=value`` lines
recording the configuration and seed that produced it.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import IO, Iterator, Sequence

from . import synth
from .classifiers.models import ALGORITHMS, Model, ModelSpec, SchemaMismatch, canonical_algorithm, load_model, save_model, train
from .dataset import FeatureTable, SchemaError, SplitPlan, project_columns, read_table, table_format_for, write_table
from .evaluation import (
    DEFAULT_FRACTIONS,
    cross_validate,
    format_metrics_table,
    format_sweep_table,
    percent,
    split_eval,
    sweep,
    write_series,
    write_structured,
)
from .featsel import RankedAttributes, head_count, rank_all, read_ranking, write_ranking
from .ingest import AggregationMode, ParseError, build_feature_table, default_item_universe, load_outcomes, parse_labevents, parse_labitems
from .monitor import DEFAULT_THRESHOLD, Monitor, write_summary, write_warnings

log = logging.getLogger("labmine")

DATA_DIR_ENV = "LABMINE_DATA_DIR"
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; usage errors here are 1
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# argument parsing

def _fraction_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    values = [v / 100 if v > 1 else v for v in values]
    if not values or any(not 0 < v <= 1 for v in values):
        raise argparse.ArgumentTypeError("fractions must lie in (0, 1] or (0, 100]")
    return values


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _algo(text: str) -> str:
    if text.lower() == "all":
        return "all"
    try:
        return canonical_algorithm(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _param(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _add_data_args(p: argparse.ArgumentParser, table: bool = True) -> None:
    g = p.add_argument_group("input data")
    g.add_argument("--events", help=f"lab-event CSV (default: ${DATA_DIR_ENV}/{synth.EVENTS_FILE})")
    g.add_argument("--items", help="lab-item catalog CSV; its item ids define the attribute set")
    g.add_argument("--outcomes", help="SUBJECT_ID,DIED outcome CSV (default: next to the events)")
    if table:
        g.add_argument("--table", help="ready-made feature table (.csv or .arff) instead of raw events")
    g.add_argument("--mode", choices=[m.value for m in AggregationMode],
                   help="aggregation (default avg, or the mode recorded in --table)")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=1, help="random seed (default 1)")
    p.add_argument("--jobs", type=_positive_int, default=1, help="parallel worker processes (default 1)")
    p.add_argument("--format", default="text", choices=("text", "structured"), help="report style")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="labmine", description="Lab-event mining for ICU mortality prediction.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", help="aggregate lab events into a feature table")
    _add_data_args(p, table=False)
    _add_common(p)
    p.add_argument("--out", required=True, help="output table; .arff selects ARFF, anything else CSV")

    p = sub.add_parser("rank", help="rank attributes by information gain")
    _add_data_args(p)
    _add_common(p)
    p.add_argument("--out", help="ranking CSV (RANK,ITEMID,GAIN_BITS)")
    p.add_argument("--top", type=_positive_int, default=10, help="rows shown on stdout (default 10)")

    p = sub.add_parser("sweep", help="cross-validate over ranked-attribute heads of 10%%..100%%")
    _add_data_args(p)
    _add_common(p)
    p.add_argument("--algo", type=_algo, default="DecisionTree", help="learner (default j48)")
    p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--k", type=int, default=10, help="folds (default 10)")
    p.add_argument("--fractions", type=_fraction_list, default=list(DEFAULT_FRACTIONS),
                   help="comma-separated shares, e.g. 10,50,100")
    p.add_argument("--ranking", help="use this ranking file instead of ranking the table")
    p.add_argument("--selection", default="full", choices=("full", "per_fold"),
                   help="rank once on the full table, or inside every training fold")
    p.add_argument("--series", help="also write a fraction,accuracy CSV for plotting")
    p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("train", help="train one model and save it")
    _add_data_args(p)
    _add_common(p)
    p.add_argument("--algo", type=_algo, required=True)
    p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--fraction", type=_fraction_list, default=[1.0], help="keep the top share of ranked attributes")
    p.add_argument("--model", required=True, help="output model file (JSON)")

    p = sub.add_parser("eval", help="evaluate learners by cross-validation or repeated split")
    _add_data_args(p)
    _add_common(p)
    p.add_argument("--algo", type=_algo, default="all", help="learner or 'all' (default all)")
    p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--protocol", default="cv", choices=("cv", "split"))
    p.add_argument("--k", type=int, default=10, help="folds for cv (default 10)")
    p.add_argument("--train-fraction", type=float, default=SplitPlan.train_fraction, help="split: training share")
    p.add_argument("--repeats", type=_positive_int, default=SplitPlan.repeats, help="split: repetitions")
    p.add_argument("--fraction", type=_fraction_list, default=[1.0], help="keep the top share of ranked attributes")
    p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("monitor", help="replay lab events against a model and emit warnings")
    p.add_argument("--model", required=True, help="model file written by 'train'")
    p.add_argument("--events", help="lab-event CSV, or '-' for standard input")
    p.add_argument("--threshold", type=_probability, default=DEFAULT_THRESHOLD)
    p.add_argument("--no-suppress", dest="suppress", action="store_false",
                   help="warn on every event at or above the threshold")
    p.add_argument("--out", help="warnings CSV (default stdout)")
    p.add_argument("--summary", help="per-patient final score CSV")
    p.add_argument("--seed", type=int, default=1, help=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("synth", help="write a synthetic lab-event corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--patients", type=_positive_int, default=3000)
    p.add_argument("--n-items", type=_positive_int, default=700)
    p.add_argument("--informative", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


# ---------------------------------------------------------------------------
# helpers

@contextlib.contextmanager
def _output(path: str | None) -> Iterator[IO[str]]:
    if path is None or path == "-":
        yield sys.stdout
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        yield fh


def _stamp(args: argparse.Namespace, **extra) -> list[str]:
    config = {k: v for k, v in vars(args).items() if k not in ("verbose", "format") and v not in (None, [])}
    config.update(extra)
    out = []
    for key in sorted(config):
        value = config[key]
        if isinstance(value, (list, tuple)):
            value = ",".join(_scalar(v) for v in value)
        out.append(f"{key}={_scalar(value)}")
    return out


def _scalar(v) -> str:
    if isinstance(v, tuple) and len(v) == 2:
        return f"{v[0]}={v[1]}"
    return str(v)


def _data_paths(args: argparse.Namespace) -> tuple[Path, Path, Path | None]:
    base = os.environ.get(DATA_DIR_ENV)
    if args.events:
        events = Path(args.events)
    elif base:
        events = Path(base) / synth.EVENTS_FILE
    else:
        raise UsageError(f"--events is required (or set {DATA_DIR_ENV})")
    outcomes = Path(args.outcomes) if args.outcomes else events.parent / synth.OUTCOMES_FILE
    items = Path(args.items) if args.items else None
    if items is None and not args.events and base and (Path(base) / synth.ITEMS_FILE).exists():
        items = Path(base) / synth.ITEMS_FILE
    for path in (events, outcomes, items):
        if path is not None and not path.is_file():
            raise FileNotFoundError(f"no such file: {path}")
    return events, outcomes, items


def _load_table(args: argparse.Namespace) -> FeatureTable:
    """Load or build the feature table; ``args.mode`` is set to its encoding."""
    table = _read_or_build(args)
    args.mode = table.mode
    return table


def _read_or_build(args: argparse.Namespace) -> FeatureTable:
    if getattr(args, "table", None):
        path = Path(args.table)
        if not path.is_file():
            raise FileNotFoundError(f"no such file: {path}")
        with open(path, encoding="utf-8") as fh:
            table = read_table(fh, table_format_for(str(path)))
        if table.mode is None:
            return FeatureTable(table.attribute_names, table.keys, table.X, table.y, args.mode or "avg")
        if args.mode and table.mode != args.mode:
            log.warning("table was built in %s mode; --mode %s ignored", table.mode, args.mode)
        return table
    events_path, outcomes_path, items_path = _data_paths(args)
    with open(events_path, encoding="utf-8", newline="") as fh:
        parsed = parse_labevents(fh)
    with open(outcomes_path, encoding="utf-8", newline="") as fh:
        outcomes = load_outcomes(fh)
    catalog = None
    if items_path is not None:
        with open(items_path, encoding="utf-8", newline="") as fh:
            catalog = parse_labitems(fh)
    universe = default_item_universe(parsed.events, catalog)
    built = build_feature_table(parsed.events, outcomes, args.mode or "avg", universe)
    log.info("%d patients x %d attributes (%d malformed rows, %d events outside the catalog)",
             built.table.n_rows, built.table.n_attributes, parsed.skipped, built.skipped_events)
    return built.table


def _ranking(args: argparse.Namespace, table: FeatureTable) -> RankedAttributes:
    path = getattr(args, "ranking", None)
    if path:
        with open(path, encoding="utf-8") as fh:
            return read_ranking(fh)
    return rank_all(table)


def _head_table(table: FeatureTable, fraction: float) -> FeatureTable:
    if fraction >= 1.0:
        return table
    ranked = rank_all(table)
    keep = set(ranked.top(head_count(len(ranked), fraction)))
    return project_columns(table, [n for n in table.attribute_names if n in keep])


def _spec(args: argparse.Namespace, algo: str) -> ModelSpec:
    params = dict(args.param) if algo == args.algo else {}
    return ModelSpec(algo, params, seed=args.seed)


# ---------------------------------------------------------------------------
# subcommands

def cmd_ingest(args) -> int:
    table = _load_table(args)
    fmt = table_format_for(args.out)
    with _output(args.out) as fh:
        write_table(table, fh, fmt, comments=_stamp(args))
    print(f"wrote {table.n_rows} rows x {table.n_attributes} attributes to {args.out}")
    return EXIT_OK


def cmd_rank(args) -> int:
    table = _load_table(args)
    ranked = rank_all(table)
    if args.out:
        with _output(args.out) as fh:
            write_ranking(ranked, fh, comments=_stamp(args))
    shown = list(ranked.entries[: args.top])
    if args.format == "structured":
        write_structured([{"rank": i, "item_id": n, "gain_bits": g, "seed": args.seed, "mode": table.mode}
                          for i, (n, g) in enumerate(shown, start=1)], sys.stdout)
    else:
        for line in _stamp(args):
            print(f"# {line}")
        print("Rank  ItemID  Gain (bits)")
        for i, (name, gain) in enumerate(shown, start=1):
            print(f"{i:>4}  {name:>6}  {gain:.6f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.algo == "all":
        raise UsageError("sweep takes a single --algo")
    table = _load_table(args)
    ranked = _ranking(args, table)
    spec = _spec(args, args.algo)
    report = sweep(spec, table, ranked, args.fractions, k=args.k, seed=args.seed,
                   selection=args.selection, jobs=args.jobs)
    stamp = _stamp(args, n_attributes=table.n_attributes)
    with _output(args.out) as fh:
        if args.format == "structured":
            write_structured([{"fraction_pct": r.fraction_pct, "n_selected": r.n_selected, "accuracy": r.accuracy,
                               "n_leaves": r.n_leaves, "tree_size": r.tree_size, "seed": args.seed,
                               "algorithm": spec.algorithm, "mode": table.mode, "selection": report.selection}
                              for r in report.rows], fh)
        else:
            fh.write(format_sweep_table(report, f"Feature-selection sweep ({spec.algorithm}, {table.mode})", stamp))
    if args.series:
        with _output(args.series) as fh:
            for line in stamp:
                fh.write(f"# {line}\n")
            write_series(report, fh)
    return EXIT_OK


def cmd_train(args) -> int:
    if args.algo == "all":
        raise UsageError("train takes a single --algo")
    table = _head_table(_load_table(args), args.fraction[0])
    spec = _spec(args, args.algo)
    model = train(spec, table)
    meta = {"config": _stamp(args), "seed": args.seed}
    with _output(args.model) as fh:
        save_model(model, fh, metadata=meta)
    readout = model.render()
    if readout is not None:
        root = model.tree
        print(readout)
        print(f"Number of Leaves  : {root.n_leaves()}")
        print(f"Size of the tree  : {root.size()}")
    print(f"saved {spec.algorithm} model over {table.n_attributes} attributes to {args.model}")
    return EXIT_OK


def cmd_eval(args) -> int:
    table = _head_table(_load_table(args), args.fraction[0])
    algos = list(ALGORITHMS) if args.algo == "all" else [args.algo]
    stamp = _stamp(args, n_attributes=table.n_attributes)
    records, cv_rows, train_rows, test_rows = [], [], [], []
    for algo in algos:
        spec = _spec(args, algo)
        if args.protocol == "cv":
            res = cross_validate(spec, table, args.k, args.seed, args.jobs)
            cv_rows.append((algo, res.metrics))
            records.append({"algorithm": algo, "protocol": "cv", "k": args.k, "seed": args.seed,
                            **res.metrics.as_dict(), "confusion": res.matrix.tolist()})
        else:
            plan = SplitPlan(args.train_fraction, args.repeats, args.seed)
            rep = split_eval(spec, table, plan, args.jobs)
            train_rows.append((algo, rep.train.mean))
            test_rows.append((algo, rep.test.mean))
            for side, part in (("train", rep.train), ("test", rep.test)):
                records.append({"algorithm": algo, "protocol": "split", "side": side, "seed": args.seed,
                                "train_fraction": plan.train_fraction, "repeats": plan.repeats,
                                **part.mean.as_dict(),
                                "per_repeat_accuracy": [m.accuracy for m in part.per_repeat]})
    with _output(args.out) as fh:
        if args.format == "structured":
            write_structured(records, fh)
        elif args.protocol == "cv":
            fh.write(format_metrics_table(cv_rows, f"{args.k}-fold cross-validation ({table.mode})", stamp))
        else:
            pct = int(round(args.train_fraction * 100))
            fh.write(format_metrics_table(train_rows, f"Training side, {pct}% split x {args.repeats}", stamp))
            fh.write("\n")
            fh.write(format_metrics_table(test_rows, f"Test side, {100 - pct}% held out x {args.repeats}"))
    return EXIT_OK


def cmd_monitor(args) -> int:
    with open(args.model, encoding="utf-8") as fh:
        model = load_model(fh)
    if args.events in (None, "-"):
        if args.events is None and os.environ.get(DATA_DIR_ENV):
            path = Path(os.environ[DATA_DIR_ENV]) / synth.EVENTS_FILE
            with open(path, encoding="utf-8", newline="") as fh:
                parsed = parse_labevents(fh)
        elif args.events is None:
            raise UsageError(f"--events is required (or set {DATA_DIR_ENV})")
        else:
            parsed = parse_labevents(sys.stdin)
    else:
        with open(args.events, encoding="utf-8", newline="") as fh:
            parsed = parse_labevents(fh)
    mon = Monitor(model, args.threshold, args.suppress)
    stamp = _stamp(args, mode=model.mode, algorithm=model.spec.algorithm, model_seed=model.spec.seed)
    with _output(args.out) as fh:
        n = write_warnings(mon.replay(parsed.events), fh, comments=stamp)
    if args.summary:
        with _output(args.summary) as fh:
            for line in stamp:
                fh.write(f"# {line}\n")
            write_summary(mon, fh)
    log.info("%d warnings for %d patients", n, len(mon.states))
    return EXIT_OK


def cmd_synth(args) -> int:
    if not 0 <= args.informative <= args.n_items:
        raise UsageError("--informative must lie in [0, --n-items]")
    corpus = synth.synth_corpus(args.patients, args.n_items, args.informative, seed=args.seed)
    paths = synth.write_corpus(corpus, args.out)
    print(f"wrote {corpus.n_events} events for {args.patients} patients to {paths[synth.EVENTS_FILE].parent}"
          f" (seed={args.seed})")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest, "rank": cmd_rank, "sweep": cmd_sweep, "train": cmd_train,
    "eval": cmd_eval, "monitor": cmd_monitor, "synth": cmd_synth,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"labmine: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, SchemaError, SchemaMismatch, FileNotFoundError, ValueError, KeyError, OSError) as exc:
        print(f"labmine: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
