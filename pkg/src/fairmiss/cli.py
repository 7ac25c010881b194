"""Command-line entry point: ``fairmiss <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .datasets import schema_for, validate_dataset
from .fairness import METRICS
from .harness.config import ConfigError, ExperimentConfig, load_config, save_config
from .harness.plots import LAYOUTS, PlotError, emit_boxplots, normalize_layout
from .harness.report import emit_anova_report
from .harness.runner import ExperimentError, run_baseline, run_experiment
from .harness.store import ResultsStore, baseline_from_csv, baseline_to_csv
from .harness.summary import FACTORS, SummaryError, render_summary, summarize

RESULTS = "results.csv"
BASELINE = "baseline.csv"


def _sensitive(value: str | None):
    return None if value is None else tuple(v for v in value.split(",") if v)


def _config(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.dataset and args.dataset != cfg.dataset:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "dataset": args.dataset})
    elif args.dataset:
        cfg = ExperimentConfig(dataset=args.dataset, data_path=args.data)
    else:
        raise ConfigError("give --config or --dataset")
    return cfg.with_overrides(
        seed=args.seed,
        output_dir=args.out,
        sensitive=_sensitive(args.sensitive),
        iterations=args.iterations,
        threads=args.threads,
        data_path=args.data,
    )


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--dataset", help="dataset id (german, adult, compas, synthetic)")
    p.add_argument("--data", help="path to the dataset CSV")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--sensitive", help="sensitive variant(s), comma separated")
    p.add_argument("--iterations", type=int)
    p.add_argument("--threads", type=int, help="worker processes for iterations")


def _results_path(args) -> Path:
    if args.results:
        return Path(args.results)
    return Path(args.out or "results") / RESULTS


def cmd_run(args) -> int:
    cfg = _config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    result = run_experiment(cfg)
    result.store.to_csv(out / RESULTS)
    failures = [f.__dict__ for f in result.failures]
    (out / "failures.json").write_text(json.dumps(failures, indent=2) + "\n", encoding="utf-8")
    rows = summarize(result.store, ["mechanism", "handler", "model", "sensitive", "metric"])
    (out / "summary.json").write_text(
        json.dumps([r.to_dict(["mechanism", "handler", "model", "sensitive", "metric"]) for r in rows], indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"{len(result.store)} records -> {out / RESULTS} ({len(result.failures)} failed cells)")
    if cfg.baseline:
        baseline_to_csv(run_baseline(cfg), out / BASELINE)
        print(f"baseline -> {out / BASELINE}")
    return 0


def cmd_baseline(args) -> int:
    cfg = _config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = run_baseline(cfg)
    baseline_to_csv(records, out / BASELINE)
    for r in records:
        print(f"{r.model:6s} {r.sensitive:8s} {r.metric:4s} mean={r.mean:.4f} sd={r.sd:.4f}")
    return 0


def cmd_summarize(args) -> int:
    store = ResultsStore.from_csv(_results_path(args))
    by = [f for f in args.by.split(",") if f]
    rows = summarize(store, by, absolute=args.abs)
    print(render_summary(rows, by))
    if args.json:
        Path(args.json).write_text(json.dumps([r.to_dict(by) for r in rows], indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_report(args) -> int:
    path = _results_path(args)
    store = ResultsStore.from_csv(path)
    out = Path(args.out) if args.out else path.parent
    txt, js = emit_anova_report(store, out)
    print(txt.read_text(encoding="utf-8"), end="")
    print(f"-> {txt}, {js}")
    return 0


def cmd_plot(args) -> int:
    path = _results_path(args)
    store = ResultsStore.from_csv(path)
    layout = normalize_layout(args.layout)
    select = {k: v for k, v in (("mechanism", args.mechanism), ("model", args.model)) if v}
    baseline = baseline_from_csv(args.baseline) if args.baseline else None
    target = Path(args.svg) if args.svg else path.parent / (
        f"box_{'hm' if layout == LAYOUTS[0] else 'mh'}_{args.metric}"
        + "".join(f"_{v}" for v in select.values()) + (f"_{args.sensitive}" if args.sensitive else "") + ".svg"
    )
    svg, side = emit_boxplots(store, layout, args.metric, target, args.sensitive, select, baseline)
    print(f"-> {svg}, {side}")
    return 0


def cmd_validate(args) -> int:
    schema = schema_for(args.dataset)
    if not args.data:
        raise ConfigError("validate-data needs --data")
    report = validate_dataset(args.data, schema)
    print(report.render())
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairmiss", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the mechanism x handler x model grid")
    _add_run_flags(run)
    run.set_defaults(func=cmd_run)

    base = sub.add_parser("baseline", help="metrics on complete training data")
    _add_run_flags(base)
    base.set_defaults(func=cmd_baseline)

    summ = sub.add_parser("summarize", help="per-group descriptive statistics")
    summ.add_argument("--results", help="results CSV (default <out>/results.csv)")
    summ.add_argument("--out")
    summ.add_argument("--by", default="handler,metric", help=f"factors from {','.join(FACTORS)}")
    summ.add_argument("--abs", action="store_true", help="|value| for fairness metrics")
    summ.add_argument("--json", help="also write the summary as JSON")
    summ.set_defaults(func=cmd_summarize)

    rep = sub.add_parser("report", help="three-way ANOVA report (text + JSON)")
    rep.add_argument("--results")
    rep.add_argument("--out")
    rep.set_defaults(func=cmd_report)

    plot = sub.add_parser("plot", help="SVG boxplots with a JSON sidecar")
    plot.add_argument("--results")
    plot.add_argument("--out")
    plot.add_argument("--layout", default="handler-model", help="handler-model or mechanism-handler")
    plot.add_argument("--metric", default="dp", choices=METRICS)
    plot.add_argument("--sensitive")
    plot.add_argument("--mechanism", help="restrict to one mechanism")
    plot.add_argument("--model", help="restrict to one model")
    plot.add_argument("--baseline", help="baseline CSV for the blue bands")
    plot.add_argument("--svg", help="output file")
    plot.set_defaults(func=cmd_plot)

    val = sub.add_parser("validate-data", help="check a dataset file against its schema")
    val.add_argument("--dataset", required=True)
    val.add_argument("--data")
    val.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ExperimentError, PlotError, SummaryError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
