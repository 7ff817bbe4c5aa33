"""Command-line workflows: simulate, sweep, stats, bounds, compare."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analytics, io, stats, sweep
from .errors import SpecmarketError
from .market import run


def _add_common(parser, threads=False, needs_config=True):
    if needs_config:
        parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of the tabular outputs")
    if threads:
        parser.add_argument("--threads", type=int, default=1, help="parallel workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specmarket",
        description="Speculative-market simulator and analysis toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one market and write its artifact files")
    _add_common(p)

    p = sub.add_parser("sweep", help="run a parameter grid and write node aggregates")
    _add_common(p, threads=True)

    p = sub.add_parser("stats", help="re-analyze a stored run.csv")
    p.add_argument("--input", required=True, help="run.csv produced by simulate")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="accepted for interface symmetry")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("bounds", help="emit the analytic variance-bound table")
    p.add_argument("--states", type=int, required=True, help="strategy-space dimension D")
    p.add_argument("--alphas", required=True,
                   help="comma-separated alpha = D/N_s values, e.g. 0.03125,0.0625,...,8")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="accepted for interface symmetry")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("compare", help="overlay a model run with an empirical daily series")
    _add_common(p)
    p.add_argument("--empirical", required=True, help="two-column date/close text file")
    return parser


def cmd_simulate(args) -> int:
    config = io.parse_market_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    record = run(config)
    files = io.write_run_artifact(args.out, config, record)
    print(f"wrote {len(files)} files to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    spec = io.parse_sweep_spec(args.config)
    if args.seed is not None:
        spec = replace(spec, base=replace(spec.base, seed=args.seed))
    result = sweep.run_sweep(spec, workers=args.threads)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    chash = io.config_hash(spec.base)
    axis_names = [axis.name for axis in spec.axes]

    rows = []
    for node in result.nodes:
        for metric in spec.metrics:
            rows.append({
                **{name: node.coords[name] for name in axis_names},
                "metric": metric,
                "value": node.aggregates[metric] if node.valid else None,
                "n_runs": node.n_success,
            })
    if args.format == "json":
        payload = {
            "format": io.FORMAT_VERSION, "config_hash": chash,
            "base_seed": result.base_seed, "repetitions": result.repetitions,
            "grid": rows,
            "failures": [
                {"node": node.index, "repetition": i, "reason": rep.error}
                for node in result.nodes for i, rep in enumerate(node.reps) if rep.error
            ],
        }
        (outdir / "grid.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    else:
        lines = [io._header(chash)]
        lines.append(",".join(axis_names + ["metric", "value", "n_runs"]) + "\n")
        for row in rows:
            value = "" if row["value"] is None or not np.isfinite(row["value"]) else repr(row["value"])
            lines.append(",".join(
                [repr(float(row[name])) for name in axis_names]
                + [row["metric"], value, str(row["n_runs"])]) + "\n")
        (outdir / "grid.csv").write_text("".join(lines))
    n_failed = sum(1 for node in result.nodes for rep in node.reps if rep.error)
    print(f"sweep: {len(result.nodes)} nodes x {spec.repetitions} repetitions, {n_failed} failed")
    return 0


def cmd_stats(args) -> int:
    data = io.read_run_csv(args.input)
    window = io.post_transient(data["returns"])
    analysis = io.analyze_returns(window)
    reduction = stats.reduction_ratio(np.abs(data["returns"]), 10, window.size)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    chash = data["config_hash"]
    io._write_columns(outdir / "ccdf.csv", chash, ("x", "ccdf"),
                      (analysis.ccdf.values, analysis.ccdf.probabilities))
    io._write_columns(outdir / "autocorr.csv", chash, ("lag", "autocorr"),
                      (np.arange(analysis.autocorr.size), analysis.autocorr))
    summary = {
        "format": io.FORMAT_VERSION,
        "config_hash": chash,
        "variance": float(np.var(window)),
        "reduction": reduction,
        "analysis": analysis.summary(),
    }
    (outdir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"stats: analyzed {analysis.n} post-transient returns from {args.input}")
    return 0


def cmd_bounds(args) -> int:
    try:
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    except ValueError:
        raise SpecmarketError(f"--alphas must be comma-separated numbers, got {args.alphas!r}")
    curve = analytics.variance_curve(args.states, alphas)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        payload = {
            "format": io.FORMAT_VERSION, "states": args.states,
            "bounds": [vars(b) for b in curve],
        }
        (outdir / "bounds.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    else:
        lines = [f"# specmarket-format: {io.FORMAT_VERSION}\n# states: {args.states}\n",
                 "alpha,n_speculators,lower,heuristic,upper\n"]
        for b in curve:
            n_spec = max(1, round(args.states / b.alpha))
            lines.append(f"{b.alpha!r},{n_spec},{b.lower!r},{b.heuristic!r},{b.upper!r}\n")
        (outdir / "bounds.csv").write_text("".join(lines))
    print(f"bounds: {len(curve)} alpha values at D = {args.states}")
    return 0


def cmd_compare(args) -> int:
    config = io.parse_market_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    empirical = io.load_empirical(args.empirical)
    emp_returns = empirical.log_returns()

    record = run(config)
    window = io.post_transient(record.returns)
    if window.size < emp_returns.size:
        raise SpecmarketError(
            f"model has {window.size} post-transient returns but the empirical series has "
            f"{emp_returns.size}; increase market.horizon to at least {4 * emp_returns.size}"
        )
    window = window[: emp_returns.size]  # match lengths for a fair comparison

    model = io.analyze_returns(window)
    emp = io.analyze_returns(emp_returns)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    chash = io.config_hash(config)
    io._write_columns(outdir / "compare_ccdf.csv", chash,
                      ("ccdf", "model_x", "empirical_x"),
                      (model.ccdf.probabilities, model.ccdf.values, emp.ccdf.values))
    max_lag = min(model.autocorr.size, emp.autocorr.size) - 1
    io._write_columns(outdir / "compare_autocorr.csv", chash,
                      ("lag", "model_autocorr", "empirical_autocorr"),
                      (np.arange(max_lag + 1), model.autocorr[: max_lag + 1], emp.autocorr[: max_lag + 1]))
    summary = {
        "format": io.FORMAT_VERSION,
        "config_hash": chash,
        "n_compared": int(emp_returns.size),
        "model": model.summary(),
        "empirical": emp.summary(),
    }
    (outdir / "compare_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"compare: {emp_returns.size} returns per curve")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "stats": cmd_stats,
    "bounds": cmd_bounds,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SpecmarketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
