"""Command-line front end.

Every command reads an optional JSON config, writes one CSV to ``--out`` and a
``<out>.meta.json`` sidecar holding the tool version, master seed and config
hash. Exit status is 0 on success, 1 on invalid input and 2 when a run fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .datasets import _fmt, dataset_to_csv, estimates_to_csv, read_dataset
from .simlab.experiments import (
    benchmark_suite,
    embedding_sweep,
    fe_landscapes,
    mismatch_sweep,
    observer_config,
    quadrant_analysis,
    records_to_csv,
    run_method,
)

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2
ESTIMATE_METHODS = {"dems": "DEMs", "dem": "DEM-fixed", "kf": "KF", "sa": "SA", "smikf": "SMIKF"}
JOBS_ENV = "DEMS_LAB_JOBS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; we reserve 2 for run failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output CSV path (overrides the config's 'out')")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--jobs", type=int, help=f"worker processes (default: ${JOBS_ENV} or 1)")
    common.add_argument("--timing", action="store_true", help="write runtimes (breaks byte reproducibility)")

    parser = _Parser(prog="dems-lab", description="Smoothness-learning state observer workbench.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate the scenario and write a dataset CSV")
    est = sub.add_parser("estimate", parents=[common], help="run one estimator on a dataset CSV")
    est.add_argument("--method", required=True, choices=sorted(ESTIMATE_METHODS))
    est.add_argument("--data", required=True, help="dataset CSV to read")
    sub.add_parser("benchmark", parents=[common], help="all methods over smoothness values and seeds")
    sub.add_parser("sweep-embedding", parents=[common], help="fixed-smoothness DEM per embedding order")
    sub.add_parser("sweep-mismatch", parents=[common], help="fixed-smoothness DEM per assumed smoothness")
    sub.add_parser("landscape", parents=[common], help="free energy over a smoothness grid")
    sub.add_parser("quadrant", parents=[common], help="quadrant counts of the precision-gradient forms")
    return parser


def _jobs(arg) -> int:
    raw = arg if arg is not None else os.environ.get(JOBS_ENV, "1")
    try:
        jobs = int(raw)
    except ValueError:
        raise UsageError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise UsageError("jobs must be >= 1")
    return jobs


def _suite_kwargs(cfg: RunConfig, jobs: int) -> dict:
    return dict(master_seed=cfg.seed, T=cfg.T, dt=cfg.dt, jobs=jobs, options=cfg.observer_options())


def _counts_csv(counts: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    keys = ["q1", "q2", "q3", "q4", "axis"]
    writer.writerow(keys + ["total"])
    writer.writerow([counts[k] for k in keys] + [sum(counts[k] for k in keys)])
    return buf.getvalue()


def _landscape_csv(landscapes) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t_eval", "s", "F"])
    for ls in landscapes:
        for s, F in zip(ls.s_grid, ls.F):
            writer.writerow([_fmt(ls.t_eval), _fmt(s), _fmt(F)])
    return buf.getvalue()


def _prepare(args, cfg: RunConfig):
    """Validate everything the command needs; return a thunk producing ``(csv_text, summary)``."""
    jobs = _jobs(args.jobs)
    sc = cfg.build_scenario()
    cmd = args.command

    if cmd == "simulate":
        s_real = cfg.require_s_real()

        def run():
            ds = sc.simulate(s_real, cfg.seed)
            return dataset_to_csv(ds), {"samples": ds.N}
        return run

    if cmd == "estimate":
        method = ESTIMATE_METHODS[args.method]
        s_real = cfg.s_init if method == "DEMs" and cfg.s_real is None else cfg.require_s_real()
        ds = read_dataset(args.data, {"scenario": sc.name}, dt=sc.dt)
        plant = sc.plant
        if (ds.m, ds.r) != (plant.m, plant.r):
            raise UsageError(f"dataset has {ds.m} outputs and {ds.r} inputs, plant expects {plant.m} and {plant.r}")

        def run():
            res = run_method(method, ds, sc, s_real, options=cfg.observer_options())
            summary = {"method": method, "sse": None if np.isnan(res.sse) else res.sse}
            if res.s_traj is not None:
                summary["s_final"] = float(res.s_traj[-1])
            return estimates_to_csv(ds.times, res), summary

        return run

    if cmd == "benchmark":
        def run():
            recs = benchmark_suite(sc, cfg.s_values, cfg.seeds, cfg.methods, p=cfg.p, d=cfg.d,
                                   **_suite_kwargs(cfg, jobs))
            return records_to_csv(recs, timing=args.timing), {"records": len(recs)}
        return run

    if cmd == "sweep-embedding":
        def run():
            recs = embedding_sweep(sc, cfg.p_values, cfg.s_values, cfg.seeds, d=cfg.d, **_suite_kwargs(cfg, jobs))
            return records_to_csv(recs, timing=args.timing), {"records": len(recs)}
        return run

    if cmd == "sweep-mismatch":
        def run():
            recs = mismatch_sweep(sc, cfg.assumed_grid, cfg.s_values, cfg.seeds, p=cfg.p, d=cfg.d,
                                  **_suite_kwargs(cfg, jobs))
            return records_to_csv(recs, timing=args.timing, assumed=True), {"records": len(recs)}
        return run

    if cmd == "landscape":
        s_real = cfg.require_s_real()
        grid = cfg.s_grid if cfg.s_grid is not None else np.round(np.arange(1, 41) * 0.025, 10)
        dt = sc.dt
        for t in cfg.t_eval:
            if not 0 <= t <= sc.T:
                raise ConfigError("t_eval", f"{t} lies outside [0, T={sc.T}]")

        def run():
            ds = sc.simulate(s_real, cfg.seed)
            ocfg = observer_config(sc, s_real, dt, **cfg.observer_options())
            ls = fe_landscapes(ds, ocfg, grid, cfg.t_eval)
            return _landscape_csv(ls), {"argmax": [x.argmax for x in ls]}
        return run

    if cmd == "quadrant":
        n, m = sc.plant.n, sc.plant.m

        def run():
            res = quadrant_analysis(cfg.sample_count, cfg.seed, cfg.p, n, m)
            return _counts_csv(res.counts), dict(res.counts)
        return run

    raise UsageError(f"unknown command {cmd!r}")


def _write_outputs(out: Path, text: str, cfg: RunConfig, command: str, summary: dict):
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    meta = {
        "tool": "dems-lab",
        "version": __version__,
        "command": command,
        "master_seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "summary": summary,
    }
    Path(f"{out}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out=args.out)
        if cfg.out is None:
            raise ConfigError("out", "an output path is required (--out or config 'out')")
        task = _prepare(args, cfg)
    except (ConfigError, UsageError, ValueError, OSError) as exc:
        print(f"dems-lab {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        text, summary = task()
        _write_outputs(Path(cfg.out), text, cfg, args.command, summary)
    except Exception as exc:  # noqa: BLE001 - any failure during the run maps to one exit status
        print(f"dems-lab {args.command}: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    print(json.dumps({"command": args.command, "out": cfg.out, **summary}, sort_keys=True))
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
