"""Command-line entry point.

Subcommands: ``run`` (one config), ``sweep`` (seed/parameter grids),
``regret`` (allocation-only rounds), ``verify`` (self-check suites),
``export`` (JSONL trace -> CSV).  Exit codes: 0 ok, 2 config error,
3 budget exceeded, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ArenaError, BudgetExceededError, ConfigError
from .harness import (ExperimentConfig, emit_csv, parse_grid,
                      run_experiment, sweep)
from .simcore import Trace
from .verify import SUITES, run_suite


def _parse_seeds(spec: str) -> list[int]:
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in spec.split(",")]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="asgd-arena")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None, help="CSV path (overrides config)")
    p_run.add_argument("--trace", default=None, help="JSONL trace path")

    p_sweep = sub.add_parser("sweep", help="cross seeds and parameter grids")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--grid", action="append", default=[],
                         help="e.g. gamma=5^-5..5 or R=1,2,5,20")
    p_sweep.add_argument("--seeds", default="0")
    p_sweep.add_argument("--out", required=True)

    p_regret = sub.add_parser("regret", help="allocation-only experiment")
    p_regret.add_argument("--config", required=True)
    p_regret.add_argument("--seed", type=int, default=None)
    p_regret.add_argument("--out", required=True)

    p_verify = sub.add_parser("verify", help="run invariant/lemma check suites")
    p_verify.add_argument("--suite", default="all", choices=["all", *SUITES])
    p_verify.add_argument("--trials", type=int, default=None)

    p_export = sub.add_parser("export", help="re-serialize a JSONL trace as CSV")
    p_export.add_argument("--trace", required=True)
    p_export.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except BudgetExceededError as exc:
        print(f"error: budget: {exc}", file=sys.stderr)
        return 3
    except ArenaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.cmd == "run":
        cfg = ExperimentConfig.from_toml(args.config)
        trace = Trace() if args.trace else None
        rec, _ = run_experiment(cfg, seed=args.seed, trace=trace)
        out = args.out or cfg.output.get("csv")
        if not out:
            raise ConfigError("no CSV output path given (config [output].csv or --out)")
        emit_csv([rec], out)
        if args.trace:
            trace.save(args.trace)
        print(f"wrote {out} ({len(rec.rows)} rows, k={rec.final_k}, "
              f"t={rec.final_time:.6g}, stop={rec.stop_reason})")
        return 0
    if args.cmd == "sweep":
        cfg = ExperimentConfig.from_toml(args.config)
        grids = [parse_grid(g) for g in args.grid]
        seeds = _parse_seeds(args.seeds)
        recs = sweep(cfg, grids, seeds)
        emit_csv(recs, args.out)
        print(f"wrote {args.out} ({len(recs)} runs)")
        return 0
    if args.cmd == "regret":
        cfg = ExperimentConfig.from_toml(args.config)
        rec, _ = run_experiment(cfg, seed=args.seed)
        emit_csv([rec], args.out)
        print(f"wrote {args.out} ({len(rec.rows)} rows)")
        return 0
    if args.cmd == "verify":
        results = run_suite(args.suite, args.trials)
        failed = 0
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
            failed += 0 if ok else 1
        return 4 if failed else 0
    if args.cmd == "export":
        rows = []
        with open(args.trace) as fh:
            for line in fh:
                rows.append(json.loads(line))
        header = ["t", "worker", "k_computed_at", "k_current", "action"]
        with open(args.out, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(str(row.get(h, "")) for h in header) + "\n")
        print(f"wrote {args.out} ({len(rows)} events)")
        return 0
    raise ConfigError(f"unknown command {args.cmd!r}")


if __name__ == "__main__":
    sys.exit(main())
