"""Command-line entry point.

Verbs:

* ``run <config>``: execute one experiment and write its outputs.
* ``sweep <config> --kappa K1 K2 ...``: repeat the experiment across
  condition numbers with identical seeds.
* ``validate <suite>``: run a built-in validation suite; the exit code
  reflects the outcome.
* ``replay <config> --trial I``: re-run one trial by index and dump its
  per-round trace.

Flags override config keys (flag > config file > default).
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import AirfedError
from .harness import load_config, replay_trial, run_experiment, sweep_kappa
from .validation import SUITES, validate


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="override the run seed")
    parser.add_argument("--out", type=str, default=None,
                        help="override the output directory")
    parser.add_argument("--jobs", type=int, default=1,
                        help="number of concurrent trial workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airfed",
        description="Analog federated learning over a noisy fading MAC")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("config")
    _add_common(p_run)
    p_run.add_argument("--dump-trials", action="store_true",
                       help="also write per-trial trace CSVs")

    p_sweep = sub.add_parser("sweep", help="sweep the condition number")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--kappa", type=float, nargs="+", required=True,
                         help="condition numbers to sweep")
    _add_common(p_sweep)

    p_val = sub.add_parser("validate", help="run a validation suite")
    p_val.add_argument("suite", choices=SUITES)
    p_val.add_argument("--seed", type=int, default=1)

    p_replay = sub.add_parser("replay", help="re-run a single trial")
    p_replay.add_argument("config")
    p_replay.add_argument("--trial", type=int, required=True)
    _add_common(p_replay)

    return parser


def _overrides(args) -> dict:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides[("run", "seed")] = args.seed
    if getattr(args, "out", None) is not None:
        overrides[("run", "output_dir")] = args.out
    if getattr(args, "dump_trials", False):
        overrides[("run", "dump_trials")] = "true"
    return overrides


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config, _overrides(args))
            result = run_experiment(cfg, jobs=args.jobs)
            print(f"wrote {cfg.output_dir}/result.csv "
                  f"(final mean gap {result.final_mean_gap:.6g})")
            return 0
        if args.command == "sweep":
            cfg = load_config(args.config, _overrides(args))
            results = sweep_kappa(cfg, args.kappa, jobs=args.jobs)
            for r in results:
                print(f"{r.label}: final mean gap {r.final_mean_gap:.6g}")
            return 0
        if args.command == "validate":
            report = validate(args.suite, seed=args.seed)
            print(report.render())
            return 0 if report.passed else 1
        if args.command == "replay":
            cfg = load_config(args.config, _overrides(args))
            out_dir = cfg.output_dir
            os.makedirs(out_dir, exist_ok=True)
            out_path = os.path.join(out_dir, f"trial_{args.trial}.csv")
            trace = replay_trial(cfg, args.trial, out_path)
            print(f"wrote {out_path} (final gap {trace.final_gap:.6g})")
            return 0
    except AirfedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
