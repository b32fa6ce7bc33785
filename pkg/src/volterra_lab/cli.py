"""Command-line entry point.

    volterra-lab <subcommand> [--config file.json] [--seed N] [--out file.csv]
                 [--threads N] [--allow-subcritical] [--set key=value ...]

Subcommands are the experiment names.  Exit codes: 0 success, 1 parameter
error (bad arguments, bad config, out-of-range model parameters), 2 numerical
failure (divergence, exclusion threshold, degenerate data).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .errors import (ConstructionError, DomainError, NumericalError,
                     ParameterError)
from .experiments import (EXPERIMENTS, ExperimentConfig, load_config,
                          render_csv, run_experiment)

_USAGE_ERROR = 1
_NUMERICAL_ERROR = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad usage; the CLI contract reserves 2
    # for numerical failures, so route usage problems to exit code 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(_USAGE_ERROR)


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ParameterError(f"--set needs key=value; got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volterra-lab",
                     description="singular-kernel stochastic Volterra lab")
    sub = parser.add_subparsers(dest="experiment", metavar="subcommand")
    for name in EXPERIMENTS:
        s = sub.add_parser(name, prog=f"volterra-lab {name}")
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--seed", type=int, help="master seed")
        s.add_argument("--out", help="CSV output path (default stdout)")
        s.add_argument("--threads", type=int, default=1,
                       help="worker threads (results do not depend on this)")
        s.add_argument("--allow-subcritical", action="store_true",
                       help="run probes below the uniqueness threshold")
        s.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override one parameter (repeatable)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return _USAGE_ERROR
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config:
            cfg = load_config(args.config)
            if cfg.experiment != args.experiment:
                raise ParameterError(
                    f"config is for experiment {cfg.experiment!r} but the "
                    f"subcommand is {args.experiment!r}"
                )
            params = dict(cfg.parameters)
        else:
            params = {}
        params.update(_parse_set(args.set))
        if args.seed is not None:
            params["seed"] = args.seed
        if args.allow_subcritical:
            params["allow_subcritical"] = True
        cfg = ExperimentConfig(experiment=args.experiment, parameters=params)
        rows = run_experiment(cfg, threads=args.threads)
        text = render_csv(rows)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    except (ParameterError, DomainError, ConstructionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return _NUMERICAL_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
