"""Command-line interface: ``sip-accel {run,compare,verify,list-problems}``.

Exit codes: 0 success, 1 runtime failure (or failed verification), 2
rejected configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .core import ConfigurationError, ContractError
from .harness import (
    METHODS,
    cmd_compare,
    cmd_run,
    cmd_verify,
    make_config,
    read_config_file,
)
from .problems import PROBLEMS, build_problem, reference_f_star
from .schedules import REGIMES

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _add_common(p, multi_method=False):
    p.add_argument("--config", action="append", default=[],
                   help="INI configuration file (repeatable for compare)")
    p.add_argument("--problem", choices=sorted(PROBLEMS))
    if multi_method:
        p.add_argument("--method", help="comma-separated methods, one configuration each")
    else:
        p.add_argument("--method", choices=METHODS)
    p.add_argument("--regime", choices=REGIMES)
    p.add_argument("--k0", type=int)
    p.add_argument("--K", type=int, dest="K")
    p.add_argument("--tau", type=float)
    p.add_argument("--tau-prime", type=float, dest="tau_prime")
    p.add_argument("--lambda-bound", type=float, dest="lambda_bound")
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", help="std (all oracles) or std_f,std_g,std_gprime")
    p.add_argument("--reps", type=int, dest="repetitions")
    p.add_argument("--six-sample", action="store_const", const=False, dest="three_sample",
                   help="draw six independent samples per iteration")
    p.add_argument("--record-every", type=int, dest="record_every")
    p.add_argument("--C", type=float, dest="C", help="SIP-CoM step constant")
    p.add_argument("--delta", type=float, help="SIP-CoM tolerance constant")
    p.add_argument("--tol", type=float, help="exchange stopping tolerance")
    p.add_argument("--max-rounds", type=int, dest="max_rounds")
    p.add_argument("--clock", choices=("wall", "model"))
    p.add_argument("--out")


_FLAG_NAMES = ("problem", "method", "regime", "k0", "K", "tau", "tau_prime", "lambda_bound",
               "seed", "noise", "repetitions", "three_sample", "record_every", "C", "delta",
               "tol", "max_rounds", "clock", "out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sip-accel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_common(sub.add_parser("run", help="run one configuration"))
    _add_common(sub.add_parser("compare", help="run several configurations on one problem"),
                multi_method=True)
    _add_common(sub.add_parser("verify", help="check the schedule's structural conditions"))
    lp = sub.add_parser("list-problems", help="list the registered instances")
    lp.add_argument("--seed", type=int, default=0)
    return parser


def _flags(args) -> dict:
    return {k: getattr(args, k) for k in _FLAG_NAMES if getattr(args, k, None) is not None}


def _configs(args, multi=False) -> list:
    flags = _flags(args)
    files = [read_config_file(p) for p in args.config] or [{}]
    if multi and len(files) > 1 and flags.get("method") and "," in flags["method"]:
        raise ConfigurationError("use either several --config files or a --method list")
    if multi and flags.get("method"):
        methods = [m for m in flags.pop("method").split(",") if m]
        if len(files) == 1:
            return [make_config(files[0], {**flags, "method": m}) for m in methods]
        flags["method"] = methods[0]
    return [make_config(f, flags) for f in files]


def _print_summary(summary: dict) -> None:
    for key in sorted(summary):
        print(f"{key:<22s} {summary[key]}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list-problems":
            for name in sorted(PROBLEMS):
                prob = build_problem(name, args.seed)
                info = prob.describe()
                info["lower_level"] = prob.lower_level
                info["f_star"] = reference_f_star(name, args.seed)
                print(json.dumps(info, sort_keys=True))
            return EXIT_OK
        if args.command == "run":
            (cfg,) = _configs(args)
            outcome = cmd_run(cfg)
            _print_summary(outcome.summary)
            return EXIT_OK
        if args.command == "compare":
            cfgs = _configs(args, multi=True)
            out = args.out or cfgs[0].out
            cfgs = [replace(c, out=out) for c in cfgs]
            outcomes = cmd_compare(cfgs, out)
            for o in outcomes:
                s = o.summary
                print(f"{s['label']:<28s} final_f {s['final_f']:.6g}  "
                      f"violation {s['final_violation']:.3e}  iterations {s['iterations']}")
            return EXIT_OK
        if args.command == "verify":
            (cfg,) = _configs(args)
            params, report = cmd_verify(cfg)
            print(f"regime {params.regime}  K={params.K}  k0={params.k0}  "
                  f"tau_prime={params.tau_prime:.6g}  tau={params.tau:.6g}")
            for line in report.lines():
                print(line)
            print("all asserted conditions hold" if report.passed
                  else f"FAILED: {', '.join(report.failures)}")
            return EXIT_OK if report.passed else EXIT_RUNTIME
    except (ConfigurationError, ContractError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report any solver failure as a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
