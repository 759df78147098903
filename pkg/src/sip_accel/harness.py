"""Benchmark harness: run configurations, trace files, summaries and plots.

A run is described by a :class:`RunConfig`.  Configurations come from an
INI file (sections ``[problem]``, ``[method]``, ``[schedule]``,
``[output]``), overridden by command-line flags; unspecified schedule
hyperparameters default to :func:`sip_accel.schedules.recommended_params`.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import agsip, sgsip
from .baselines import InnerSolverConfig, SipComConfig, exchange_solve, sipcom_solve
from .certify import max_violation
from .core import ConfigurationError, ContractError
from .problems import NoiseModel, build_problem, make_stochastic, reference_f_star
from .schedules import (
    REGIMES,
    ScheduleParams,
    check_params,
    recommended_params,
    theorem_bounds,
    verify_conditions,
)

METHODS = ("agsip", "sgsip", "exchange", "sipcom")
CLOCKS = ("wall", "model")
# modeled cost of one scalar-constraint or objective oracle evaluation
MODEL_SECONDS_PER_CALL = 1e-6


@dataclass(frozen=True)
class RunConfig:
    problem: str = "toy1"
    seed: int = 0
    noise: tuple = (0.0, 0.0, 0.0)
    method: str = "agsip"
    regime: str | None = None
    K: int = 1000
    k0: int | None = None
    tau: float | None = None
    tau_prime: float | None = None
    lambda_bound: float = 10.0
    record_every: int = 10
    repetitions: int = 1
    three_sample: bool = True
    C: float | None = None
    delta: float | None = None
    tol: float = 1e-3
    max_rounds: int = 200
    init_samples: int = 100
    inner: str = "slsqp"
    clock: str = "wall"
    out: str = "out"

    def validate(self) -> "RunConfig":
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.regime is not None and self.regime not in REGIMES:
            raise ConfigurationError(f"unknown regime {self.regime!r}; choose from {REGIMES}")
        if self.clock not in CLOCKS:
            raise ConfigurationError(f"unknown clock {self.clock!r}; choose from {CLOCKS}")
        if len(self.noise) != 3 or any(not s >= 0 for s in self.noise):
            raise ConfigurationError("noise must be three standard deviations >= 0")
        if self.K < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        if self.method != "sgsip" and any(self.noise):
            raise ConfigurationError(f"method {self.method} is deterministic; noise must be 0")
        return self

    @property
    def label(self) -> str:
        if self.method in ("agsip", "sgsip"):
            return f"{self.method}-{self.regime}" if self.regime else self.method
        return self.method


# --------------------------------------------------------------------------
# configuration files
# --------------------------------------------------------------------------

_KEYS = {
    "problem": {"name": "problem", "seed": "seed", "noise": "noise"},
    "method": {"name": "method", "repetitions": "repetitions", "three_sample": "three_sample",
               "c": "C", "delta": "delta", "tol": "tol", "max_rounds": "max_rounds",
               "init_samples": "init_samples", "inner": "inner"},
    "schedule": {"regime": "regime", "k": "K", "k0": "k0", "tau": "tau",
                 "tau_prime": "tau_prime", "lambda_bound": "lambda_bound"},
    "output": {"record_every": "record_every", "out": "out", "clock": "clock"},
}
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_noise(text) -> tuple:
    """``"0.05"`` (all three) or ``"std_f,std_g,std_gprime"``."""
    if isinstance(text, (tuple, list)):
        vals = [float(v) for v in text]
    else:
        vals = [float(v) for v in str(text).replace(" ", "").split(",") if v]
    if len(vals) == 1:
        vals = vals * 3
    if len(vals) != 3:
        raise ConfigurationError(f"noise needs 1 or 3 values, got {text!r}")
    return tuple(vals)


def _coerce(name: str, value):
    if value is None:
        return None
    if name == "noise":
        return parse_noise(value)
    kind = _TYPES[name]
    try:
        if "bool" in kind:
            if isinstance(value, bool):
                return value
            v = str(value).strip().lower()
            if v not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return v in ("true", "1", "yes")
        if "int" in kind:
            f = float(value)
            if f != int(f):
                raise ValueError(value)
            return int(f)
        if "float" in kind:
            return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"invalid value {value!r} for {name}") from None
    return str(value)


def read_config_file(path) -> dict:
    """Overrides from an INI file; unknown sections or keys are rejected."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in _KEYS:
            raise ConfigurationError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in _KEYS[section]:
                raise ConfigurationError(f"{path}: unknown key {key!r} in [{section}]")
            name = _KEYS[section][key]
            out[name] = _coerce(name, value)
    return out


def make_config(file_values: dict | None = None, flag_values: dict | None = None) -> RunConfig:
    """Merge defaults, then file values, then flags (later wins)."""
    merged = {}
    for src in (file_values or {}, flag_values or {}):
        merged.update({k: _coerce(k, v) for k, v in src.items() if v is not None})
    return RunConfig(**merged).validate()


def write_config_file(cfg: RunConfig, path) -> None:
    parser = configparser.ConfigParser()
    values = asdict(cfg)
    for section, keys in _KEYS.items():
        parser[section] = {}
        for key, name in keys.items():
            v = values[name]
            if v is None:
                continue
            parser[section][key] = ",".join(repr(float(s)) for s in v) if name == "noise" else str(v)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        parser.write(fh)


# --------------------------------------------------------------------------
# resolving a configuration
# --------------------------------------------------------------------------

def default_regime(problem, method: str, noisy: bool) -> str:
    c = problem.constants
    if method == "sgsip" and noisy:
        return "stochastic"
    if c.mu_f > 0 and c.mu_y > 0:
        return "both_strong"
    if c.mu_f > 0 and (c.L_g_yy > 0 or c.H_g_y > 0):
        return "f_strong_only"
    if c.mu_y > 0:
        return "y_strong_only"
    return "neither"


def resolve_schedule(cfg: RunConfig, problem, consts) -> tuple[RunConfig, ScheduleParams]:
    """Fill unset schedule keys from the recommended parameters, then check the theorem bounds."""
    regime = cfg.regime or default_regime(problem, cfg.method, any(cfg.noise))
    rec = recommended_params(regime, consts, problem.m, cfg.K, cfg.lambda_bound)
    if cfg.k0 is not None and cfg.k0 < 1:
        bound = max(theorem_bounds(rec, consts).get("k0", 1.0), 1.0)
        raise ConfigurationError(f"regime {regime}: k0 = {cfg.k0} is below its lower bound {bound:.6g}")
    params = ScheduleParams(
        regime, cfg.K,
        k0=rec.k0 if cfg.k0 is None else cfg.k0,
        tau_prime=rec.tau_prime if cfg.tau_prime is None else cfg.tau_prime,
        tau=rec.tau if cfg.tau is None else cfg.tau,
        lambda_bound=cfg.lambda_bound,
    )
    check_params(params, consts)
    cfg = replace(cfg, regime=regime, k0=params.k0, tau=params.tau, tau_prime=params.tau_prime)
    return cfg, params


def default_sipcom(problem, cfg: RunConfig) -> SipComConfig:
    strong = problem.constants.mu_f > 0
    if strong:
        return SipComConfig(0.9 if cfg.C is None else cfg.C,
                            2e-3 if cfg.delta is None else cfg.delta, cfg.K, "strong")
    return SipComConfig(0.1 if cfg.C is None else cfg.C,
                        0.1 if cfg.delta is None else cfg.delta, cfg.K, "convex")


class CountingProblem:
    """Proxy that counts oracle evaluations for the modeled clock.

    Batched oracles count one evaluation per constraint or per point.
    """

    _WEIGHTS = {
        "eval_f": lambda self, a: 1, "grad_f": lambda self, a: 1,
        "eval_g": lambda self, a: 1, "grad_x_g": lambda self, a: 1, "grad_y_g": lambda self, a: 1,
        "g_all": lambda self, a: self._base.m, "jac_x_g": lambda self, a: self._base.m,
        "grad_y_all": lambda self, a: self._base.m,
        "eval_g_many": lambda self, a: len(a[2]), "grad_x_g_many": lambda self, a: len(a[2]),
    }

    def __init__(self, base):
        self._base = base
        self.calls = 0

    def __getattr__(self, name):
        attr = getattr(self._base, name)
        weight = self._WEIGHTS.get(name)
        if weight is None:
            return attr

        def counted(*args):
            self.calls += weight(self, (None, *args))
            return attr(*args)

        return counted

    def seconds(self) -> float:
        return self.calls * MODEL_SECONDS_PER_CALL


@dataclass
class RunOutcome:
    config: RunConfig
    trace: agsip.IterateTrace
    x_out: np.ndarray
    summary: dict = field(default_factory=dict)


def execute(cfg: RunConfig) -> RunOutcome:
    """Run one configuration.  Configuration problems raise :class:`ConfigurationError`."""
    cfg.validate()
    base = build_problem(cfg.problem, cfg.seed)
    certifier = agsip.default_certifier(base)
    if cfg.clock == "model":
        problem = CountingProblem(base)
        timer = problem.seconds
    else:
        problem, timer = base, time.perf_counter
    start = time.perf_counter()
    extra = {}
    if cfg.method == "agsip":
        cfg, params = resolve_schedule(cfg, base, base.constants)
        _warn_conditions(params, base.constants, base.m)
        res = agsip.run(problem, params, record_every=cfg.record_every, certifier=certifier,
                        timer=timer, check=False)
        trace, x_out = res.trace, res.x_bar
    elif cfg.method == "sgsip":
        sp = make_stochastic(problem, NoiseModel(*cfg.noise, seed=cfg.seed))
        cfg, params = resolve_schedule(cfg, base, sp.constants)
        _warn_conditions(params, sp.constants, base.m)
        res = sgsip.run_stoch(sp, params, seed=cfg.seed, record_every=cfg.record_every,
                              certifier=certifier, repetitions=cfg.repetitions,
                              three_sample=cfg.three_sample, timer=timer, check=False)
        trace = res.trace
        x_out = np.mean(res.x_bars, axis=0)
        viols = [max_violation(base, x) for x in res.x_bars]
        fvals = [base.eval_f(x) for x in res.x_bars]
        extra = {"repetitions": cfg.repetitions,
                 "mean_final_f": float(np.mean(fvals)), "std_final_f": float(np.std(fvals)),
                 "mean_final_violation": float(np.mean(viols)),
                 "std_final_violation": float(np.std(viols))}
    elif cfg.method == "exchange":
        res = exchange_solve(problem, cfg.init_samples, cfg.tol, cfg.max_rounds,
                             InnerSolverConfig(cfg.inner), seed=cfg.seed, certifier=certifier,
                             timer=timer)
        trace, x_out = res.trace, res.x
        extra = {"rounds": res.rounds, "converged": res.converged}
    else:
        sc = default_sipcom(base, cfg)
        cfg = replace(cfg, C=sc.C, delta=sc.delta)
        res = sipcom_solve(problem, sc, record_every=cfg.record_every, certifier=certifier,
                           timer=timer)
        trace, x_out = res.trace, res.x_bar
        extra = {"feasible_steps": res.feasible_steps, "any_feasible": res.any_feasible}
    total = time.perf_counter() - start
    f_out = base.eval_f(x_out)
    v_out = max_violation(base, x_out)
    f_star = reference_f_star(cfg.problem, cfg.seed)
    summary = {
        "method": cfg.method, "label": cfg.label, "problem": cfg.problem, "seed": cfg.seed,
        "regime": cfg.regime, "k0": cfg.k0,
        "iterations": trace.k[-1] if len(trace) else 0,
        "final_f": float(f_out), "final_violation": float(v_out),
        "f_star": f_star, "final_f_gap": None if f_star is None else float(f_out - f_star),
        "recorded_seconds": trace.wall_seconds[-1] if len(trace) else 0.0,
        "clock": cfg.clock,
    }
    summary.update(extra)
    if cfg.clock == "wall":
        summary["total_seconds"] = total
    return RunOutcome(cfg, trace, x_out, summary)


def _warn_conditions(params, consts, m):
    report = verify_conditions(params, consts, m)
    if not report.passed:
        print(f"warning: schedule violates {', '.join(report.failures)} "
              f"(run 'verify' for details)", file=sys.stderr)


# --------------------------------------------------------------------------
# trace files
# --------------------------------------------------------------------------

def fmt(v) -> str:
    """17 significant digits, so every float round-trips."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def trace_rows(trace: agsip.IterateTrace) -> tuple[list, list]:
    cols = trace.columns()
    header = list(cols)
    rows = [[cols[h][j] for h in header] for j in range(len(trace))]
    return header, rows


def render_csv(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else ("" if v is None else fmt(v)) for v in row])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_trace(path, trace: agsip.IterateTrace) -> None:
    header, rows = trace_rows(trace)
    write_text(path, render_csv(header, rows))


def read_trace(path) -> dict:
    """Columns of a trace or comparison CSV; numeric columns become float arrays."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    out = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in rows]
        if name in ("method", "label"):
            out[name] = vals
        elif name == "k":
            out[name] = np.array([int(v) for v in vals], dtype=np.int64)
        else:
            out[name] = np.array([float(v) if v != "" else np.nan for v in vals])
    return out


def write_summary(path, summary: dict) -> None:
    write_text(path, json.dumps(summary, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_run(cfg: RunConfig, out: Path | None = None) -> RunOutcome:
    out = Path(cfg.out if out is None else out)
    outcome = execute(cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(out / "trace.csv", outcome.trace)
    write_summary(out / "summary.json", outcome.summary)
    write_config_file(outcome.config, out / "config.ini")
    return outcome


def compare_threads() -> int:
    raw = os.environ.get("SIP_ACCEL_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"SIP_ACCEL_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError("SIP_ACCEL_THREADS must be >= 1")
    return n


def cmd_compare(configs: list, out) -> list:
    """Run several configurations on one problem; write a combined CSV and two SVG plots."""
    if len(configs) < 2:
        raise ConfigurationError("compare needs at least two configurations")
    keys = {(c.problem, c.seed) for c in configs}
    if len(keys) != 1:
        raise ConfigurationError(f"compare needs one problem, got {sorted(keys)}")
    for c in configs:
        c.validate()
    workers = min(compare_threads(), len(configs))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(execute, configs))
    labels = _unique_labels([o.config.label for o in outcomes])
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["method"] + list(agsip.TRACE_COLUMNS)
    extras = []
    for o in outcomes:
        extras += [k for k in o.trace.extra if k not in extras]
    header += extras
    rows = []
    for label, o in zip(labels, outcomes):
        cols = o.trace.columns()
        for j in range(len(o.trace)):
            rows.append([label] + [cols[h][j] if h in cols else None for h in header[1:]])
    write_text(out / "compare.csv", render_csv(header, rows))
    from .plots import plot_comparison
    cfg0 = configs[0]
    f_star = reference_f_star(cfg0.problem, cfg0.seed)
    series = [(label, o.trace) for label, o in zip(labels, outcomes)]
    plot_comparison(series, out / "compare_iterations.svg", x="k", f_star=f_star,
                    title=cfg0.problem)
    plot_comparison(series, out / "compare_seconds.svg", x="wall_seconds", f_star=f_star,
                    title=cfg0.problem)
    write_summary(out / "summary.json", {label: o.summary for label, o in zip(labels, outcomes)})
    return outcomes


def _unique_labels(labels):
    seen = {}
    out = []
    for lab in labels:
        n = seen.get(lab, 0)
        seen[lab] = n + 1
        out.append(lab if n == 0 else f"{lab}#{n + 1}")
    return out


def cmd_verify(cfg: RunConfig):
    """Condition report for the configured schedule (theorem bounds are not enforced)."""
    base = build_problem(cfg.problem, cfg.seed)
    consts = base.constants
    if cfg.method == "sgsip":
        consts = make_stochastic(base, NoiseModel(*cfg.noise, seed=cfg.seed)).constants
    regime = cfg.regime or default_regime(base, cfg.method, any(cfg.noise))
    rec = recommended_params(regime, consts, base.m, cfg.K, cfg.lambda_bound)
    params = ScheduleParams(
        regime, cfg.K,
        k0=rec.k0 if cfg.k0 is None else cfg.k0,
        tau_prime=rec.tau_prime if cfg.tau_prime is None else cfg.tau_prime,
        tau=rec.tau if cfg.tau is None else cfg.tau,
        lambda_bound=cfg.lambda_bound,
    )
    return params, verify_conditions(params, consts, base.m)
