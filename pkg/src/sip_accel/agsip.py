"""Accelerated single-loop primal-dual method for convex SIPs (deterministic).

Each iteration takes one momentum-extrapolated projected ascent step on every
``y^i``, one step on the multipliers using extrapolated *linearized*
constraint values, and one projected gradient step on ``x``.  The output is
the ``t_k``-weighted average of ``x_1..x_K``.

The update functions accept any "oracle view": an object with ``grad_f``,
``g_all``, ``jac_x_g`` and ``grad_y_all``.  The deterministic solver passes
the problem itself; :mod:`sip_accel.sgsip` passes sampled oracles.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .core import ConfigurationError, ContractError, linearize_g, project
from .schedules import ScheduleParams, StepTuple, check_params, step as schedule_step


@dataclass
class SolverState:
    """Rolling window of iterates.

    ``x_km2, x_km1, x_k`` are ``x_{k-2}, x_{k-1}, x_k``; ``y_km1, y_k`` the
    last two parameter blocks.  ``avg_num / avg_den`` is the running
    weighted average of ``x_1..x_k``.
    """

    x_km2: np.ndarray
    x_km1: np.ndarray
    x_k: np.ndarray
    y_km1: list
    y_k: list
    lam: np.ndarray
    k: int = 0
    avg_num: np.ndarray | None = None
    avg_den: float = 0.0

    @classmethod
    def initial(cls, problem, x0=None, y0=None, lam0=None) -> "SolverState":
        x0 = problem.default_x0() if x0 is None else np.asarray(x0, dtype=float)
        y0 = problem.default_y0() if y0 is None else [np.asarray(y, dtype=float) for y in y0]
        lam0 = np.zeros(problem.m) if lam0 is None else np.asarray(lam0, dtype=float)
        if not problem.X.contains(x0):
            raise ContractError("x0 must lie in X")
        if any(not Y.contains(y) for Y, y in zip(problem.Ys, y0)):
            raise ContractError("y0 must lie in Y")
        if np.any(lam0 < 0):
            raise ContractError("lambda0 must be nonnegative")
        # x_{-2} = x_{-1} = x_0 and y_{-1} = y_0 zero the first momentum terms
        return cls(x0, x0, x0, list(y0), list(y0), lam0, 0, np.zeros_like(x0), 0.0)

    @property
    def x_bar(self) -> np.ndarray:
        if self.avg_den <= 0:
            raise ContractError("no iterations have been averaged yet")
        return self.avg_num / self.avg_den


def y_update(state: SolverState, problem, st: StepTuple, oracle=None, oracle_prev=None) -> list:
    """Momentum projected ascent on each ``g_i(x_k, .)``.

    ``oracle`` evaluates gradients at ``(x_k, y_k)``, ``oracle_prev`` at
    ``(x_{k-1}, y_{k-1})``; both default to ``problem``.
    """
    if not st.sigma > 0:
        raise ContractError("sigma must be positive")
    oracle = problem if oracle is None else oracle
    oracle_prev = oracle if oracle_prev is None else oracle_prev
    g_now = oracle.grad_y_all(state.x_k, state.y_k)
    g_prev = oracle_prev.grad_y_all(state.x_km1, state.y_km1)
    out = []
    for Y, y, gn, gp in zip(problem.Ys, state.y_k, g_now, g_prev):
        u = gn + st.theta * (gn - gp)
        out.append(project(Y, y + u / st.sigma))
    return out


def lambda_update(state: SolverState, problem, y_next: list, st: StepTuple,
                  oracles=None) -> np.ndarray:
    """Projected multiplier ascent along extrapolated linearized constraints.

    ``oracles`` is an optional triple used for the three linearizations
    ``l(x_k; x_{k-1}, y_{k+1})``, ``l(x_k; x_{k-1}, y_k)`` and
    ``l(x_{k-1}; x_{k-2}, y_k)``, in that order.
    """
    if not st.gamma > 0:
        raise ContractError("gamma must be positive")
    o3, o4, o5 = (problem, problem, problem) if oracles is None else oracles
    v = linearize_g(o3, state.x_k, state.x_km1, y_next)
    if st.theta != 0.0:
        v = v + st.theta * (linearize_g(o4, state.x_k, state.x_km1, state.y_k)
                            - linearize_g(o5, state.x_km1, state.x_km2, state.y_k))
    return np.maximum(state.lam + v / st.gamma, 0.0)


def x_update(state: SolverState, problem, y_next: list, lam_next: np.ndarray, st: StepTuple,
             oracle=None) -> np.ndarray:
    """Projected gradient step on ``f + lam_{k+1}^T g(., y_{k+1})`` from ``x_k``."""
    if not st.tau > 0:
        raise ContractError("tau must be positive")
    oracle = problem if oracle is None else oracle
    s = oracle.grad_f(state.x_k) + oracle.jac_x_g(state.x_k, y_next).T @ lam_next
    return project(problem.X, state.x_k - s / st.tau)


def advance(state: SolverState, y_next, lam_next, x_next, st: StepTuple) -> None:
    """Shift the iterate window by one and fold ``x_{k+1}`` into the average."""
    state.x_km2, state.x_km1, state.x_k = state.x_km1, state.x_k, x_next
    state.y_km1, state.y_k = state.y_k, y_next
    state.lam = lam_next
    state.avg_num = state.avg_num + st.t * x_next
    state.avg_den += st.t
    state.k += 1


# --------------------------------------------------------------------------
# traces
# --------------------------------------------------------------------------

TRACE_COLUMNS = ("k", "f_value", "max_violation", "lambda_l1", "wall_seconds")


@dataclass
class IterateTrace:
    """One row per recorded iteration; ``k`` counts completed iterations."""

    k: list = field(default_factory=list)
    f_value: list = field(default_factory=list)
    max_violation: list = field(default_factory=list)
    lambda_l1: list = field(default_factory=list)
    wall_seconds: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def append(self, k, f_value, violation, lambda_l1, wall):
        if self.k and k <= self.k[-1]:
            raise ContractError("trace iterations must be strictly increasing")
        self.k.append(int(k))
        self.f_value.append(float(f_value))
        self.max_violation.append(float(violation))
        self.lambda_l1.append(float(lambda_l1))
        self.wall_seconds.append(float(wall))

    def __len__(self):
        return len(self.k)

    def columns(self) -> dict:
        cols = {name: list(getattr(self, name)) for name in TRACE_COLUMNS}
        cols.update({k: list(v) for k, v in self.extra.items()})
        return cols


def default_certifier(problem) -> Callable:
    from .certify import max_violation

    def cert(x):
        return problem.eval_f(x), max_violation(problem, x)

    return cert


class RunResult(NamedTuple):
    x_bar: np.ndarray
    trace: IterateTrace
    state: SolverState


def _validate_run(schedule: ScheduleParams, K, record_every):
    K = schedule.K if K is None else K
    if K <= 0:
        raise ContractError("K must be positive")
    if K > schedule.K:
        raise ConfigurationError(f"K={K} exceeds the schedule horizon {schedule.K}")
    if record_every < 1:
        raise ContractError("record_every must be >= 1")
    return K


def run(problem, schedule: ScheduleParams, K: int | None = None, record_every: int = 10,
        certifier: Callable | None = None, x0=None, y0=None, lam0=None,
        early_stop_eps: float | None = None, f_star: float | None = None,
        timer: Callable[[], float] = time.perf_counter,
        check: bool = True) -> RunResult:
    """Run ``K`` iterations (default: the schedule horizon).

    ``certifier(x) -> (f(x), max_i [g_i*(x)]_+)`` is called on ``x_k`` every
    ``record_every`` iterations; its cost is excluded from the recorded
    time.  With ``early_stop_eps`` (and ``f_star``), the run stops at the
    first recorded iteration whose averaged iterate is
    ``early_stop_eps``-optimal.
    """
    K = _validate_run(schedule, K, record_every)
    consts = problem.constants
    if check:
        check_params(schedule, consts)
    certifier = default_certifier(problem) if certifier is None else certifier
    state = SolverState.initial(problem, x0, y0, lam0)
    trace = IterateTrace()
    m = problem.m
    elapsed = 0.0
    t0 = timer()
    for k in range(K):
        st = schedule_step(schedule, consts, m, k, check=False)
        y_next = y_update(state, problem, st)
        lam_next = lambda_update(state, problem, y_next, st)
        x_next = x_update(state, problem, y_next, lam_next, st)
        advance(state, y_next, lam_next, x_next, st)
        if state.k % record_every == 0:
            elapsed += timer() - t0
            f_val, viol = certifier(state.x_k)
            trace.append(state.k, f_val, viol, np.abs(state.lam).sum(), elapsed)
            if early_stop_eps is not None and _eps_reached(certifier, state, f_star, early_stop_eps):
                break
            t0 = timer()
    return RunResult(state.x_bar, trace, state)


def _eps_reached(certifier, state, f_star, eps) -> bool:
    f_bar, viol_bar = certifier(state.x_bar)
    gap = -np.inf if f_star is None else f_bar - f_star
    return max(gap, viol_bar) <= eps
