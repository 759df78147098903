"""Comparison methods: the exchange method and a switching-gradient method.

Both call the lower-level maximizers of :mod:`sip_accel.certify` as part of
the algorithm, so (unlike the primal-dual solvers) their recorded time
includes those solves.  Recording itself (objective and violation of the
current iterate) is excluded from the time.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .agsip import IterateTrace, default_certifier
from .certify import worst_case
from .core import ConfigurationError, ContractError, FeasibleSet, project
from .problems import philox_generator


# --------------------------------------------------------------------------
# exchange method
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class InnerSolverConfig:
    """Solver for the finite relaxations of the exchange method.

    ``method="slsqp"`` solves the relaxation with scipy's SLSQP.
    ``method="subgradient"`` runs ``steps`` projected subgradient steps of
    length ``step / sqrt(j + 1)`` on the exact penalty
    ``f(x) + rho * max_i max_{y in Yhat^i} [g_i(x, y)]_+`` and keeps the
    best penalty value.
    """

    method: str = "slsqp"
    max_iter: int = 500
    ftol: float = 1e-12
    rho: float = 10.0
    steps: int = 5000
    step: float = 0.1

    def __post_init__(self):
        if self.method not in ("slsqp", "subgradient"):
            raise ConfigurationError(f"unknown inner method {self.method!r}")
        if self.rho <= 0 or self.step <= 0 or self.steps < 1 or self.max_iter < 1:
            raise ConfigurationError("inner solver budgets must be positive")


@dataclass
class ExchangeState:
    active_sets: list
    x: np.ndarray
    rounds: int = 0


@dataclass
class ExchangeResult:
    x: np.ndarray
    rounds: int
    converged: bool
    max_violation: float
    state: ExchangeState
    trace: IterateTrace = field(default_factory=IterateTrace)


def sample_uniform(Y: FeasibleSet, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniform points from a box or a Euclidean ball."""
    if Y.kind == "box":
        return Y.lo + (Y.hi - Y.lo) * rng.random((n, Y.dim))
    if Y.kind == "ball2":
        d = rng.standard_normal((n, Y.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = Y.radius * rng.random(n) ** (1.0 / Y.dim)
        return Y.center + d * r[:, None]
    raise ContractError(f"cannot sample uniformly from a {Y.kind} set")


def _x_bounds(X: FeasibleSet):
    if X.kind == "box":
        return list(zip(X.lo, X.hi)), []
    if X.kind == "nonneg_orthant":
        return [(0.0, None)] * X.dim, []
    if X.kind == "ball2":
        c, r = X.center, X.radius
        return None, [{"type": "ineq", "fun": lambda x: r * r - (x - c) @ (x - c),
                       "jac": lambda x: -2.0 * (x - c)}]
    return None, []


def _relaxation_values(problem, x, sets):
    vals = [problem.eval_g_many(i, x, S) for i, S in enumerate(sets)]
    return np.concatenate(vals)


def _relaxation_jac(problem, x, sets):
    return np.vstack([problem.grad_x_g_many(i, x, S) for i, S in enumerate(sets)])


def _solve_slsqp(problem, sets, x0, cfg: InnerSolverConfig):
    bounds, extra = _x_bounds(problem.X)
    cons = [{"type": "ineq",
             "fun": lambda x: -_relaxation_values(problem, x, sets),
             "jac": lambda x: -_relaxation_jac(problem, x, sets)}] + extra
    res = minimize(problem.eval_f, x0, jac=problem.grad_f, method="SLSQP", bounds=bounds,
                   constraints=cons, options={"maxiter": cfg.max_iter, "ftol": cfg.ftol})
    # SLSQP can step marginally outside the bounds
    return project(problem.X, res.x)


def _solve_subgradient(problem, sets, x0, cfg: InnerSolverConfig):
    x = x0.copy()
    best, best_x = np.inf, x.copy()
    for j in range(cfg.steps):
        vals = _relaxation_values(problem, x, sets)
        worst = int(np.argmax(vals))
        pen = problem.eval_f(x) + cfg.rho * max(vals[worst], 0.0)
        if pen < best:
            best, best_x = pen, x.copy()
        d = problem.grad_f(x)
        if vals[worst] > 0:
            i, row = _locate(sets, worst)
            d = d + cfg.rho * problem.grad_x_g(i, x, sets[i][row])
        x = project(problem.X, x - cfg.step / np.sqrt(j + 1.0) * d)
    return best_x


def _locate(sets, flat):
    for i, S in enumerate(sets):
        if flat < len(S):
            return i, flat
        flat -= len(S)
    raise IndexError(flat)


def exchange_solve(problem, init_samples: int = 100, tol: float = 1e-4, max_rounds: int = 200,
                   inner: InnerSolverConfig | None = None, seed: int = 0, x0=None,
                   certifier: Callable | None = None,
                   timer: Callable[[], float] = time.perf_counter) -> ExchangeResult:
    """Alternate finite relaxations and worst-case cuts until ``g*`` is within ``tol``.

    Round ``r`` solves ``min f`` over ``X`` subject to the constraints at the
    points collected so far, computes every ``argmax_y g_i(x_r, y)`` and
    stops if all maxima are at most ``tol``; otherwise each maximizer is
    appended to its set.  The trace has one row per round.
    """
    if init_samples < 1 or max_rounds < 1:
        raise ContractError("init_samples and max_rounds must be >= 1")
    inner = InnerSolverConfig() if inner is None else inner
    certifier = default_certifier(problem) if certifier is None else certifier
    sets = [sample_uniform(Y, init_samples, philox_generator(seed, i, 0))
            for i, Y in enumerate(problem.Ys)]
    x = problem.default_x0() if x0 is None else np.asarray(x0, dtype=float)
    state = ExchangeState(sets, x, 0)
    trace = IterateTrace()
    solve = _solve_slsqp if inner.method == "slsqp" else _solve_subgradient
    elapsed = 0.0
    converged = False
    viol = np.inf
    best = None
    for r in range(1, max_rounds + 1):
        t0 = timer()
        x = solve(problem, state.active_sets, x, inner)
        g_star, y_star = worst_case(problem, x)
        elapsed += timer() - t0
        state.x, state.rounds = x, r
        viol = float(max(g_star.max(), 0.0))
        f_val, cert_viol = certifier(x)
        trace.append(r, f_val, cert_viol, np.nan, elapsed)
        if best is None or viol < best[1]:
            best = (x, viol)
        if g_star.max() <= tol:
            converged = True
            break
        state.active_sets = [np.vstack([S, y[None, :]]) for S, y in zip(state.active_sets, y_star)]
    if not converged:
        x, viol = best
    return ExchangeResult(x, state.rounds, converged, viol, state, trace)


# --------------------------------------------------------------------------
# switching gradient method
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SipComConfig:
    """Step and tolerance rules of the switching-gradient method.

    ``regime="strong"``: ``eta_k = C/(k+1)`` with constant tolerance
    ``delta``; output weights ``eta_k / (1 - eta_k)``.
    ``regime="convex"``: ``eta_k = C/sqrt(k+1)`` and
    ``delta_k = delta/sqrt(k+1)``; uniform output weights.
    """

    C: float
    delta: float
    K: int
    regime: str = "convex"

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigurationError("SIP-CoM step constant C must be positive")
        if self.delta < 0:
            raise ConfigurationError("SIP-CoM tolerance must be >= 0")
        if self.K < 1:
            raise ConfigurationError("SIP-CoM horizon K must be >= 1")
        if self.regime not in ("strong", "convex"):
            raise ConfigurationError(f"unknown SIP-CoM regime {self.regime!r}")

    def eta(self, k: int) -> float:
        if self.regime == "strong":
            return self.C / (k + 1.0)
        return self.C / np.sqrt(k + 1.0)

    def tolerance(self, k: int) -> float:
        if self.regime == "strong":
            return self.delta
        return self.delta / np.sqrt(k + 1.0)


@dataclass
class SipComResult:
    x_bar: np.ndarray
    feasible_steps: int
    any_feasible: bool
    x_last: np.ndarray
    trace: IterateTrace = field(default_factory=IterateTrace)


_ETA_CAP = 0.999


def sipcom_solve(problem, config: SipComConfig, record_every: int = 10, x0=None,
                 certifier: Callable | None = None,
                 timer: Callable[[], float] = time.perf_counter) -> SipComResult:
    """Switching gradient method with exact lower-level maximization.

    Iteration ``k`` computes ``g_i*(x_k)`` and the maximizers.  If the worst
    value is at most ``delta_k`` the step follows ``grad f(x_k)`` and
    ``x_k`` enters the output average; otherwise it follows
    ``grad_x g_{i*}(x_k, y*)`` of the most violated constraint.
    """
    if record_every < 1:
        raise ContractError("record_every must be >= 1")
    cfg = config
    if cfg.regime == "strong" and cfg.C >= 1.0:
        # weights eta/(1 - eta) need eta_0 = C < 1
        warnings.warn(f"SIP-CoM: clamping C={cfg.C} to {_ETA_CAP}", stacklevel=2)
        cfg = SipComConfig(_ETA_CAP, cfg.delta, cfg.K, cfg.regime)
    certifier = default_certifier(problem) if certifier is None else certifier
    x = problem.default_x0() if x0 is None else np.asarray(x0, dtype=float)
    if not problem.X.contains(x):
        raise ContractError("x0 must lie in X")
    num = np.zeros_like(x)
    den = 0.0
    n_feas = 0
    trace = IterateTrace()
    elapsed = 0.0
    t0 = timer()
    for k in range(cfg.K):
        g_star, y_star = worst_case(problem, x)
        i = int(np.argmax(g_star))
        eta = cfg.eta(k)
        if g_star[i] <= cfg.tolerance(k):
            w = eta / (1.0 - eta) if cfg.regime == "strong" else 1.0
            num += w * x
            den += w
            n_feas += 1
            d = problem.grad_f(x)
        else:
            d = problem.grad_x_g(i, x, y_star[i])
        x = project(problem.X, x - eta * d)
        if (k + 1) % record_every == 0:
            elapsed += timer() - t0
            f_val, viol = certifier(x)
            trace.append(k + 1, f_val, viol, np.nan, elapsed)
            t0 = timer()
    if den > 0:
        return SipComResult(num / den, n_feas, True, x, trace)
    return SipComResult(x.copy(), 0, False, x, trace)
