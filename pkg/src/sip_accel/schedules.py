"""Step-size / momentum / averaging-weight schedules.

Every regime maps an iteration ``k`` to a :class:`StepTuple`
``(t, theta, tau, sigma, gamma)``:

* ``t``     weight of ``x_{k+1}`` in the returned average
* ``theta`` extrapolation (momentum) factor
* ``tau``   proximal weight of the primal step (step length ``1/tau``)
* ``sigma`` proximal weight of the ``y`` ascent step
* ``gamma`` proximal weight of the multiplier step

Regimes ``both_strong``, ``f_strong_only``, ``y_strong_only``, ``neither``
and ``stochastic`` are the theorem-backed choices for the four
(strong convexity of f) x (strong concavity in y) cases plus the
stochastic-oracle case.  ``practical`` is the hand-tuned rule used in the
strongly convex experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ConfigurationError, ContractError, ProblemConstants

REGIMES = ("both_strong", "f_strong_only", "y_strong_only", "neither", "stochastic", "practical")
THEOREM_REGIMES = REGIMES[:-1]

# regimes whose schedule (as a sequence) changes with the horizon K
HORIZON_DEPENDENT = {"f_strong_only", "y_strong_only", "neither", "stochastic"}


@dataclass(frozen=True)
class ScheduleParams:
    regime: str
    K: int
    k0: int = 1
    tau_prime: float = 0.0
    tau: float = 0.0
    lambda_bound: float = 10.0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigurationError(f"unknown regime {self.regime!r}; choose from {REGIMES}")
        if self.K < 1:
            raise ConfigurationError(f"horizon K must be >= 1, got {self.K}")
        if self.k0 < 1:
            raise ConfigurationError(f"k0 = {self.k0} is below its lower bound 1")
        if self.tau_prime < 0 or self.tau < 0 or self.lambda_bound < 0:
            raise ConfigurationError("tau_prime, tau and lambda_bound must be >= 0")


@dataclass(frozen=True)
class StepTuple:
    t: float
    theta: float
    tau: float
    sigma: float
    gamma: float


# --------------------------------------------------------------------------
# lower bounds required by each theorem
# --------------------------------------------------------------------------

def _ratio(num: float, den: float) -> float:
    if num == 0:
        return 0.0
    return math.inf if den == 0 else num / den


def theorem_bounds(params: ScheduleParams, c: ProblemConstants) -> dict[str, float]:
    """Lower bounds on ``k0``, ``tau_prime`` and ``tau`` for the regime.

    ``lambda_bound`` stands in for ``||lambda*||_1 + 1``.
    """
    lam = params.lambda_bound
    r = params.regime
    out: dict[str, float] = {}
    if r == "both_strong":
        out["k0"] = max(_ratio(32 * c.L_f, c.mu_f), _ratio(math.sqrt(224) * c.L_g_yy, c.mu_y), 1.0)
    elif r == "f_strong_only":
        out["k0"] = max(_ratio(18 * c.L_f, c.mu_f), 1.0)
    elif r == "y_strong_only":
        out["k0"] = max(_ratio(math.sqrt(56) * c.L_g_yy, c.mu_y), _ratio(14 * c.L_g_yx, c.mu_y), 1.0)
        out["tau_prime"] = max(8 * (c.L_f + 1), 8 * (c.L_g_yx + c.L_g_xx) * lam)
        out["tau"] = math.sqrt(c.H_g_x ** 2 * lam ** 2 + c.H_f ** 2)
    elif r == "neither":
        out["tau_prime"] = max(8 * (c.L_f + 1), 8 * (c.L_g_yx + c.L_g_xx) * lam)
        out["tau"] = math.sqrt(c.H_g_x ** 2 * lam ** 2 + c.H_f ** 2)
    elif r == "stochastic":
        out["tau_prime"] = max(4 * (c.L_f + 1 + c.sigma_gprime), 8 * (c.L_g_yx + c.L_g_xx) * lam)
        out["tau"] = math.sqrt(
            c.H_g_x ** 2 * lam ** 2 + c.H_f ** 2 + c.sigma_gprime ** 2 * lam + c.sigma_fprime ** 2
        )
    elif r == "practical":
        out["k0"] = 1.0
    return out


def _check_strong(r: str, c: ProblemConstants) -> None:
    if r in ("both_strong", "f_strong_only") and c.mu_f <= 0:
        raise ConfigurationError(f"regime {r} needs mu_f > 0")
    if r in ("both_strong", "y_strong_only") and c.mu_y <= 0:
        raise ConfigurationError(f"regime {r} needs mu_y > 0")


def check_params(params: ScheduleParams, c: ProblemConstants) -> None:
    """Raise :class:`ConfigurationError` naming the first violated theorem bound."""
    r = params.regime
    _check_strong(r, c)
    for name, lb in theorem_bounds(params, c).items():
        val = getattr(params, name)
        if val < lb * (1 - 1e-12):
            raise ConfigurationError(
                f"regime {r}: {name} = {val:g} is below its lower bound {lb:.6g}"
            )


# --------------------------------------------------------------------------
# schedules
# --------------------------------------------------------------------------

def _raw_step(params: ScheduleParams, c: ProblemConstants, m: int, k: int) -> StepTuple:
    r = params.regime
    K, k0 = params.K, params.k0
    if r in ("both_strong", "f_strong_only"):
        t = k + k0 + 1.0
        theta = (k + k0) / (k + k0 + 1.0)
        tau = (k + k0 + 1.0) * c.mu_f / 2
        gamma = 3456 * m * c.M_g_x ** 2 / (c.mu_f * (k + k0 + 1.0))
        if r == "both_strong":
            sigma = (k + k0) * c.mu_y / 2
        else:
            num = math.sqrt(56) * (K + k0) * c.L_g_yy
            if c.H_g_y > 0:
                num = max(num, _ratio(c.H_g_y, c.D_y) * math.sqrt(K) * (K + k0))
            sigma = num / (k + k0 + 1.0)
        return StepTuple(t, theta, tau, sigma, gamma)
    if r == "y_strong_only":
        tau = max(params.tau_prime, params.tau * math.sqrt(K))
        return StepTuple(1.0, 1.0, tau, (k + k0 + 1.0) * c.mu_y, 60 * m * c.M_g_x ** 2)
    if r == "neither":
        tau = max(params.tau_prime, params.tau * math.sqrt(K))
        sigma = max(math.sqrt(56) * c.L_g_yy, 14 * c.L_g_yx)
        if c.H_g_y > 0:
            sigma = max(sigma, _ratio(c.H_g_y, c.D_y) * math.sqrt(K))
        return StepTuple(1.0, 1.0, tau, sigma, 60 * c.M_g_x ** 2)
    if r == "stochastic":
        tau = max(params.tau_prime, params.tau * math.sqrt(K))
        sigma = max(math.sqrt(56) * c.L_g_yy, 14 * c.L_g_yx)
        noise_y = math.sqrt(c.H_g_y ** 2 + c.sigma_gprime ** 2)
        if noise_y > 0:
            sigma = max(sigma, _ratio(noise_y, c.D_y) * math.sqrt(K))
        gamma = 60 * c.M_g_x ** 2 + 60 * m * c.sigma_gprime * (2 * K - k) / math.sqrt(K)
        return StepTuple(1.0, 1.0, tau, sigma, gamma)
    # practical
    t = k + k0 + 1.0
    return StepTuple(t, (k + k0) / t, t / k0, t / k0, k0 / t)


def step(params: ScheduleParams, consts: ProblemConstants, m: int, k: int,
         check: bool = True) -> StepTuple:
    """Parameters for iteration ``k`` (``0 <= k <= K``)."""
    if not 0 <= k <= params.K:
        raise ContractError(f"iteration {k} outside 0..K={params.K}")
    if check:
        check_params(params, consts)
    st = _raw_step(params, consts, m, k)
    if not (st.tau > 0 and st.sigma > 0 and st.gamma > 0 and st.t > 0):
        raise ConfigurationError(
            f"regime {params.regime} yields a non-positive step parameter at k={k}: {st}"
        )
    return st


def schedule(params: ScheduleParams, consts: ProblemConstants, m: int) -> list[StepTuple]:
    """All step tuples for ``k = 0..K-1`` after validating the parameters."""
    check_params(params, consts)
    return [step(params, consts, m, k, check=False) for k in range(params.K)]


# --------------------------------------------------------------------------
# structural conditions
# --------------------------------------------------------------------------

CONDITIONS = (
    "theta_t",            # theta_{k+1} t_{k+1} = t_k
    "cond2",              # primal step dominates cross terms (with variance)
    "cond2_simplified",   # deterministic version
    "cond3",              # y-step dominates the y-momentum error
    "cond4_a",            # t tau nonincreasing up to mu_f
    "cond4_b",            # t sigma nonincreasing up to mu_y
    "cond4_c",            # t gamma nonincreasing up to variance term
    "cond4_c_simplified",
)


@dataclass
class ConditionReport:
    regime: str
    K: int
    worst_slack: dict[str, float] = field(default_factory=dict)
    worst_k: dict[str, int] = field(default_factory=dict)
    asserted: tuple[str, ...] = ()
    notes: list[str] = field(default_factory=list)
    tol: float = 1e-9

    @property
    def failures(self) -> list[str]:
        return [c for c in self.asserted if self.worst_slack[c] < -self.tol]

    @property
    def passed(self) -> bool:
        return not self.failures

    def lines(self) -> list[str]:
        out = []
        for c in CONDITIONS:
            s = self.worst_slack[c]
            if c not in self.asserted:
                status = "info"
            else:
                status = "PASS" if s >= -self.tol else "FAIL"
            out.append(f"{c:<20s} worst slack {s: .6e} at k={self.worst_k[c]:<8d} {status}")
        return out + [f"note: {n}" for n in self.notes]


def _slack(terms_pos, terms_neg) -> np.ndarray:
    # scaled slack of sum(pos) <= sum(neg) per k; scale keeps roundoff near 1e-16
    lhs = sum(terms_pos)
    rhs = sum(terms_neg)
    scale = np.maximum.reduce([np.ones_like(lhs)] + [np.abs(v) for v in (*terms_pos, *terms_neg)])
    return (rhs - lhs) / scale


def verify_conditions(params: ScheduleParams, consts: ProblemConstants, m: int,
                      K: int | None = None) -> ConditionReport:
    """Worst scaled slack of each structural condition over ``k = 0..K-1``.

    Slack ``s`` of ``lhs <= rhs`` is ``(rhs - lhs) / max(1, |terms|)``; a
    condition passes when ``s >= -1e-9``.  Parameters are not checked
    against the theorem bounds, so deliberately bad schedules can be
    inspected.
    """
    K = params.K if K is None else K
    c = consts
    L_f, Mx, sgp, Lyy = c.L_f, c.M_g_x, c.sigma_gprime, c.L_g_yy
    steps = [_raw_step(params, c, m, k) for k in range(K + 2)]
    cols = {f: np.array([getattr(st, f) for st in steps]) for f in ("t", "theta", "tau", "sigma", "gamma")}
    # index 0, 1, 2 are iterations k, k+1, k+2 for k = 0..K-1
    t0, t1, t2 = (cols["t"][j:j + K] for j in range(3))
    th1, th2 = cols["theta"][1:K + 1], cols["theta"][2:K + 2]
    tau0, tau1 = cols["tau"][:K], cols["tau"][1:K + 1]
    sig0, sig1 = cols["sigma"][:K], cols["sigma"][1:K + 1]
    gam0, gam1, gam2 = (cols["gamma"][j:j + K] for j in range(3))
    mu_f = np.full(K, c.mu_f)
    mu_y = np.full(K, c.mu_y)
    slack = {}
    with np.errstate(divide="ignore", invalid="ignore"):
        slack["theta_t"] = 0.0 - np.abs(th1 * t1 - t0) / np.maximum(1.0, np.abs(t0))
        cross = [
            t0 * L_f / 2,
            6 * m * t1 * th1 ** 2 * Mx ** 2 / gam1,
            24 * m * t2 * th2 ** 2 * Mx ** 2 / gam2,
        ]
        var = [18 * m * sgp ** 2 * t1 / gam1, 12 * m * sgp ** 2 * t2 / gam2]
        slack["cond2"] = _slack(cross + var, [t0 * tau0 / 16])
        slack["cond2_simplified"] = _slack(cross, [t0 * tau0 / 16])
        slack["cond3"] = _slack([7 * t1 * (th1 * Lyy) ** 2 / sig1], [t0 * sig0 / 8])
        slack["cond4_a"] = _slack([t1 * tau1], [t1 * mu_f, t0 * tau0])
        slack["cond4_b"] = _slack([t1 * sig1], [t0 * sig0, t0 * mu_y])
        slack["cond4_c"] = _slack([t1 * gam1, 8 * m * sgp ** 2 * t0 / tau0], [t0 * gam0])
        slack["cond4_c_simplified"] = _slack([t1 * gam1], [t0 * gam0])
    worst, where = {}, {}
    for name in CONDITIONS:
        v = np.where(np.isnan(slack[name]), np.inf, slack[name])
        j = int(np.argmin(v))
        worst[name], where[name] = float(v[j]), j

    report = ConditionReport(params.regime, K, worst, where)
    if params.regime == "practical":
        report.asserted = ("theta_t",)
        report.notes.append(
            "practical schedule is heuristic: only theta_{k+1} t_{k+1} = t_k is asserted; "
            "cond2, cond3, cond4_* are reported for information"
        )
    elif params.regime == "stochastic":
        report.asserted = ("theta_t", "cond2", "cond3", "cond4_a", "cond4_b", "cond4_c")
    elif consts.sigma_gprime > 0:
        report.asserted = CONDITIONS
        report.notes.append("deterministic regime evaluated with noisy constants")
    else:
        report.asserted = CONDITIONS
    if params.regime in THEOREM_REGIMES and params.regime != "both_strong":
        report.notes.append(f"bounds assume ||lambda*||_1 + 1 <= {params.lambda_bound:g}")
    return report


# --------------------------------------------------------------------------
# convenient theorem-conformant defaults
# --------------------------------------------------------------------------

def recommended_params(regime: str, consts: ProblemConstants, m: int, K: int,
                       lambda_bound: float = 10.0) -> ScheduleParams:
    """Smallest theorem-conformant ``k0``/``tau_prime``/``tau`` for a regime.

    Starting from the theorem bounds, ``tau_prime`` is raised so that the
    primal step dominates the cross terms for the given ``m`` (the
    constant-gamma regimes otherwise fail that condition for ``m > 1``), and
    ``k0`` is raised until every asserted structural condition holds.
    """
    _check_strong(regime, consts)
    base = ScheduleParams(regime, K, k0=1, lambda_bound=lambda_bound)
    bounds = theorem_bounds(base, consts)
    k0 = int(math.ceil(bounds.get("k0", 1.0) - 1e-12))
    params = ScheduleParams(regime, K, k0=max(k0, 1), tau_prime=bounds.get("tau_prime", 0.0),
                            tau=bounds.get("tau", 0.0), lambda_bound=lambda_bound)
    c = consts
    if regime in ("y_strong_only", "neither", "stochastic"):
        need = 0.0
        for k in range(min(K, 3) if regime != "stochastic" else K):
            s1 = _raw_step(params, c, m, k + 1)
            s2 = _raw_step(params, c, m, k + 2)
            lhs = c.L_f / 2 + 6 * m * c.M_g_x ** 2 / s1.gamma + 24 * m * c.M_g_x ** 2 / s2.gamma
            lhs += 18 * m * c.sigma_gprime ** 2 / s1.gamma + 12 * m * c.sigma_gprime ** 2 / s2.gamma
            need = max(need, 16 * lhs)
        if need > params.tau_prime:
            params = replace(params, tau_prime=need * (1 + 1e-9))
    if regime == "practical":
        params = replace(params, k0=1000)
    if regime in ("both_strong", "f_strong_only"):
        # t_k grows with k0, so the conditions eventually hold; grow k0 geometrically
        for _ in range(64):
            if verify_conditions(params, c, m, K=min(K, 2000)).passed:
                break
            params = replace(params, k0=int(math.ceil(params.k0 * 1.1)) + 1)
        else:
            raise ConfigurationError(f"no k0 satisfies the conditions for regime {regime}")
    return params
