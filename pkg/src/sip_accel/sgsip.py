"""Stochastic variant of the accelerated primal-dual method.

Every iteration draws oracle samples in six slots.  Slot 1 serves both
current ``y``-gradients and slot 2 the subtracted one; slots 3, 4 and 5 serve
the three linearizations; slot 6 serves ``grad F`` and ``grad_x G`` of the
primal step.  In three-sample mode (the default) slot 2 is slot 1 and
slots 4 and 5 are slot 3, so only slots 1, 3 and 6 are drawn.

Draws are keyed by ``(seed, k, slot)``, so a run replays exactly and is
independent of evaluation order.  With zero noise the sampled oracles
return the deterministic values unchanged and the iterates coincide with
:func:`sip_accel.agsip.run` bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .agsip import (
    IterateTrace,
    SolverState,
    _eps_reached,
    _validate_run,
    advance,
    default_certifier,
    lambda_update,
    x_update,
    y_update,
)
from .core import ContractError
from .problems import StochasticProblem
from .schedules import ScheduleParams, StepTuple, check_params, step as schedule_step

_ALIAS_THREE = {1: 1, 2: 1, 3: 3, 4: 3, 5: 3, 6: 6}


@dataclass
class SampleBatch:
    """The samples ``xi_k^1..xi_k^6`` of one iteration.

    Oracle views are drawn lazily and cached, so aliased slots share one
    draw.
    """

    sproblem: StochasticProblem
    k: int
    seed: int | None = None
    three_sample: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def key(self, slot: int) -> int:
        if slot not in _ALIAS_THREE:
            raise ContractError(f"slot must be in 1..6, got {slot}")
        return _ALIAS_THREE[slot] if self.three_sample else slot

    def oracle(self, slot: int):
        key = self.key(slot)
        if key not in self._cache:
            self._cache[key] = self.sproblem.draw(self.k, key, self.seed)
        return self._cache[key]


def y_update_stoch(state: SolverState, sproblem: StochasticProblem, batch: SampleBatch,
                   st: StepTuple) -> list:
    return y_update(state, sproblem, st, oracle=batch.oracle(1), oracle_prev=batch.oracle(2))


def lambda_update_stoch(state: SolverState, sproblem: StochasticProblem, y_next: list,
                        batch: SampleBatch, st: StepTuple) -> np.ndarray:
    return lambda_update(state, sproblem, y_next, st,
                         oracles=(batch.oracle(3), batch.oracle(4), batch.oracle(5)))


def x_update_stoch(state: SolverState, sproblem: StochasticProblem, y_next: list,
                   lam_next: np.ndarray, batch: SampleBatch, st: StepTuple) -> np.ndarray:
    return x_update(state, sproblem, y_next, lam_next, st, oracle=batch.oracle(6))


def repetition_seed(seed: int, rep: int) -> int:
    """Independent 64-bit key for repetition ``rep`` of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(rep)]).generate_state(1, np.uint64)[0])


@dataclass
class StochRun:
    x_bar: np.ndarray
    trace: IterateTrace
    state: SolverState
    seed: int


@dataclass
class StochResult:
    """Per-repetition runs and the mean / standard-deviation trace."""

    runs: list
    trace: IterateTrace

    @property
    def x_bars(self) -> list:
        return [r.x_bar for r in self.runs]


def run_single(sproblem: StochasticProblem, schedule: ScheduleParams, K: int | None = None,
               seed: int | None = None, record_every: int = 10,
               certifier: Callable | None = None, three_sample: bool = True,
               x0=None, y0=None, lam0=None, early_stop_eps: float | None = None,
               f_star: float | None = None, timer: Callable[[], float] = time.perf_counter,
               check: bool = True) -> StochRun:
    """One run of the stochastic method with draws keyed by ``seed``."""
    K = _validate_run(schedule, K, record_every)
    consts = sproblem.constants
    if check:
        check_params(schedule, consts)
    seed = sproblem.noise.seed if seed is None else seed
    # certification always uses the noise-free instance
    certifier = default_certifier(sproblem.problem) if certifier is None else certifier
    state = SolverState.initial(sproblem.problem, x0, y0, lam0)
    trace = IterateTrace()
    m = sproblem.m
    elapsed = 0.0
    t0 = timer()
    for k in range(K):
        st = schedule_step(schedule, consts, m, k, check=False)
        batch = SampleBatch(sproblem, k, seed, three_sample)
        y_next = y_update_stoch(state, sproblem, batch, st)
        lam_next = lambda_update_stoch(state, sproblem, y_next, batch, st)
        x_next = x_update_stoch(state, sproblem, y_next, lam_next, batch, st)
        advance(state, y_next, lam_next, x_next, st)
        if state.k % record_every == 0:
            elapsed += timer() - t0
            f_val, viol = certifier(state.x_k)
            trace.append(state.k, f_val, viol, np.abs(state.lam).sum(), elapsed)
            if early_stop_eps is not None and _eps_reached(certifier, state, f_star, early_stop_eps):
                break
            t0 = timer()
    return StochRun(state.x_bar, trace, state, seed)


def aggregate(traces: list) -> IterateTrace:
    """Mean trace with ``mean_*`` / ``std_*`` columns over repetitions.

    All traces must share their ``k`` column.  The standard deviation is the
    population one (``ddof=0``), so a single repetition gives zeros.
    """
    if not traces:
        raise ContractError("need at least one trace")
    ks = traces[0].k
    if any(t.k != ks for t in traces):
        raise ContractError("traces must share their recorded iterations")
    out = IterateTrace()
    cols = {}
    for name in ("f_value", "max_violation", "lambda_l1", "wall_seconds"):
        arr = np.array([getattr(t, name) for t in traces], dtype=float)
        cols[name] = (arr.mean(axis=0), arr.std(axis=0))
    for j, k in enumerate(ks):
        out.append(k, cols["f_value"][0][j], cols["max_violation"][0][j],
                   cols["lambda_l1"][0][j], cols["wall_seconds"][0][j])
    for name in ("f_value", "max_violation", "lambda_l1"):
        out.extra[f"mean_{name}"] = list(cols[name][0])
        out.extra[f"std_{name}"] = list(cols[name][1])
    return out


def run_stoch(sproblem: StochasticProblem, schedule: ScheduleParams, K: int | None = None,
              seed: int | None = None, record_every: int = 10,
              certifier: Callable | None = None, repetitions: int = 1,
              three_sample: bool = True, **kw) -> StochResult:
    """Run ``repetitions`` independent replications and aggregate their traces.

    Repetition ``r`` draws from :func:`repetition_seed` ``(seed, r)``; a single
    repetition uses ``seed`` itself, so it replays :func:`run_single`.
    Early stopping is not available here, since aggregation needs aligned
    traces.
    """
    if repetitions < 1:
        raise ContractError("repetitions must be >= 1")
    if "early_stop_eps" in kw:
        raise ContractError("early stopping is not supported for aggregated runs")
    seed = sproblem.noise.seed if seed is None else seed
    seeds = [seed] if repetitions == 1 else [repetition_seed(seed, r) for r in range(repetitions)]
    runs = [run_single(sproblem, schedule, K, s, record_every, certifier, three_sample, **kw)
            for s in seeds]
    return StochResult(runs, aggregate([r.trace for r in runs]))
