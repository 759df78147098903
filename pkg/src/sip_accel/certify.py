"""Worst-case constraint values ``g_i*(x) = max_{y in Y^i} g_i(x, y)``.

The solvers never call into this module; it measures true infeasibility of
their iterates and provides the lower-level maximizers used by the
baselines.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .core import ConfigurationError, ContractError, project


class NonConcaveError(RuntimeError):
    """Projected ascent decreased the objective: ``g_i(x, .)`` is not concave."""


@dataclass(frozen=True)
class Certificate:
    f_value: float
    g_star: np.ndarray
    max_violation: float
    f_gap: float | None = None
    epsilon_optimal_at: float | None = None
    y_star: tuple | None = None


def max_g_ball_linear(a, b: float, scale: float, x):
    """Maximize ``(a + scale*y)^T x - b`` over the unit L2 ball in closed form."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        return float(a @ x - b), np.zeros_like(x)
    return float(a @ x + scale * nx - b), x / nx


def _ascent_step(problem) -> float:
    L = problem.constants.L_g_yy
    return 1.0 / L if L > 0 else 1.0


def max_g_concave_quadratic(problem, i: int, x, tol: float = 1e-8, max_iter: int = 200_000):
    """Projected gradient ascent on ``g_i(x, .)`` started from ``y = 0``.

    Step size is ``1 / L_g_yy``.  Stops once the step length falls below
    ``tol * step``, i.e. once the gradient mapping is below ``tol``.
    """
    g, ys = _ascent(problem, x, [i], tol, max_iter)
    return float(g[0]), ys[0]


def _ascent(problem, x, idx, tol, max_iter):
    x = np.asarray(x, dtype=float)
    step = _ascent_step(problem)
    Ys = [problem.Ys[i] for i in idx]
    ys = [project(Y, np.zeros(Y.dim)) for Y in Ys]
    vals = np.array([problem.eval_g(i, x, y) for i, y in zip(idx, ys)])
    active = list(range(len(idx)))
    for _ in range(max_iter):
        still = []
        for j in active:
            i = idx[j]
            grad = problem.grad_y_g(i, x, ys[j])
            y_new = project(Ys[j], ys[j] + step * grad)
            v_new = problem.eval_g(i, x, y_new)
            if v_new < vals[j] - 1e-12 * max(1.0, abs(vals[j])):
                raise NonConcaveError(
                    f"constraint {i}: ascent decreased g from {vals[j]!r} to {v_new!r}"
                )
            moved = np.linalg.norm(y_new - ys[j])
            ys[j], vals[j] = y_new, v_new
            if moved > tol * step:
                still.append(j)
        active = still
        if not active:
            break
    return vals, ys


def _ascent_batched(problem, x, tol, max_iter):
    # same iteration as _ascent, but through the batched oracles
    x = np.asarray(x, dtype=float)
    step = _ascent_step(problem)
    ys = problem.default_y0()
    vals = problem.g_all(x, ys)
    for _ in range(max_iter):
        grads = problem.grad_y_all(x, ys)
        new = [project(Y, y + step * gr) for Y, y, gr in zip(problem.Ys, ys, grads)]
        new_vals = problem.g_all(x, new)
        if np.any(new_vals < vals - 1e-12 * np.maximum(1.0, np.abs(vals))):
            i = int(np.argmin(new_vals - vals))
            raise NonConcaveError(
                f"constraint {i}: ascent decreased g from {vals[i]!r} to {new_vals[i]!r}"
            )
        moved = max(np.linalg.norm(a - b) for a, b in zip(new, ys))
        ys, vals = new, new_vals
        if moved <= tol * step:
            break
    return vals, ys


def max_g_grid(problem, i: int, x, resolution: float = 1e-4,
               points: int | None = None, window: int = 5):
    """Brute-force ``max_y g_i(x, y)`` on a box by coarse-to-fine grids.

    Each level evaluates a full tensor grid, then zooms to ``window`` cells
    around the best point, until the cell width is at most ``resolution``.
    Only for ``q_i <= 3``.  The returned value is within
    ``M_g_y * sqrt(q) * resolution`` of the maximum.
    """
    Y = problem.Ys[i]
    if Y.dim > 3:
        raise ContractError("grid search supports q_i <= 3 only")
    if Y.kind != "box":
        raise ContractError("grid search needs a box parameter set")
    x = np.asarray(x, dtype=float)
    q = Y.dim
    if points is None:
        points = {1: 2001, 2: 201, 3: 41}[q]
    lo, hi = Y.lo.copy(), Y.hi.copy()
    best_y, best_v = None, -np.inf
    while True:
        axes = [np.linspace(lo[d], hi[d], points) for d in range(q)]
        grid = np.array(list(product(*axes))) if q > 1 else axes[0][:, None]
        vals = problem.eval_g_many(i, x, grid)
        j = int(np.argmax(vals))
        if vals[j] > best_v:
            best_v, best_y = float(vals[j]), grid[j].copy()
        h = max((hi[d] - lo[d]) / (points - 1) for d in range(q))
        if h <= resolution:
            break
        lo = np.maximum(Y.lo, best_y - window * h)
        hi = np.minimum(Y.hi, best_y + window * h)
    return best_v, best_y


def worst_case(problem, x, tol: float = 1e-8):
    """``(g_star, y_star)`` for every constraint, dispatched on ``problem.lower_level``."""
    kind = getattr(problem, "lower_level", None)
    if kind == "ball_linear":
        out = [max_g_ball_linear(problem.A[i], problem.b[i], problem.scale, x)
               for i in range(problem.m)]
        return np.array([g for g, _ in out]), [y for _, y in out]
    if kind == "concave":
        vals, ys = _ascent_batched(problem, x, tol, 200_000)
        return np.asarray(vals, dtype=float), ys
    raise ConfigurationError(f"no lower-level maximizer for {problem!r} (kind={kind!r})")


def max_violation(problem, x, tol: float = 1e-8) -> float:
    return float(max(worst_case(problem, x, tol)[0].max(), 0.0))


def certify(problem, x, f_star_ref: float | None = None, tol: float = 1e-8) -> Certificate:
    """Objective value, worst-case constraints and the epsilon-optimality level of ``x``."""
    x = np.asarray(x, dtype=float)
    g_star, y_star = worst_case(problem, x, tol)
    viol = float(max(g_star.max(), 0.0))
    f_val = problem.eval_f(x)
    gap = eps = None
    if f_star_ref is not None:
        gap = f_val - f_star_ref
        eps = max(gap, viol)
    return Certificate(f_val, g_star, viol, gap, eps, tuple(y_star))
