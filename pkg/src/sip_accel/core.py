"""Shared building blocks: feasible sets, problem oracles, linearization.

A semi-infinite program here is

    min_{x in X} f(x)  s.t.  g_i(x, y) <= 0  for all y in Y^i,  i = 1..m

with ``g_i`` convex in ``x`` and concave in ``y``.  Parameter blocks ``y`` are
ragged: a list of m one-dimensional arrays, block ``i`` of length ``q_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np


class ContractError(ValueError):
    """An argument violates an operation's precondition."""


class ConfigurationError(ValueError):
    """A solver or schedule was configured inconsistently."""


# --------------------------------------------------------------------------
# feasible sets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FeasibleSet:
    """Closed convex set with a cheap Euclidean projection.

    Use the constructors :meth:`box`, :meth:`ball2`, :meth:`nonneg_orthant`
    and :meth:`whole_space` rather than building instances directly.
    """

    kind: str
    dim: int
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float = 0.0

    @classmethod
    def box(cls, lo, hi, dim: int | None = None) -> "FeasibleSet":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if dim is not None:
            lo = np.broadcast_to(lo, (dim,)).copy()
            hi = np.broadcast_to(hi, (dim,)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ContractError("box bounds must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ContractError("box requires lo <= hi componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        return cls("box", lo.size, lo=lo, hi=hi)

    @classmethod
    def ball2(cls, center, radius: float) -> "FeasibleSet":
        center = np.array(center, dtype=float)
        if center.ndim != 1:
            raise ContractError("ball center must be a 1-D array")
        if radius < 0:
            raise ContractError("ball2 requires radius >= 0")
        center.setflags(write=False)
        return cls("ball2", center.size, center=center, radius=float(radius))

    @classmethod
    def nonneg_orthant(cls, dim: int) -> "FeasibleSet":
        return cls("nonneg_orthant", int(dim))

    @classmethod
    def whole_space(cls, dim: int) -> "FeasibleSet":
        return cls("whole_space", int(dim))

    def diameter(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(self.hi - self.lo))
        if self.kind == "ball2":
            return 2.0 * self.radius
        return float("inf")

    def contains(self, v, atol: float = 1e-12) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.linalg.norm(v - project(self, v)) <= atol)

    def __eq__(self, other):
        if not isinstance(other, FeasibleSet):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if a is None or b is None or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


def project(s: FeasibleSet, v) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``s``.

    On a ball, a point at the center projects to the center.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (s.dim,):
        raise ContractError(f"dimension mismatch: set has dim {s.dim}, got shape {v.shape}")
    if s.kind == "box":
        return np.clip(v, s.lo, s.hi)
    if s.kind == "ball2":
        d = v - s.center
        n = np.sqrt(d @ d)
        if n <= s.radius:
            return v.copy()
        return s.center + d * (s.radius / n)
    if s.kind == "nonneg_orthant":
        return np.maximum(v, 0.0)
    if s.kind == "whole_space":
        return v.copy()
    raise ContractError(f"unknown set kind {s.kind!r}")


# --------------------------------------------------------------------------
# problem description
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemConstants:
    """Strong convexity / smoothness / variance constants of an instance.

    The smooth case is ``H_f == H_g_x == H_g_y == 0``.
    """

    mu_f: float = 0.0
    mu_y: float = 0.0
    L_f: float = 0.0
    L_g_xx: float = 0.0
    L_g_yx: float = 0.0
    L_g_yy: float = 0.0
    H_f: float = 0.0
    H_g_x: float = 0.0
    H_g_y: float = 0.0
    M_g_x: float = 0.0
    M_g_y: float = 0.0
    D_y: float = 0.0
    sigma_fprime: float = 0.0
    sigma_g: float = 0.0
    sigma_gprime: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not np.isfinite(val) or val < 0:
                raise ContractError(f"constant {f.name} must be finite and >= 0, got {val}")

    @property
    def smooth(self) -> bool:
        return self.H_f == 0 and self.H_g_x == 0 and self.H_g_y == 0


class ProblemInstance:
    """Deterministic oracles for a convex SIP.

    Subclasses implement the per-constraint oracles ``eval_g``, ``grad_x_g``
    and ``grad_y_g`` together with ``eval_f`` and ``grad_f``.  The batched
    methods ``g_all``, ``jac_x_g`` and ``grad_y_all`` loop over constraints
    by default; instances override them when a vectorized form is cheap.

    ``lower_level`` names the maximizer that :mod:`sip_accel.certify` uses
    for ``max_y g_i(x, y)``: ``"ball_linear"`` or ``"concave"``.
    """

    name = "instance"
    lower_level = "concave"

    def __init__(self, X: FeasibleSet, Ys: Sequence[FeasibleSet], constants: ProblemConstants):
        self.X = X
        self.Ys = tuple(Ys)
        self.constants = constants

    @property
    def p(self) -> int:
        return self.X.dim

    @property
    def m(self) -> int:
        return len(self.Ys)

    @property
    def q(self) -> tuple[int, ...]:
        return tuple(Y.dim for Y in self.Ys)

    # scalar oracles -------------------------------------------------------
    def eval_f(self, x) -> float:
        raise NotImplementedError

    def grad_f(self, x) -> np.ndarray:
        raise NotImplementedError

    def eval_g(self, i: int, x, y_i) -> float:
        raise NotImplementedError

    def grad_x_g(self, i: int, x, y_i) -> np.ndarray:
        raise NotImplementedError

    def grad_y_g(self, i: int, x, y_i) -> np.ndarray:
        raise NotImplementedError

    # batched oracles ------------------------------------------------------
    def g_all(self, x, ys) -> np.ndarray:
        return np.array([self.eval_g(i, x, ys[i]) for i in range(self.m)])

    def jac_x_g(self, x, ys) -> np.ndarray:
        return np.array([self.grad_x_g(i, x, ys[i]) for i in range(self.m)])

    def grad_y_all(self, x, ys) -> list[np.ndarray]:
        return [self.grad_y_g(i, x, ys[i]) for i in range(self.m)]

    def eval_g_many(self, i: int, x, Y) -> np.ndarray:
        """``g_i(x, y)`` for every row ``y`` of ``Y``."""
        return np.array([self.eval_g(i, x, y) for y in Y])

    def grad_x_g_many(self, i: int, x, Y) -> np.ndarray:
        """``grad_x g_i(x, y)`` for every row ``y`` of ``Y``, shape ``(len(Y), p)``."""
        return np.array([self.grad_x_g(i, x, y) for y in Y]).reshape(len(Y), self.p)

    # helpers --------------------------------------------------------------
    def default_x0(self) -> np.ndarray:
        return project(self.X, np.zeros(self.p))

    def default_y0(self) -> list[np.ndarray]:
        return [project(Y, np.zeros(Y.dim)) for Y in self.Ys]

    def project_y(self, ys) -> list[np.ndarray]:
        return [project(Y, y) for Y, y in zip(self.Ys, ys)]

    def describe(self) -> dict:
        return {"name": self.name, "p": self.p, "m": self.m, "q": list(self.q)}


# --------------------------------------------------------------------------
# operations shared by every solver
# --------------------------------------------------------------------------

def linearize_g(problem, x_eval, x_base, ys) -> np.ndarray:
    """Linear model of the constraint vector around ``x_base``.

    Returns ``g(x_base, y) + J_x g(x_base, y) (x_eval - x_base)``.  For
    ``g`` convex in ``x`` this never exceeds ``g(x_eval, y)``.

    ``problem`` may be any object with ``g_all`` and ``jac_x_g`` (a
    deterministic instance or a sampled stochastic oracle).
    """
    x_eval = np.asarray(x_eval, dtype=float)
    x_base = np.asarray(x_base, dtype=float)
    return problem.g_all(x_base, ys) + problem.jac_x_g(x_base, ys) @ (x_eval - x_base)


def weighted_average(points, weights) -> np.ndarray:
    """Convex combination ``sum w_k x_k / sum w_k``."""
    pts = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) != len(w):
        raise ContractError("points and weights must have equal length")
    if np.any(w < 0):
        raise ContractError("weights must be nonnegative")
    total = w.sum()
    if not total > 0:
        raise ContractError("sum of weights must be positive")
    return (w @ pts) / total


def lagrangian(problem, x, lam, ys) -> float:
    """``f(x) + lam^T g(x, y)``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ContractError("multipliers must be nonnegative")
    return float(problem.eval_f(x) + lam @ problem.g_all(x, ys))
