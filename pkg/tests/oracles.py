"""Independent reference computations used by the tests.

Nothing here calls the solver or certification code paths under test.
"""

import numpy as np

TOY1_X_STAR = 0.5 + np.sqrt(0.2)
TOY1_F_STAR = (1.0 - TOY1_X_STAR) ** 2
# symmetric optimum of the convex robust LP, x = c * 1 with c = 1 / (5 + 0.2 sqrt(10))
CONVEX_F_STAR = -10.0 / (5.0 + 0.2 * np.sqrt(10.0))
# conic reformulation of the seed-0 strongly convex instance (cvxpy / Clarabel), recomputed
# in test_reference_optima; a 4e5-iteration accelerated run reaches -1.97445 with violation 1.3e-5
STRONG_F_STAR = -1.974424432023553


def toy1_g_star(x):
    y = np.clip(x - 0.5, -1.0, 1.0)
    return y * (x - 0.5) - 0.5 * y * y - 0.1, y


def toy1_grid_optimum(resolution=1e-7):
    """Grid search of min (x-1)^2 s.t. g*(x) <= 0 over [-1, 1]."""
    xs = np.arange(-1.0, 1.0 + resolution / 2, resolution)
    g, _ = toy1_g_star(xs)
    feas = xs[g <= 0]
    f = (feas - 1.0) ** 2
    j = int(np.argmin(f))
    return feas[j], f[j]


def ball_linear_g_star(a, b, scale, x):
    return float(a @ x + scale * np.linalg.norm(x) - b)


def fd_grad(fun, v, h=1e-6):
    """Central finite differences."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = h
        out[j] = (fun(v + e) - fun(v - e)) / (2 * h)
    return out


def grid_max_2d(fun, lo, hi, n=2001):
    """Dense 2-D grid maximum of a vectorized ``fun(Y) -> values``."""
    g = np.linspace(lo, hi, n)
    Y0, Y1 = np.meshgrid(g, g, indexing="ij")
    Y = np.stack([Y0.ravel(), Y1.ravel()], axis=1)
    vals = fun(Y)
    j = int(np.argmax(vals))
    return vals[j], Y[j]
