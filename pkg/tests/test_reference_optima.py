"""Recompute the frozen reference optima with an independent conic solver."""

import numpy as np
import pytest

from sip_accel.certify import max_violation
from sip_accel.problems import CALAFIORE_A, CALAFIORE_B, random_q_matrix

from oracles import CONVEX_F_STAR, STRONG_F_STAR

cp = pytest.importorskip("cvxpy")

TOL = dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)


def _solve(objective, cons):
    prob = cp.Problem(cp.Minimize(objective), cons)
    prob.solve(solver=cp.CLARABEL, **TOL)
    assert prob.status == "optimal"
    return prob.value


def test_convex_reference(convex):
    # worst case over the unit ball of (a + 0.2 y)^T x is a^T x + 0.2 |x|
    x = cp.Variable(10)
    cons = [cp.norm(x, "inf") <= 2]
    cons += [CALAFIORE_A[i] @ x + 0.2 * cp.norm(x, 2) <= CALAFIORE_B[i] for i in range(4)]
    assert _solve(-cp.sum(x), cons) == pytest.approx(CONVEX_F_STAR, abs=1e-8)
    c = 1.0 / (5.0 + 0.2 * np.sqrt(10.0))
    assert -10 * c == pytest.approx(CONVEX_F_STAR, abs=1e-15)
    assert max_violation(convex, np.full(10, c)) <= 1e-12


def test_strong_reference(strong):
    # max over the box of 0.2 y^T x - y^T Q y / 2 equals, by duality,
    # min over u, v >= 0 of (0.2 x - u + v)^T Q^-1 (0.2 x - u + v) / 2 + 1^T (u + v)
    Q = random_q_matrix(0)
    Qi = np.linalg.inv(Q)
    Qi = (Qi + Qi.T) / 2
    x = cp.Variable(10)
    cons = [cp.norm(x, "inf") <= 2]
    for i in range(4):
        u = cp.Variable(10, nonneg=True)
        v = cp.Variable(10, nonneg=True)
        w = 0.2 * x - u + v
        cons.append(CALAFIORE_A[i] @ x - CALAFIORE_B[i] + 0.5 * cp.quad_form(w, Qi)
                    + cp.sum(u + v) <= 0)
    value = _solve(-cp.sum(x) + 0.05 * cp.sum_squares(x), cons)
    assert value == pytest.approx(STRONG_F_STAR, abs=1e-7)
    assert max_violation(strong, x.value) <= 1e-7
