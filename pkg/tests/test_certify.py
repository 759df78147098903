import numpy as np
import pytest

from sip_accel.certify import (
    NonConcaveError,
    certify,
    max_g_ball_linear,
    max_g_concave_quadratic,
    max_g_grid,
    max_violation,
    worst_case,
)
from sip_accel.core import ConfigurationError, ContractError, FeasibleSet, ProblemConstants, ProblemInstance
from sip_accel.problems import build_strongly_convex_instance

from oracles import TOY1_F_STAR, ball_linear_g_star, grid_max_2d, toy1_g_star


def test_ball_linear_closed_form(convex):
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.uniform(-2, 2, 10)
        i = int(rng.integers(4))
        g, y = max_g_ball_linear(convex.A[i], convex.b[i], 0.2, x)
        assert g == pytest.approx(ball_linear_g_star(convex.A[i], convex.b[i], 0.2, x), abs=1e-14)
        assert np.linalg.norm(y) == pytest.approx(1.0)
        assert convex.eval_g(i, x, y) == pytest.approx(g, abs=1e-14)
        # no random point of the ball does better
        Y = rng.normal(size=(500, 10))
        Y /= np.maximum(1.0, np.linalg.norm(Y, axis=1))[:, None]
        assert convex.eval_g_many(i, x, Y).max() <= g + 1e-12


def test_ball_linear_at_zero():
    g, y = max_g_ball_linear(np.ones(3), 1.0, 0.2, np.zeros(3))
    assert g == -1.0 and np.array_equal(y, np.zeros(3))


def test_toy1_closed_form_matches_ascent(toy):
    rng = np.random.default_rng(1)
    for x in rng.uniform(-1, 1, 100):
        g, y = max_g_concave_quadratic(toy, 0, np.array([x]))
        g_ref, y_ref = toy1_g_star(x)
        assert g == pytest.approx(g_ref, abs=1e-8)
        assert y[0] == pytest.approx(y_ref, abs=1e-6)


def test_toy1_examples(toy):
    g, y = max_g_concave_quadratic(toy, 0, np.array([0.5]))
    assert g == pytest.approx(-0.1) and y[0] == 0.0
    g, _ = max_g_grid(toy, 0, np.array([0.5]))
    assert g == pytest.approx(-0.1, abs=1e-8)


def test_toy1_clamped_maximizer():
    # g*(1.5) = 0.4 at y = 1 lies outside X = [-1, 1]; evaluate the formula directly
    g, y = toy1_g_star(1.5)
    assert g == pytest.approx(0.4) and y == 1.0


def test_concave_quadratic_agrees_with_grid_q2():
    small = build_strongly_convex_instance(0, q=2)
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = rng.uniform(-2, 2, 10)
        i = int(rng.integers(4))
        g_asc, y_asc = max_g_concave_quadratic(small, i, x)
        g_grid, _ = max_g_grid(small, i, x)
        g_dense, _ = grid_max_2d(lambda Y: small.eval_g_many(i, x, Y), -1.0, 1.0)
        assert abs(g_asc - g_grid) <= 1e-5
        assert g_asc >= g_dense - 1e-12
        assert small.Ys[i].contains(y_asc)


def test_grid_restrictions(strong, convex):
    with pytest.raises(ContractError):
        max_g_grid(strong, 0, np.zeros(10))
    with pytest.raises(ContractError):
        max_g_grid(convex, 0, np.zeros(10))


def test_worst_case_dispatch(strong, convex):
    x = np.full(10, 0.3)
    g, ys = worst_case(convex, x)
    assert g.shape == (4,) and len(ys) == 4
    g2, _ = worst_case(strong, x)
    assert np.all(g2 >= strong.g_all(x, strong.default_y0()) - 1e-12)


def test_unknown_lower_level(toy):
    class Weird(type(toy)):
        lower_level = "unknown"

    with pytest.raises(ConfigurationError):
        worst_case(Weird(), np.zeros(1))


class _Understated(ProblemInstance):
    """g = -5 y^2 but L_g_yy claims 1, so the ascent overshoots."""

    def __init__(self):
        super().__init__(FeasibleSet.box([-1.0], [1.0]), [FeasibleSet.box([-1.0], [1.0])],
                         ProblemConstants(L_g_yy=1.0))

    def eval_g(self, i, x, y):
        return float(-5.0 * (y[0] - 0.1) ** 2)

    def grad_y_g(self, i, x, y):
        return np.array([-10.0 * (y[0] - 0.1)])


def test_nonconcave_contract_violation_detected():
    with pytest.raises(NonConcaveError):
        max_g_concave_quadratic(_Understated(), 0, np.zeros(1))


def test_certificate(toy):
    from oracles import TOY1_X_STAR
    c = certify(toy, np.array([TOY1_X_STAR]), f_star_ref=TOY1_F_STAR)
    assert c.max_violation <= 1e-12
    assert abs(c.f_gap) <= 1e-15
    assert c.epsilon_optimal_at == pytest.approx(max(c.f_gap, c.max_violation))
    c = certify(toy, np.array([1.0]))
    assert c.f_gap is None and c.max_violation == pytest.approx(0.025)
    assert max_violation(toy, np.array([0.5])) == 0.0


def test_ball_cauchy_schwarz_example():
    g, y = max_g_ball_linear(np.zeros(2), 0.0, 0.2, np.array([3.0, 4.0]))
    assert g == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(y, [0.6, 0.8], atol=1e-15)


def test_convex_instance_at_origin(convex):
    c = certify(convex, np.zeros(10))
    assert np.array_equal(c.g_star, [0.0, 0.0, -1.0, -1.0])
    assert c.max_violation == 0.0 and c.f_value == 0.0


def test_toy1_infeasible_point(toy):
    g, y = max_g_concave_quadratic(toy, 0, np.array([1.5]))
    assert g == pytest.approx(0.4, abs=1e-8) and y[0] == pytest.approx(1.0)
    g_grid, _ = max_g_grid(toy, 0, np.array([1.5]))
    assert g_grid == pytest.approx(0.4, abs=1e-8)


def test_g_star_dominates_random_points(strong):
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, 10)
    g_star, _ = worst_case(strong, x)
    for i, Y in enumerate(strong.Ys):
        Ys = rng.uniform(Y.lo, Y.hi, (1000, Y.dim))
        assert strong.eval_g_many(i, x, Ys).max() <= g_star[i] + 1e-8


def test_certify_is_pure(strong):
    x = np.full(10, 0.2)
    a, b = certify(strong, x), certify(strong, x)
    assert np.array_equal(a.g_star, b.g_star) and a.max_violation == b.max_violation


def test_danskin_consistency(toy):
    h = 1e-6
    for x in (-0.3, 0.1, 0.6, 0.9):
        fd = (toy1_g_star(x + h)[0] - toy1_g_star(x - h)[0]) / (2 * h)
        _, y = max_g_concave_quadratic(toy, 0, np.array([x]))
        grad = toy.grad_x_g(0, np.array([x]), y)[0]
        assert abs(fd - grad) <= 1e-4 * max(abs(grad), 1e-3)
