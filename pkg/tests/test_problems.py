import numpy as np
import pytest

from sip_accel.core import ConfigurationError, linearize_g
from sip_accel.problems import (
    CALAFIORE_A,
    CONVEX_F_STAR,
    PROBLEMS,
    NoiseModel,
    Toy1,
    build_convex_instance,
    build_problem,
    build_strongly_convex_instance,
    make_stochastic,
    philox_generator,
    random_q_matrix,
    reference_f_star,
)

from oracles import CONVEX_F_STAR as CONVEX_REF, TOY1_F_STAR, fd_grad, toy1_g_star


def test_calafiore_data(strong, convex):
    assert np.array_equal(strong.b, [0, 0, 1, 1])
    assert np.array_equal(strong.A[0], -np.array([1, 0, 1, 0, 0, 1, 1, 0, 1, 0]))
    assert np.array_equal(strong.A[1], -np.array([0, 1, 0, 1, 1, 0, 0, 1, 0, 1]))
    assert np.array_equal(strong.A[2], -strong.A[0])
    assert np.array_equal(strong.A[3], -strong.A[1])
    assert convex.A is CALAFIORE_A
    assert (strong.p, strong.m, strong.q) == (10, 4, (10,) * 4)
    assert strong.X == convex.X
    assert np.array_equal(strong.X.hi, np.full(10, 2.0))


def test_q_matrix_seeded_and_spd():
    Q1 = build_strongly_convex_instance(3).Q
    Q2 = build_strongly_convex_instance(3).Q
    assert np.array_equal(Q1, Q2)
    assert not np.array_equal(Q1, build_strongly_convex_instance(4).Q)
    assert np.array_equal(Q1, Q1.T)
    assert np.linalg.eigvalsh(Q1).min() >= 0.1 - 1e-12
    assert np.array_equal(Q1, random_q_matrix(3))
    q = philox_generator(3).random((10, 10))
    assert q.min() >= 0 and q.max() < 1
    assert np.allclose(Q1, 0.1 * (q.T @ q + np.eye(10)))


def test_strong_constants(strong):
    c = strong.constants
    eig = np.linalg.eigvalsh(strong.Q)
    assert c.mu_f == 0.1 and c.L_f == 0.1
    assert c.mu_y == pytest.approx(eig[0]) and c.L_g_yy == pytest.approx(eig[-1])
    assert c.M_g_x == pytest.approx(np.sqrt(5) + 0.2 * np.sqrt(10))
    assert c.D_y == pytest.approx(2 * np.sqrt(10))


def test_convex_constants_and_examples(convex):
    c = convex.constants
    assert c.mu_f == 0 and c.mu_y == 0 and c.H_g_y == 0
    assert c.D_y == 2.0
    y = np.full(10, 0.3)
    assert convex.eval_g(0, np.zeros(10), y) == 0.0
    assert convex.eval_g(2, np.zeros(10), y) == -1.0
    x = np.linspace(-1, 1, 10)
    assert np.array_equal(convex.grad_x_g(1, x, y), convex.A[1] + 0.2 * y)


def test_mgx_bounds_gradients(strong, convex):
    rng = np.random.default_rng(0)
    for prob in (strong, convex):
        for _ in range(200):
            x = rng.uniform(-2, 2, 10)
            ys = prob.project_y(list(rng.normal(size=(4, 10)) * 3))
            assert np.linalg.norm(prob.jac_x_g(x, ys), axis=1).max() <= prob.constants.M_g_x + 1e-12


def test_toy1_examples(toy):
    g, y = toy1_g_star(0.5)
    assert g == pytest.approx(-0.1) and y == 0
    assert Toy1.g_star(0.5) == pytest.approx(-0.1)
    assert Toy1.g_star(1.5) == pytest.approx(0.4)
    assert toy.eval_g(0, np.array([1.5]), np.array([1.0])) == pytest.approx(0.4)
    assert reference_f_star("toy1") == pytest.approx(TOY1_F_STAR, abs=1e-15)


def test_reference_values():
    assert CONVEX_F_STAR == CONVEX_REF
    assert reference_f_star("calafiore-convex") == CONVEX_REF
    assert reference_f_star("calafiore-strong", 1) is None
    assert reference_f_star("quad-test") is None


def test_convex_reference_is_kkt_point(convex):
    # x = c 1 satisfies constraints 3 and 4 with equality and g*_1, g*_2 < 0
    c = 1.0 / (5.0 + 0.2 * np.sqrt(10.0))
    x = np.full(10, c)
    g = convex.A @ x + 0.2 * np.linalg.norm(x) - convex.b
    assert np.allclose(g[2:], 0.0, atol=1e-15) and np.all(g[:2] < 0)
    # grad f = -1 must be a nonnegative combination of the active gradients
    G = np.stack([convex.A[i] + 0.2 * x / np.linalg.norm(x) for i in (2, 3)])
    lam, *_ = np.linalg.lstsq(G.T, np.ones(10), rcond=None)
    assert np.all(lam > 0) and np.allclose(G.T @ lam, np.ones(10))


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_gradients_match_finite_differences(name):
    prob = build_problem(name, 0)
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = prob.default_x0() + rng.uniform(-0.9, 0.9, prob.p)
        ys = prob.project_y([rng.uniform(-0.5, 0.5, q) for q in prob.q])
        gf = prob.grad_f(x)
        fd = fd_grad(prob.eval_f, x)
        assert np.allclose(gf, fd, rtol=1e-5, atol=1e-7)
        for i in range(prob.m):
            gx = prob.grad_x_g(i, x, ys[i])
            gy = prob.grad_y_g(i, x, ys[i])
            assert np.allclose(gx, fd_grad(lambda v: prob.eval_g(i, v, ys[i]), x), rtol=1e-5, atol=1e-7)
            assert np.allclose(gy, fd_grad(lambda v: prob.eval_g(i, x, v), ys[i]), rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_batched_oracles_match_loops(name):
    prob = build_problem(name, 0)
    rng = np.random.default_rng(8)
    x = prob.default_x0() + rng.uniform(-0.5, 0.5, prob.p)
    ys = prob.project_y([rng.uniform(-1, 1, q) for q in prob.q])
    assert np.allclose(prob.g_all(x, ys), [prob.eval_g(i, x, ys[i]) for i in range(prob.m)])
    assert np.allclose(prob.jac_x_g(x, ys), [prob.grad_x_g(i, x, ys[i]) for i in range(prob.m)])
    for a, b in zip(prob.grad_y_all(x, ys), [prob.grad_y_g(i, x, ys[i]) for i in range(prob.m)]):
        assert np.allclose(a, b)
    Y = np.stack([prob.project_y([rng.uniform(-1, 1, q) for q in prob.q])[0] for _ in range(7)])
    assert np.allclose(prob.eval_g_many(0, x, Y), [prob.eval_g(0, x, y) for y in Y])
    assert np.allclose(prob.grad_x_g_many(0, x, Y), [prob.grad_x_g(0, x, y) for y in Y])


def test_strong_concavity_in_y(strong):
    rng = np.random.default_rng(2)
    mu = strong.constants.mu_y
    x = rng.uniform(-2, 2, 10)
    for _ in range(1000):
        y, yp = rng.uniform(-1, 1, (2, 10))
        i = int(rng.integers(4))
        lhs = strong.eval_g(i, x, yp)
        rhs = strong.eval_g(i, x, y) + strong.grad_y_g(i, x, y) @ (yp - y) - mu / 2 * np.sum((yp - y) ** 2)
        assert lhs <= rhs + 1e-9


@pytest.mark.parametrize("build", [build_convex_instance, lambda: build_strongly_convex_instance(0)])
def test_linear_in_x_linearization_exact(build):
    prob = build()
    rng = np.random.default_rng(3)
    for _ in range(200):
        xe, xb = rng.uniform(-2, 2, (2, 10))
        ys = prob.project_y(list(rng.uniform(-1, 1, (4, 10))))
        assert np.allclose(linearize_g(prob, xe, xb, ys), prob.g_all(xe, ys), rtol=0, atol=1e-12)


def test_truncated_instance(strong):
    small = build_strongly_convex_instance(0, q=2)
    assert small.q == (2,) * 4 and small.p == 10
    assert np.array_equal(small.Q, strong.Q[:2, :2])


def test_unknown_problem():
    with pytest.raises(ConfigurationError):
        build_problem("nope")


# --------------------------------------------------------------------------
# stochastic oracles
# --------------------------------------------------------------------------

def test_zero_noise_is_exact(convex):
    sp = make_stochastic(convex, NoiseModel())
    x = np.linspace(-1, 1, 10)
    ys = convex.project_y(list(np.ones((4, 10))))
    for k in range(3):
        o = sp.draw(k, 1)
        assert np.array_equal(o.g_all(x, ys), convex.g_all(x, ys))
        assert np.array_equal(o.jac_x_g(x, ys), convex.jac_x_g(x, ys))
        assert np.array_equal(o.grad_f(x), convex.grad_f(x))


def test_draws_replay_and_differ(convex):
    sp = make_stochastic(convex, NoiseModel(0.1, 0.1, 0.1, seed=5))
    x = np.zeros(10)
    ys = convex.default_y0()
    a = sp.draw(3, 1).g_all(x, ys)
    b = make_stochastic(convex, NoiseModel(0.1, 0.1, 0.1, seed=5)).draw(3, 1).g_all(x, ys)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sp.draw(3, 3).g_all(x, ys))
    assert not np.array_equal(a, sp.draw(4, 1).g_all(x, ys))
    assert not np.array_equal(a, sp.draw(3, 1, seed=6).g_all(x, ys))


def test_noise_mean_and_variance(toy):
    std = 0.3
    sp = make_stochastic(toy, NoiseModel(std, std, std, seed=11))
    x, ys = np.array([0.2]), [np.array([0.4])]
    n = 100_000
    G = np.empty(n)
    J = np.empty(n)
    for k in range(n):
        o = sp.draw(k, 1)
        G[k] = o.eval_g(0, x, ys[0])
        J[k] = o.grad_x_g(0, x, ys[0])[0]
    assert abs(G.mean() - toy.eval_g(0, x, ys[0])) <= 4 * std / np.sqrt(n)
    assert abs(J.var() / std ** 2 - 1) <= 0.1


def test_noise_constants(convex):
    sp = make_stochastic(convex, NoiseModel(0.05, 0.02, 0.03))
    c = sp.constants
    assert c.sigma_fprime == pytest.approx(0.05 * np.sqrt(10))
    assert c.sigma_g == pytest.approx(0.02)
    assert c.sigma_gprime == pytest.approx(0.03 * np.sqrt(10))
    with pytest.raises(ConfigurationError):
        NoiseModel(-1.0)


def test_philox_streams_disjoint():
    # a key (k, slot) sits at counter words 2 and 3; draws advance word 0
    # only, so distinct keys never share a block.  Check a million keys map
    # to distinct counters and that their leading draws do not collide.
    ks = np.repeat(np.arange(333_334, dtype=np.uint64), 3)
    slots = np.tile(np.array([1, 3, 6], dtype=np.uint64), 333_334)
    keys = ks * np.uint64(8) + slots
    assert np.unique(keys).size == keys.size
    firsts = {philox_generator(0, int(k), int(s)).integers(0, 2 ** 63)
              for k, s in zip(ks[:30_000], slots[:30_000])}
    assert len(firsts) == 30_000
