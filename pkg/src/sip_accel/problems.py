"""Concrete SIP instances and a stochastic-oracle wrapper.

Shipped instances:

``toy1``
    1-D desk instance, ``f(x) = (x-1)^2``, ``g(x, y) = y(x-0.5) - y^2/2 - 0.1``
    over ``X = Y = [-1, 1]``.  Optimum ``x* = 0.5 + sqrt(0.2)``.
``quad-test``
    1-D instance with ``g(x, y) = x^2 + y x`` (convex, not linear, in x); used
    to exercise linearization minorization.
``calafiore-strong``
    Strongly convex / strongly concave robust LP variant with a random
    positive definite ``Q`` and box parameter sets.
``calafiore-convex``
    Robust LP with ``||y||_2 <= 1`` parameter sets (``mu_f = mu_y = 0``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ConfigurationError, FeasibleSet, ProblemConstants, ProblemInstance

TOY1_X_STAR = 0.5 + np.sqrt(0.2)
TOY1_F_STAR = (1.0 - TOY1_X_STAR) ** 2

CALAFIORE_A = np.array(
    [
        [-1, 0, -1, 0, 0, -1, -1, 0, -1, 0],
        [0, -1, 0, -1, -1, 0, 0, -1, 0, -1],
        [1, 0, 1, 0, 0, 1, 1, 0, 1, 0],
        [0, 1, 0, 1, 1, 0, 0, 1, 0, 1],
    ],
    dtype=float,
)
CALAFIORE_B = np.array([0.0, 0.0, 1.0, 1.0])
CALAFIORE_A.setflags(write=False)
CALAFIORE_B.setflags(write=False)


def philox_generator(seed: int, *words: int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed`` and positioned at ``words``.

    Up to two extra words go into the high half of the 256-bit Philox
    counter, so streams for distinct ``words`` never overlap unless one of
    them draws 2**64 blocks.
    """
    if len(words) > 2:
        raise ValueError("at most two counter words")
    counter = [0, 0, *words] + [0] * (2 - len(words))
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, 0]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


# --------------------------------------------------------------------------
# 1-D instances
# --------------------------------------------------------------------------

class Toy1(ProblemInstance):
    name = "toy1"

    def __init__(self):
        consts = ProblemConstants(
            mu_f=2.0, L_f=2.0, mu_y=1.0, L_g_yy=1.0, L_g_yx=1.0, L_g_xx=0.0,
            M_g_x=1.0, M_g_y=2.5, D_y=2.0,
        )
        super().__init__(FeasibleSet.box([-1.0], [1.0]), [FeasibleSet.box([-1.0], [1.0])], consts)

    def eval_f(self, x):
        return float((x[0] - 1.0) ** 2)

    def grad_f(self, x):
        return np.array([2.0 * (x[0] - 1.0)])

    def eval_g(self, i, x, y_i):
        y = y_i[0]
        return float(y * (x[0] - 0.5) - 0.5 * y * y - 0.1)

    def grad_x_g(self, i, x, y_i):
        return np.array([float(y_i[0])])

    def grad_y_g(self, i, x, y_i):
        return np.array([x[0] - 0.5 - y_i[0]])

    def eval_g_many(self, i, x, Y):
        y = np.asarray(Y)[:, 0]
        return y * (x[0] - 0.5) - 0.5 * y * y - 0.1

    def grad_x_g_many(self, i, x, Y):
        return np.asarray(Y, dtype=float)[:, :1].copy()

    @staticmethod
    def g_star(x: float) -> float:
        """Closed-form worst case ``max_y g(x, y)`` on ``Y = [-1, 1]``."""
        y = min(1.0, max(-1.0, x - 0.5))
        return y * (x - 0.5) - 0.5 * y * y - 0.1


class QuadTest(ProblemInstance):
    name = "quad-test"

    def __init__(self):
        consts = ProblemConstants(
            mu_f=2.0, L_f=2.0, mu_y=0.0, L_g_xx=2.0, L_g_yx=1.0, L_g_yy=0.0,
            M_g_x=5.0, M_g_y=2.0, D_y=2.0,
        )
        super().__init__(FeasibleSet.box([-2.0], [2.0]), [FeasibleSet.box([-1.0], [1.0])], consts)

    def eval_f(self, x):
        return float((x[0] - 1.0) ** 2)

    def grad_f(self, x):
        return np.array([2.0 * (x[0] - 1.0)])

    def eval_g(self, i, x, y_i):
        return float(x[0] ** 2 + y_i[0] * x[0])

    def grad_x_g(self, i, x, y_i):
        return np.array([2.0 * x[0] + y_i[0]])

    def grad_y_g(self, i, x, y_i):
        return np.array([float(x[0])])


# --------------------------------------------------------------------------
# robust LP instances
# --------------------------------------------------------------------------

class _RobustLP(ProblemInstance):
    """Shared oracles for ``g_i = (a_i + 0.2 [y;0])^T x - b_i - y^T Q y / 2``."""

    scale = 0.2

    def __init__(self, X, Ys, consts, Q, f_quad):
        super().__init__(X, Ys, consts)
        self.A = CALAFIORE_A
        self.b = CALAFIORE_B
        self.Q = Q
        self.f_quad = f_quad
        self._qdim = Ys[0].dim

    def eval_f(self, x):
        return float(-x.sum() + 0.5 * self.f_quad * (x @ x))

    def grad_f(self, x):
        return -1.0 + self.f_quad * x

    def eval_g(self, i, x, y_i):
        q = self._qdim
        val = self.A[i] @ x + self.scale * (y_i @ x[:q]) - self.b[i]
        if self.Q is not None:
            val -= 0.5 * y_i @ self.Q @ y_i
        return float(val)

    def grad_x_g(self, i, x, y_i):
        out = self.A[i].copy()
        out[: self._qdim] += self.scale * y_i
        return out

    def grad_y_g(self, i, x, y_i):
        out = self.scale * x[: self._qdim]
        if self.Q is not None:
            out = out - self.Q @ y_i
        return out

    def eval_g_many(self, i, x, Y):
        Y = np.asarray(Y)
        q = self._qdim
        val = self.A[i] @ x + self.scale * (Y @ x[:q]) - self.b[i]
        if self.Q is not None:
            val = val - 0.5 * np.einsum("ij,ij->i", Y @ self.Q, Y)
        return val

    def grad_x_g_many(self, i, x, Y):
        Y = np.asarray(Y)
        out = np.tile(self.A[i], (len(Y), 1))
        out[:, : self._qdim] += self.scale * Y
        return out

    def g_all(self, x, ys):
        Y = np.stack(ys)
        q = self._qdim
        val = self.A @ x + self.scale * (Y @ x[:q]) - self.b
        if self.Q is not None:
            val -= 0.5 * np.einsum("ij,ij->i", Y @ self.Q, Y)
        return val

    def jac_x_g(self, x, ys):
        J = np.array(self.A)
        J[:, : self._qdim] += self.scale * np.stack(ys)
        return J

    def grad_y_all(self, x, ys):
        G = np.broadcast_to(self.scale * x[: self._qdim], (self.m, self._qdim))
        if self.Q is not None:
            G = G - np.stack(ys) @ self.Q
        return list(np.array(G))


class CalafioreStrong(_RobustLP):
    name = "calafiore-strong"


class CalafioreConvex(_RobustLP):
    name = "calafiore-convex"
    lower_level = "ball_linear"


def random_q_matrix(seed: int, size: int = 10) -> np.ndarray:
    """``0.1 (q^T q + I)`` with ``q`` uniform on [0, 1), drawn from Philox(seed)."""
    q = philox_generator(seed).random((size, size))
    return 0.1 * (q.T @ q + np.eye(size))


def build_strongly_convex_instance(seed: int = 0, q: int = 10) -> CalafioreStrong:
    """Strongly convex robust LP with box parameter sets.

    ``q < 10`` keeps the leading ``q x q`` block of ``Q`` and lets ``y``
    perturb only the first ``q`` coordinates of ``x`` (used for grid checks).
    """
    if not 1 <= q <= 10:
        raise ConfigurationError("q must be between 1 and 10")
    Q = random_q_matrix(seed)[:q, :q].copy()
    Q.setflags(write=False)
    eig = np.linalg.eigvalsh(Q)
    rq = np.sqrt(q)
    a_norm = np.linalg.norm(CALAFIORE_A, axis=1).max()
    consts = ProblemConstants(
        mu_f=0.1, L_f=0.1,
        mu_y=float(eig[0]), L_g_yy=float(eig[-1]), L_g_yx=0.2, L_g_xx=0.0,
        M_g_x=float(a_norm + 0.2 * rq),
        M_g_y=float(0.2 * 2.0 * rq + eig[-1] * rq),
        D_y=float(2.0 * rq),
    )
    X = FeasibleSet.box(-2.0, 2.0, dim=10)
    Ys = [FeasibleSet.box(-1.0, 1.0, dim=q) for _ in range(4)]
    inst = CalafioreStrong(X, Ys, consts, Q=Q, f_quad=0.1)
    inst.seed = seed
    return inst


def build_convex_instance() -> CalafioreConvex:
    """Robust LP ``min -1^T x`` with unit-ball uncertainty; no randomness."""
    a_norm = np.linalg.norm(CALAFIORE_A, axis=1).max()
    consts = ProblemConstants(
        mu_f=0.0, L_f=0.0, mu_y=0.0, L_g_yy=0.0, L_g_yx=0.2, L_g_xx=0.0,
        M_g_x=float(a_norm + 0.2),
        M_g_y=float(0.2 * 2.0 * np.sqrt(10)),
        D_y=2.0,
    )
    X = FeasibleSet.box(-2.0, 2.0, dim=10)
    Ys = [FeasibleSet.ball2(np.zeros(10), 1.0) for _ in range(4)]
    return CalafioreConvex(X, Ys, consts, Q=None, f_quad=0.0)


def build_toy1() -> Toy1:
    return Toy1()


def build_quad_test() -> QuadTest:
    return QuadTest()


PROBLEMS = {
    "toy1": lambda seed: build_toy1(),
    "quad-test": lambda seed: build_quad_test(),
    "calafiore-strong": lambda seed: build_strongly_convex_instance(seed),
    "calafiore-convex": lambda seed: build_convex_instance(),
}

# The convex robust LP is symmetric under the coordinate permutations that
# fix A, so x* = c * 1 with constraints 3 and 4 active: c = 1 / (5 + 0.2 sqrt(10)).
CONVEX_F_STAR = -10.0 / (5.0 + 0.2 * np.sqrt(10.0))
# seed-0 strongly convex instance, from a high-accuracy conic reformulation
STRONG_F_STAR_SEED0 = -1.974424432023553


def reference_f_star(name: str, seed: int = 0) -> float | None:
    """Known optimal value of a registered instance, or ``None``."""
    if name == "toy1":
        return float(TOY1_F_STAR)
    if name == "calafiore-convex":
        return float(CONVEX_F_STAR)
    if name == "calafiore-strong" and seed == 0:
        return STRONG_F_STAR_SEED0
    return None


# --------------------------------------------------------------------------
# stochastic oracles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """Additive isotropic Gaussian noise on every oracle output.

    ``std_gprime`` applies to both ``grad_x G`` and ``grad_y G``.
    """

    std_f: float = 0.0
    std_g: float = 0.0
    std_gprime: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for v in (self.std_f, self.std_g, self.std_gprime):
            if not v >= 0:
                raise ConfigurationError("noise standard deviations must be >= 0")

    @property
    def zero(self) -> bool:
        return self.std_f == 0 and self.std_g == 0 and self.std_gprime == 0


class SampledOracle:
    """The oracles ``grad F, G_i, grad_x G_i, grad_y G_i`` at one fixed draw."""

    def __init__(self, base: ProblemInstance, noise: NoiseModel, z: np.ndarray | None):
        self.base = base
        self.m = base.m
        self.p = base.p
        if z is None:
            self._f = self._g = self._jx = None
            self._gy = None
            return
        p, q = base.p, base.q
        self._f = noise.std_f * z[:p]
        pos = p
        self._g = noise.std_g * z[pos: pos + base.m]
        pos += base.m
        self._jx = noise.std_gprime * z[pos: pos + base.m * p].reshape(base.m, p)
        pos += base.m * p
        self._gy = []
        for qi in q:
            self._gy.append(noise.std_gprime * z[pos: pos + qi])
            pos += qi

    def grad_f(self, x):
        out = self.base.grad_f(x)
        return out if self._f is None else out + self._f

    def g_all(self, x, ys):
        out = self.base.g_all(x, ys)
        return out if self._g is None else out + self._g

    def jac_x_g(self, x, ys):
        out = self.base.jac_x_g(x, ys)
        return out if self._jx is None else out + self._jx

    def grad_y_all(self, x, ys):
        out = self.base.grad_y_all(x, ys)
        if self._gy is None:
            return out
        return [o + e for o, e in zip(out, self._gy)]

    def eval_g(self, i, x, y_i):
        out = self.base.eval_g(i, x, y_i)
        return out if self._g is None else out + self._g[i]

    def grad_x_g(self, i, x, y_i):
        out = self.base.grad_x_g(i, x, y_i)
        return out if self._jx is None else out + self._jx[i]

    def grad_y_g(self, i, x, y_i):
        out = self.base.grad_y_g(i, x, y_i)
        return out if self._gy is None else out + self._gy[i]


class StochasticProblem:
    """A deterministic instance observed through noisy oracles.

    Draws are a pure function of ``(noise.seed, iteration, slot)``; the
    constraint index selects a fixed position inside the slot's draw.
    """

    def __init__(self, problem: ProblemInstance, noise: NoiseModel):
        self.problem = problem
        self.noise = noise
        p, m = problem.p, problem.m
        self._draw_size = p + m + m * p + sum(problem.q)
        qmax = max(problem.q)
        self.constants = _replace(
            problem.constants,
            sigma_fprime=noise.std_f * np.sqrt(p),
            sigma_g=noise.std_g,
            sigma_gprime=noise.std_gprime * np.sqrt(max(p, qmax)),
        )

    @property
    def m(self):
        return self.problem.m

    @property
    def X(self):
        return self.problem.X

    @property
    def Ys(self):
        return self.problem.Ys

    def draw(self, k: int, slot: int, seed: int | None = None) -> SampledOracle:
        """Oracle view for sample ``xi_k^slot``."""
        if self.noise.zero:
            return SampledOracle(self.problem, self.noise, None)
        s = self.noise.seed if seed is None else seed
        z = philox_generator(s, k, slot).standard_normal(self._draw_size)
        return SampledOracle(self.problem, self.noise, z)


def _replace(consts: ProblemConstants, **kw) -> ProblemConstants:
    return replace(consts, **{k: float(v) for k, v in kw.items()})


def make_stochastic(problem: ProblemInstance, noise: NoiseModel) -> StochasticProblem:
    return StochasticProblem(problem, noise)


def build_problem(name: str, seed: int = 0) -> ProblemInstance:
    try:
        return PROBLEMS[name](seed)
    except KeyError:
        raise ConfigurationError(
            f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}"
        ) from None
