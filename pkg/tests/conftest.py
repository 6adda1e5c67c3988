import numpy as np
import pytest

from incentive_gne import FeasibleGeometry, QuadraticGame


@pytest.fixture
def game_a():
    """Two scalar agents, Q_i = 1, cross coupling -2, q = (-1, -1)."""
    return QuadraticGame(
        dims=(1, 1),
        Q_blocks=[np.array([[1.0]]), np.array([[1.0]])],
        C_blocks={(0, 1): np.array([[-2.0]]), (1, 0): np.array([[-2.0]])},
        q=[np.array([-1.0]), np.array([-1.0])],
    )


@pytest.fixture
def geom_a():
    """Unit boxes with the single coupling row x1 + x2 <= 1."""
    return FeasibleGeometry(lo=[0.0, 0.0], up=[1.0, 1.0], A=[[1.0, 1.0]], b=[1.0])


def random_game(dims, rng, q_scale=1.0):
    """Admissible random game with the given (possibly vector) block dims."""
    dims = tuple(dims)
    N = len(dims)
    Q_blocks = []
    for d in dims:
        D = rng.standard_normal((d, d))
        Q_blocks.append(0.5 * (D + D.T))
    C_blocks = {}
    for i in range(N):
        for j in range(i + 1, N):
            C = rng.standard_normal((dims[i], dims[j]))
            C_blocks[(i, j)] = C
            C_blocks[(j, i)] = C.T.copy()
    q = [q_scale * rng.uniform(-1.0, 1.0, size=d) for d in dims]
    return QuadraticGame(dims=dims, Q_blocks=Q_blocks, C_blocks=C_blocks, q=q)


def random_geometry(n, m, rng):
    """Random box plus m coupling rows, nonempty by construction.

    An interior anchor point is drawn first and b is set to A @ anchor plus a
    positive slack, so the anchor certifies nonemptiness.
    """
    lo = rng.uniform(-1.0, 0.0, size=n)
    up = lo + rng.uniform(0.5, 2.0, size=n)
    anchor = lo + rng.uniform(0.2, 0.8, size=n) * (up - lo)
    A = rng.standard_normal((m, n))
    b = A @ anchor + rng.uniform(0.05, 0.5, size=m)
    return FeasibleGeometry(lo=lo, up=up, A=A, b=b)


def finite_diff_gradient(f, x, h=1e-5):
    """Central finite differences; exact for quadratics up to roundoff."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g
