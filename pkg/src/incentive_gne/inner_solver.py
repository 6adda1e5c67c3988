"""Inner-loop solver for the strongly monotone affine VI over the feasible set.

Each outer round the agents face the incentive-regularized game, whose
stacked gradient is an affine map F(x) = M x + r with M positive definite.
The round's equilibrium is the unique point x* in Omega with
(y - x*)' F(x*) >= 0 for all feasible y.  It is computed by the two-projection
extragradient iteration; an active-set enumeration oracle solves the same VI
by direct KKT search and serves as an independent cross-check at desk scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .geometry import FeasibleGeometry, ProjectionError

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


class InnerSolveError(RuntimeError):
    """Extragradient hit max_iters; carries the last iterate and residual."""

    def __init__(self, message, x_last=None, residual=None):
        super().__init__(message)
        self.x_last = x_last
        self.residual = residual


class OracleInconsistencyError(RuntimeError):
    """No KKT candidate passed; impossible for strongly monotone maps."""


@dataclass(frozen=True)
class AffineMap:
    """Handle for F(x) = M x + r."""

    M: np.ndarray
    r: np.ndarray

    def evaluate(self, x) -> np.ndarray:
        return self.M @ x + self.r

    __call__ = evaluate

    def spectral_norm(self, tol: float = 1e-10, max_iters: int = 10_000) -> float:
        """Upper estimate of the Lipschitz constant ||M||_2.

        Power iteration on M'M from a fixed-seed random start (a structured
        start can sit orthogonal to the dominant eigenvector), inflated by a
        small safety factor since the Rayleigh quotient converges from below.
        Deterministic for a fixed matrix.
        """
        n = self.M.shape[0]
        v = np.random.default_rng(0x5EED).standard_normal(n)
        v /= np.linalg.norm(v)
        sigma = 0.0
        for _ in range(max_iters):
            w = self.M.T @ (self.M @ v)
            norm_w = float(np.linalg.norm(w))
            if norm_w == 0.0:
                return 0.0
            v_new = w / norm_w
            sigma_new = np.sqrt(norm_w)
            if abs(sigma_new - sigma) <= tol * max(sigma_new, 1.0):
                sigma = sigma_new
                break
            sigma, v = sigma_new, v_new
        return float(sigma) * 1.02


@dataclass
class SolverParams:
    """Extragradient configuration.

    tau : step size; must satisfy tau < 1/L for the map's Lipschitz L.
        When None it is set to 0.9/L with L estimated by power iteration.
    P_diag : optional positive diagonal weight; steps use P^{-1} scaling.
    """

    tau: float | None = None
    P_diag: np.ndarray | None = None
    tol_inner: float = 1e-9
    max_iters: int = 200_000
    projection_tol: float = 1e-12

    def __post_init__(self):
        if self.P_diag is not None:
            self.P_diag = np.asarray(self.P_diag, dtype=float).reshape(-1)
            if np.any(self.P_diag <= 0):
                raise ValueError("P must be positive definite (positive diagonal)")


@dataclass
class VgneSolution:
    x_star: np.ndarray
    residual: float
    iters: int
    lam: np.ndarray = field(default=None, repr=False)  # final projection dual


@njit(cache=True)
def _project_kernel(z, lo, up, A, At, b, s_dual, lam, ptol, pmax):
    """Dual FISTA projection; mirrors FeasibleGeometry.project_with_dual."""
    x = np.minimum(np.maximum(z, lo), up)
    m = b.shape[0]
    if m == 0:
        return x, lam, True
    feas = True
    for i in range(m):
        acc = 0.0
        for j in range(z.shape[0]):
            acc += A[i, j] * x[j]
        if acc > b[i]:
            feas = False
            break
    if feas:
        return x, np.zeros(m), True
    mu = lam.copy()
    lam_prev = lam.copy()
    tk = 1.0
    for _ in range(pmax):
        x_mu = np.minimum(np.maximum(z - At @ mu, lo), up)
        lam_new = np.maximum(mu + s_dual * (A @ x_mu - b), 0.0)
        x = np.minimum(np.maximum(z - At @ lam_new, lo), up)
        slack = b - A @ x
        residual = 0.0
        for i in range(m):
            v = lam_new[i] if lam_new[i] < slack[i] else slack[i]
            if abs(v) > residual:
                residual = abs(v)
        if residual <= ptol:
            return x, lam_new, True
        if (mu - lam_new) @ (lam_new - lam_prev) > 0.0:
            tk = 1.0
            mu = lam_new.copy()
        else:
            tk_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            mu = lam_new + ((tk - 1.0) / tk_new) * (lam_new - lam_prev)
            tk = tk_new
        lam_prev = lam_new
    return x, lam_prev, False


@njit(cache=True)
def _extragradient_kernel(M, r, lo, up, A, At, b, s_dual, x0, tau, tol_inner,
                          max_iters, ptol, pmax, lam0):
    """Identity-weight extragradient loop; status 0 ok, 1 projection cap,
    2 iteration cap."""
    x = x0.copy()
    lam_y = lam0.copy()
    lam_x = lam0.copy()
    residual = 1e300
    for k in range(max_iters):
        z = x - tau * (M @ x + r)
        y, lam_y, ok = _project_kernel(z, lo, up, A, At, b, s_dual, lam_y, ptol, pmax)
        if not ok:
            return x, residual, k, lam_y, 1
        acc = 0.0
        for j in range(x.shape[0]):
            acc += (x[j] - y[j]) ** 2
        residual = np.sqrt(acc)
        if residual <= tol_inner:
            return x, residual, k, lam_y, 0
        z = x - tau * (M @ y + r)
        x, lam_x, ok = _project_kernel(z, lo, up, A, At, b, s_dual, lam_x, ptol, pmax)
        if not ok:
            return x, residual, k, lam_x, 1
    return x, residual, max_iters, lam_y, 2


def natural_residual(amap: AffineMap, geom: FeasibleGeometry, x, tau: float,
                     projection_tol: float = 1e-12) -> float:
    """||x - P_Omega(x - tau F(x))||, the standard VI optimality measure."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = geom.project(x - tau * amap.evaluate(x), tol=projection_tol)
    return float(np.linalg.norm(x - y))


def solve_vgne(amap: AffineMap, geom: FeasibleGeometry, params: SolverParams,
               x0, lam0=None) -> VgneSolution:
    """Extragradient iteration for the affine VI over Omega.

    y_k = P(x_k - tau P^{-1} F(x_k)); x_{k+1} = P(x_k - tau P^{-1} F(y_k)).
    Stops when the natural residual ||x_k - y_k|| drops to tol_inner.  The
    projection dual is threaded through every projection call, so repeated
    solves from nearby starts are cheap.
    """
    tau = params.tau
    if tau is None:
        scaled = amap if params.P_diag is None else AffineMap(
            M=amap.M / params.P_diag[:, None], r=amap.r)
        tau = 0.9 / max(scaled.spectral_norm(), 1e-300)
    x = np.asarray(x0, dtype=float).reshape(-1)
    if not geom.is_feasible(x, tol=0.0):
        x, lam0 = geom.project_with_dual(x, lam0=lam0, tol=params.projection_tol)
    lam = np.zeros(geom.m) if lam0 is None else np.asarray(lam0, dtype=float)
    ptol = params.projection_tol
    M, r = np.ascontiguousarray(amap.M), np.ascontiguousarray(amap.r)

    if _HAVE_NUMBA and params.P_diag is None:
        xs, residual, iters, lam, status = _extragradient_kernel(
            M, r, geom.lo, geom.up, geom.A, geom._AT, geom.b, geom._dual_step,
            x, tau, params.tol_inner, params.max_iters, ptol, 100_000, lam)
        if status == 0:
            return VgneSolution(x_star=xs, residual=float(residual), iters=int(iters), lam=lam)
        if status == 1:
            raise ProjectionError(
                f"projection stalled inside the inner solve at iteration {iters}",
                x_last=xs, residual=float(residual))
        raise InnerSolveError(
            f"extragradient did not reach tol={params.tol_inner:g} within "
            f"{params.max_iters} iterations (last residual {residual:.3e}); "
            "check the step size against the map's Lipschitz constant",
            x_last=xs, residual=float(residual))

    # weighted variant: steps are P^{-1}-scaled and projections taken in the
    # P metric, so fixed points solve the original VI for any diagonal P > 0
    pinv = None if params.P_diag is None else 1.0 / params.P_diag
    # the two projections per iteration chase different optima; warm-start
    # each from its own predecessor
    lam_y = lam
    lam_x = lam.copy()
    residual = np.inf
    for k in range(params.max_iters):
        g = M @ x + r
        step = tau * g if pinv is None else tau * (pinv * g)
        y, lam_y = geom.project_with_dual(x - step, lam0=lam_y, tol=ptol,
                                          weights=params.P_diag)
        residual = float(np.linalg.norm(x - y))
        if residual <= params.tol_inner:
            return VgneSolution(x_star=x, residual=residual, iters=k, lam=lam_y)
        g = M @ y + r
        step = tau * g if pinv is None else tau * (pinv * g)
        x, lam_x = geom.project_with_dual(x - step, lam0=lam_x, tol=ptol,
                                          weights=params.P_diag)
    raise InnerSolveError(
        f"extragradient did not reach tol={params.tol_inner:g} within "
        f"{params.max_iters} iterations (last residual {residual:.3e}); "
        "check the step size against the map's Lipschitz constant",
        x_last=x, residual=residual)


def affine_vi_oracle(M, r, geom: FeasibleGeometry, tol: float = 1e-9,
                     max_candidates: int = 5_000_000) -> np.ndarray:
    """Solve the affine VI by KKT enumeration; verification oracle only.

    Enumerates every assignment of box coordinates to {free, lower, upper}
    and every subset of active coupling rows, solves the corresponding KKT
    equality system, and accepts the candidate iff it is primal feasible with
    correctly signed multipliers.  Exponential in the dimensions; intended
    for desk-scale cross-checks (n <= 10 or so).
    """
    M = np.asarray(M, dtype=float)
    r = np.asarray(r, dtype=float).reshape(-1)
    n, m = geom.n, geom.m
    if M.shape != (n, n) or r.shape != (n,):
        raise ValueError("map dimensions do not match the geometry")
    total = (3 ** n) * (2 ** m)
    if total > max_candidates:
        raise ValueError(
            f"enumeration would visit {total} candidate active sets; "
            "the oracle is restricted to desk-scale problems")

    A, b, lo, up = geom.A, geom.b, geom.lo, geom.up
    row_sets = [list(S) for size in range(m + 1)
                for S in itertools.combinations(range(m), size)]
    for statuses in itertools.product((0, 1, 2), repeat=n):
        statuses = np.array(statuses)
        free = np.flatnonzero(statuses == 0)
        x = np.where(statuses == 1, lo, up).astype(float)
        x[free] = 0.0
        for S in row_sets:
            nf, ns = free.size, len(S)
            dim = nf + ns
            K = np.zeros((dim, dim))
            rhs = np.zeros(dim)
            x_fixed = x.copy()
            x_fixed[free] = 0.0
            # stationarity on free coordinates
            K[:nf, :nf] = M[np.ix_(free, free)]
            if ns:
                K[:nf, nf:] = A[np.ix_(S, free)].T
                K[nf:, :nf] = A[np.ix_(S, free)]
            rhs[:nf] = -(M @ x_fixed + r)[free]
            if ns:
                rhs[nf:] = b[S] - A[S] @ x_fixed
            try:
                sol = np.linalg.solve(K, rhs) if dim else np.zeros(0)
            except np.linalg.LinAlgError:
                continue
            if dim and not np.all(np.isfinite(sol)):
                continue
            xc = x_fixed.copy()
            xc[free] = sol[:nf]
            lam = sol[nf:]
            # primal feasibility
            if np.any(xc[free] < lo[free] - tol) or np.any(xc[free] > up[free] + tol):
                continue
            if m and np.any(A @ xc > b + tol):
                continue
            if ns and np.any(lam < -tol):
                continue
            # box multiplier signs: grad = F(x) + A_S' lam must push outward
            grad = M @ xc + r
            if ns:
                grad = grad + A[S].T @ lam
            at_lo = statuses == 1
            at_up = statuses == 2
            if np.any(grad[at_lo] < -tol) or np.any(grad[at_up] > tol):
                continue
            return xc
    raise OracleInconsistencyError(
        "no KKT candidate accepted; the map may not be strongly monotone "
        "or the geometry may be empty")
