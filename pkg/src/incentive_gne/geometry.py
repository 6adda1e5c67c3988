"""Polyhedral feasible set: a box product intersected with coupling rows.

The set is Omega = {x : lo <= x <= up, A x <= b}.  Euclidean projection onto
Omega is computed by accelerated projected gradient ascent on the dual of the
projection QP: for multipliers lam >= 0 attached to the coupling rows, the
inner minimizer is the box clip of z - A' lam, so each dual step costs two
small matrix-vector products.  The dual iteration warm-starts well, which the
solvers exploit by threading the last multiplier through repeated calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class ProjectionError(RuntimeError):
    """Dual iteration hit its cap; carries the last iterate and residual."""

    def __init__(self, message, x_last=None, residual=None):
        super().__init__(message)
        self.x_last = x_last
        self.residual = residual


class EmptyFeasibleSetError(ValueError):
    """The geometry could not be certified nonempty."""


@dataclass
class FeasibleGeometry:
    """Box bounds plus coupling rows A x <= b.

    lo, up : (n,) arrays with lo <= up componentwise.
    A : (m, n) array; b : (m,) array.  m = 0 means box only.
    """

    lo: np.ndarray
    up: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float).reshape(-1)
        self.up = np.asarray(self.up, dtype=float).reshape(-1)
        if self.lo.shape != self.up.shape:
            raise ValueError("box bounds have mismatched lengths")
        if np.any(self.lo > self.up):
            bad = int(np.argmax(self.lo > self.up))
            raise ValueError(f"empty box at coordinate {bad}: lo > up")
        n = self.lo.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n) if np.size(self.A) else np.zeros((0, n))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.size:
            raise ValueError("A and b have mismatched row counts")

    @property
    def n(self) -> int:
        return self.lo.size

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @cached_property
    def _dual_step(self) -> float:
        if self.m == 0:
            return 0.0
        # Lipschitz constant of the dual gradient is at most ||A||_2^2.
        s = float(np.linalg.norm(self.A, 2)) ** 2
        return 1.0 / max(s, 1e-300)

    @cached_property
    def _AT(self) -> np.ndarray:
        return np.ascontiguousarray(self.A.T)

    def clip(self, z) -> np.ndarray:
        return np.minimum(np.maximum(np.asarray(z, dtype=float), self.lo), self.up)

    def is_feasible(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.n,):
            raise ValueError(f"point has dimension {x.size}, expected {self.n}")
        if np.any(x < self.lo - tol) or np.any(x > self.up + tol):
            return False
        if self.m and np.any(self.A @ x > self.b + tol):
            return False
        return True

    def project(self, z, tol: float = 1e-10, max_iters: int = 100_000) -> np.ndarray:
        return self.project_with_dual(z, tol=tol, max_iters=max_iters)[0]

    def project_with_dual(self, z, lam0=None, tol: float = 1e-10,
                          max_iters: int = 100_000, weights=None):
        """Projection onto Omega, returning (x, lam).

        Euclidean by default; `weights` (a positive diagonal) switches to the
        weighted metric sum_k w_k (x_k - z_k)^2, whose box prox is still a
        clip.  Stops when the complementarity residual
        max_i |min(lam_i, b_i - A_i x)| is at most tol; x then satisfies the
        projection KKT system to the same order.  lam0 warm-starts the dual.
        """
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape != (self.n,):
            raise ValueError(f"point has dimension {z.size}, expected {self.n}")
        lo, up, A, At, b = self.lo, self.up, self.A, self._AT, self.b
        x = np.minimum(np.maximum(z, lo), up)
        if self.m == 0:
            return x, np.zeros(0)
        slack = b - A @ x
        if slack.min() >= 0.0:
            # the box clip is already coupling-feasible, so it is the projection
            return x, np.zeros(self.m)

        if weights is None:
            s = self._dual_step
        else:
            weights = np.asarray(weights, dtype=float).reshape(-1)
            At = At / weights[:, None]
            s = 1.0 / max(float(np.linalg.norm(self.A / np.sqrt(weights), 2)) ** 2, 1e-300)
        lam = np.zeros(self.m) if lam0 is None else np.maximum(lam0, 0.0)
        mu = lam
        tk = 1.0
        residual = np.inf
        for _ in range(max_iters):
            x_mu = np.minimum(np.maximum(z - At @ mu, lo), up)
            lam_new = np.maximum(mu + s * (A @ x_mu - b), 0.0)
            x = np.minimum(np.maximum(z - At @ lam_new, lo), up)
            slack = b - A @ x
            residual = np.abs(np.minimum(lam_new, slack)).max()
            if residual <= tol:
                return x, lam_new
            # Nesterov momentum with gradient-based adaptive restart.
            if (mu - lam_new) @ (lam_new - lam) > 0.0:
                tk = 1.0
                mu = lam_new
            else:
                tk_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
                mu = lam_new + ((tk - 1.0) / tk_new) * (lam_new - lam)
                tk = tk_new
            lam = lam_new
        raise ProjectionError(
            f"projection did not reach tol={tol:g} in {max_iters} dual iterations "
            f"(last residual {residual:.3e})", x_last=x, residual=float(residual))

    def check_nonempty(self, tol: float = 1e-9, max_iters: int = 50_000):
        """Certify Omega nonempty; returns (ok, witness).

        Minimizes the worst coupling violation over the box with a Polyak
        subgradient step (target value 0).  Nonempty geometries yield a
        witness with violation <= tol; otherwise (ok=False, None) after the
        iteration cap.
        """
        x = self.clip(np.zeros(self.n))
        if self.m == 0:
            return True, x
        for _ in range(max_iters):
            viol = self.A @ x - self.b
            j = int(np.argmax(viol))
            worst = float(viol[j])
            if worst <= tol:
                return True, x
            g = self.A[j]
            gn = float(g @ g)
            if gn <= 0.0:
                return False, None  # zero row with positive violation: empty
            x_new = self.clip(x - (worst / gn) * g)
            if np.max(np.abs(x_new - x)) <= 1e-16:
                return False, None  # stalled on the box, no progress possible
            x = x_new
        return False, None

    def sample_feasible(self, rng: np.random.Generator, witness=None) -> np.ndarray:
        """Random feasible point: a random box point pulled toward a witness.

        Draws u uniform in the box, then takes the longest feasible segment
        from the witness toward u and a uniform point on it.  Cheap and gives
        well-spread interior points even when the polytope is a thin sliver
        of the box.
        """
        if witness is None:
            ok, witness = self.check_nonempty()
            if not ok:
                raise EmptyFeasibleSetError("cannot sample from an empty set")
        u = self.lo + rng.uniform(size=self.n) * (self.up - self.lo)
        if self.m == 0:
            return u
        d = u - witness
        Ad = self.A @ d
        slack = self.b - self.A @ witness
        with np.errstate(divide="ignore"):
            ratios = np.where(Ad > 1e-15, slack / np.maximum(Ad, 1e-300), np.inf)
        gamma_max = float(min(1.0, np.min(ratios)))
        gamma_max = max(gamma_max, 0.0)
        return witness + rng.uniform(0.0, gamma_max) * d

    def probe_points(self, rng: np.random.Generator, count: int, witness=None) -> list:
        """count feasible excitation points, alternating interior line samples
        with projections of box-uniform draws (which hug the far boundary).
        The mix spreads both the linear and the quadratic monomials much
        better than either family alone."""
        points = []
        for k in range(count):
            if k % 2 == 0:
                points.append(self.sample_feasible(rng, witness=witness))
            else:
                u = self.lo + rng.uniform(size=self.n) * (self.up - self.lo)
                points.append(self.project(u))
        return points
