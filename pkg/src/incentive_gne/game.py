"""Quadratic game model: per-agent costs, pseudo-gradient, potential, curvature.

A game couples N agents through quadratic costs

    J_i(x) = 1/2 x_i' Q_i x_i + (sum_{j != i} C_{i,j} x_j + q_i)' x_i.

When the cross blocks satisfy C_{i,j} = C_{j,i}', the stacked map of partial
gradients is the gradient field of a single scalar potential, and the block
matrix Q assembled from (Q_i, C_{i,j}) is symmetric.  All downstream machinery
(incentive design, descent accounting) relies on that symmetry, so it is a
validated admission requirement rather than a soft convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

SYMMETRY_TOL = 1e-12


class GameStructureError(ValueError):
    """Declared agent dimensions do not match the supplied block shapes."""


@dataclass(frozen=True)
class SymmetryViolation:
    """One violated symmetry requirement, with the offending pair."""

    kind: str  # "diag_block" or "cross_block"
    pair: tuple[int, int]
    deviation: float


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[SymmetryViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "admissible"
        lines = [
            f"{v.kind} {v.pair}: max deviation {v.deviation:.3e}"
            for v in self.violations
        ]
        return "; ".join(lines)


@dataclass(frozen=True)
class WeakConvexityCertificate:
    """Weak-convexity constant of the potential, ell = |lambda_min(Q)|.

    The absolute value is kept even when lambda_min > 0 (convex case), so the
    incentive gain rule c >= 2*ell stays valid verbatim.
    """

    ell: float
    lambda_min: float


@dataclass
class QuadraticGame:
    """Immutable-by-convention container for the game blocks.

    Parameters
    ----------
    dims : per-agent decision dimensions (n_1, ..., n_N).
    Q_blocks : list of symmetric (n_i, n_i) arrays.
    C_blocks : mapping (i, j) -> (n_i, n_j) array for i != j, 0-based agent
        indices; missing pairs are treated as zero coupling.
    q : list of (n_i,) arrays.
    """

    dims: tuple[int, ...]
    Q_blocks: tuple[np.ndarray, ...]
    C_blocks: dict[tuple[int, int], np.ndarray]
    q: tuple[np.ndarray, ...]

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if any(d <= 0 for d in self.dims):
            raise GameStructureError(f"agent dimensions must be positive: {self.dims}")
        self.Q_blocks = tuple(
            np.asarray(b, dtype=float) for b in self.Q_blocks
        )
        self.q = tuple(np.asarray(v, dtype=float).reshape(-1) for v in self.q)
        self.C_blocks = {
            (int(i), int(j)): np.asarray(b, dtype=float)
            for (i, j), b in self.C_blocks.items()
        }
        self._check_shapes()

    def _check_shapes(self):
        N = self.num_agents
        if len(self.Q_blocks) != N or len(self.q) != N:
            raise GameStructureError(
                f"expected {N} Q blocks and q vectors, got "
                f"{len(self.Q_blocks)} and {len(self.q)}"
            )
        for i, (d, Qi, qi) in enumerate(zip(self.dims, self.Q_blocks, self.q)):
            if Qi.shape != (d, d):
                raise GameStructureError(f"Q block {i} has shape {Qi.shape}, expected {(d, d)}")
            if qi.shape != (d,):
                raise GameStructureError(f"q vector {i} has shape {qi.shape}, expected {(d,)}")
        for (i, j), Cij in self.C_blocks.items():
            if i == j or not (0 <= i < N and 0 <= j < N):
                raise GameStructureError(f"invalid coupling key {(i, j)}")
            if Cij.shape != (self.dims[i], self.dims[j]):
                raise GameStructureError(
                    f"C block {(i, j)} has shape {Cij.shape}, "
                    f"expected {(self.dims[i], self.dims[j])}"
                )

    @property
    def num_agents(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return sum(self.dims)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(np.concatenate(([0], np.cumsum(self.dims))).astype(int))

    def block(self, i: int) -> slice:
        """Index slice of agent i inside a joint strategy vector."""
        return slice(self.offsets[i], self.offsets[i + 1])

    def coupling(self, i: int, j: int) -> np.ndarray:
        """C_{i,j}, zero when the pair is uncoupled."""
        blk = self.C_blocks.get((i, j))
        if blk is None:
            return np.zeros((self.dims[i], self.dims[j]))
        return blk

    @cached_property
    def Q(self) -> np.ndarray:
        """Assembled (n, n) matrix with Q_i on the diagonal, C_{i,j} off it."""
        Q = np.zeros((self.n, self.n))
        for i in range(self.num_agents):
            Q[self.block(i), self.block(i)] = self.Q_blocks[i]
        for (i, j), Cij in self.C_blocks.items():
            Q[self.block(i), self.block(j)] = Cij
        return Q

    @cached_property
    def q_full(self) -> np.ndarray:
        return np.concatenate(self.q)

    @cached_property
    def operator_norm(self) -> float:
        """Spectral norm of Q (symmetric, so the largest |eigenvalue|)."""
        return float(np.max(np.abs(np.linalg.eigvalsh(self.Q))))

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.n,):
            raise ValueError(f"joint strategy has dimension {x.size}, expected {self.n}")
        return x

    def agent_cost(self, i: int, x) -> float:
        """J_i(x) for agent index i in range(N)."""
        if not 0 <= i < self.num_agents:
            raise IndexError(f"agent index {i} out of range(0, {self.num_agents})")
        x = self._check_x(x)
        xi = x[self.block(i)]
        lin = self.q[i].copy()
        for j in range(self.num_agents):
            if j == i:
                continue
            Cij = self.C_blocks.get((i, j))
            if Cij is not None:
                lin += Cij @ x[self.block(j)]
        return float(0.5 * xi @ self.Q_blocks[i] @ xi + lin @ xi)

    def pseudo_gradient(self, x) -> np.ndarray:
        """Stacked partial gradients (Q x + q)."""
        x = self._check_x(x)
        return self.Q @ x + self.q_full

    def all_costs(self, x) -> np.ndarray:
        """Vector of every agent's cost at x.

        Uses J_i = g_i' x_i - 1/2 x_i' Q_i x_i with g the pseudo-gradient,
        one matvec for all agents instead of N quadratic-form loops.
        """
        x = self._check_x(x)
        g = self.Q @ x + self.q_full
        costs = np.empty(self.num_agents)
        for i in range(self.num_agents):
            sl = self.block(i)
            xi = x[sl]
            costs[i] = g[sl] @ xi - 0.5 * xi @ self.Q_blocks[i] @ xi
        return costs

    def potential(self, x) -> float:
        """Scalar potential whose gradient is the pseudo-gradient.

        Each cross coupling is counted once, on the lexicographically later
        agent of the pair (j < i carries the term).
        """
        x = self._check_x(x)
        total = 0.0
        for i in range(self.num_agents):
            xi = x[self.block(i)]
            total += 0.5 * xi @ self.Q_blocks[i] @ xi + self.q[i] @ xi
            for j in range(i):
                Cij = self.C_blocks.get((i, j))
                if Cij is not None:
                    total += (Cij @ x[self.block(j)]) @ xi
        return float(total)

    def weak_convexity(self) -> WeakConvexityCertificate:
        """Weak-convexity constant ell = |lambda_min(Q)| of the potential."""
        try:
            eigs = np.linalg.eigvalsh(self.Q)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - eigvalsh on
            # a finite symmetric matrix essentially cannot fail, but the
            # contract requires surfacing the matrix when it does.
            raise FloatingPointError(f"eigensolver failed on Q={self.Q!r}") from exc
        lam_min = float(eigs[0])
        return WeakConvexityCertificate(ell=abs(lam_min), lambda_min=lam_min)


def validate_game(game: QuadraticGame, tol: float = SYMMETRY_TOL) -> ValidationReport:
    """Check the symmetry requirements; shape errors raise GameStructureError.

    The report lists every violated block-symmetry requirement with the
    offending pair and its worst deviation.  An empty report certifies the
    game admissible: every Q_i symmetric, C_{i,j} = C_{j,i}' for all pairs,
    hence the assembled Q symmetric.
    """
    game._check_shapes()
    violations = []
    for i, Qi in enumerate(game.Q_blocks):
        dev = float(np.max(np.abs(Qi - Qi.T))) if Qi.size else 0.0
        if dev > tol:
            violations.append(SymmetryViolation("diag_block", (i, i), dev))
    for i in range(game.num_agents):
        for j in range(i + 1, game.num_agents):
            Cij = game.coupling(i, j)
            Cji = game.coupling(j, i)
            dev = float(np.max(np.abs(Cij - Cji.T))) if Cij.size else 0.0
            if dev > tol:
                violations.append(SymmetryViolation("cross_block", (i, j), dev))
    return ValidationReport(tuple(violations))
