"""Coordinator-side learning of the game's pseudo-gradient from cost feedback.

Agents report noisy scalar costs p_i = J_i(x) + eps at the points the outer
loop visits.  Three interchangeable learners turn that history into a
pseudo-gradient estimate Ghat(x):

* ``PerfectEstimator`` reads the true game (simulation-only shortcut).
* ``LeastSquaresEstimator`` fits each agent's quadratic cost coefficients by
  ridge-regularized least squares on monomial features; the induced affine
  gradient is evaluated after symmetrizing the cross blocks, so the implied
  game always satisfies the symmetric-interaction requirement.
* ``GaussianProcessEstimator`` places a zero-mean RBF prior on each cost and
  returns the analytic gradient of the posterior mean with respect to the
  owning agent's block.

All three are deterministic functions of the observation history.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import QuadraticGame


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian feedback noise; sigma2 = 0 gives exact feedback."""

    mu: float = 0.0
    sigma2: float = 0.0

    def __post_init__(self):
        if self.sigma2 < 0.0:
            raise ValueError(f"noise variance must be nonnegative, got {self.sigma2:g}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.sigma2 == 0.0:
            return np.full(size, self.mu)
        return rng.normal(self.mu, np.sqrt(self.sigma2), size=size)


@dataclass(frozen=True)
class FeedbackSample:
    """One round of agent feedback: the visited point and observed costs."""

    t: int
    x: np.ndarray
    costs: np.ndarray  # (N,) observed p_i


def feedback(game: QuadraticGame, x, noise: NoiseModel,
             rng: np.random.Generator, t: int = 0) -> FeedbackSample:
    """Observed costs p_i = J_i(x) + eps_i, independent across agents."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return FeedbackSample(t=t, x=x.copy(),
                          costs=game.all_costs(x) + noise.draw(rng, game.num_agents))


class PerfectEstimator:
    """Oracle learner: returns the true pseudo-gradient, ignores feedback."""

    def __init__(self, game: QuadraticGame):
        self.game = game

    def observe(self, sample: FeedbackSample) -> None:
        pass

    def estimate_gradient(self, x) -> np.ndarray:
        return self.game.pseudo_gradient(x)


def _features_for_agent(dims, offsets, i, x):
    """Monomial feature row for agent i's quadratic cost.

    Agent i's cost is linear in the parameter vector
    (Q_i upper triangle, vec(C_{i,j}) for j != i, q_i) against features
    (x_i x_i' upper triangle scaled by 1/2, kron(x_i, x_j) for j != i, x_i).
    Diagonal entries of the quadratic part carry Q_i's diagonal directly;
    off-diagonal parameters equal twice the corresponding Q_i entry.
    """
    ni = dims[i]
    xi = x[offsets[i]:offsets[i] + ni]
    outer = np.outer(xi, xi)
    iu = np.triu_indices(ni)
    parts = [0.5 * outer[iu]]
    for j in range(len(dims)):
        if j == i:
            continue
        xj = x[offsets[j]:offsets[j] + dims[j]]
        parts.append(np.outer(xi, xj).ravel())
    parts.append(xi)
    return np.concatenate(parts)


class LeastSquaresEstimator:
    """Per-agent ridge regression on the quadratic cost's monomial features.

    The cross blocks recovered for agents i and j are reconciled pairwise,
    Chat_{i,j} <- (Chat_{i,j} + Chat_{j,i}') / 2, before the gradient is
    assembled, so the estimate is always the gradient field of a symmetric
    quadratic game.  With an empty history the estimate is identically zero.
    """

    def __init__(self, dims, ridge: float = 1e-6, window: int | None = None):
        self.dims = tuple(int(d) for d in dims)
        self.offsets = np.concatenate(([0], np.cumsum(self.dims))).astype(int)
        self.n = int(np.sum(self.dims))
        self.ridge = float(ridge)
        self.window = window
        self._rows = [[] for _ in self.dims]     # feature rows per agent
        self._targets = [[] for _ in self.dims]  # observed costs per agent
        self._fit = None

    @property
    def history_length(self) -> int:
        return len(self._targets[0]) if self.dims else 0

    def observe(self, sample: FeedbackSample) -> None:
        x = np.asarray(sample.x, dtype=float).reshape(-1)
        for i in range(len(self.dims)):
            self._rows[i].append(_features_for_agent(self.dims, self.offsets, i, x))
            self._targets[i].append(float(sample.costs[i]))
            if self.window is not None and len(self._rows[i]) > self.window:
                self._rows[i].pop(0)
                self._targets[i].pop(0)
        self._fit = None

    def _unpack(self, i, eta):
        ni = self.dims[i]
        iu = np.triu_indices(ni)
        k = iu[0].size
        Qi = np.zeros((ni, ni))
        Qi[iu] = eta[:k]
        # diagonal params equal Q_kk, off-diagonal params equal 2*Q_kl
        Qi = 0.5 * (Qi + Qi.T)
        pos = k
        C = {}
        for j in range(len(self.dims)):
            if j == i:
                continue
            nj = self.dims[j]
            C[j] = eta[pos:pos + ni * nj].reshape(ni, nj)
            pos += ni * nj
        qi = eta[pos:pos + ni]
        return Qi, C, qi

    def _refit(self):
        blocks = []
        for i in range(len(self.dims)):
            Phi = np.asarray(self._rows[i])
            p = np.asarray(self._targets[i])
            d = Phi.shape[1]
            gram = Phi.T @ Phi + self.ridge * np.eye(d)
            eta = np.linalg.solve(gram, Phi.T @ p)
            blocks.append(self._unpack(i, eta))
        # pairwise symmetrization of the cross blocks
        for i in range(len(self.dims)):
            for j in range(i + 1, len(self.dims)):
                S = 0.5 * (blocks[i][1][j] + blocks[j][1][i].T)
                blocks[i][1][j] = S
                blocks[j][1][i] = S.T
        self._fit = blocks

    def implied_game(self) -> QuadraticGame:
        """The symmetric quadratic game induced by the current fit."""
        if self._fit is None:
            if self.history_length == 0:
                zero_Q = [np.zeros((d, d)) for d in self.dims]
                zero_q = [np.zeros(d) for d in self.dims]
                return QuadraticGame(self.dims, zero_Q, {}, zero_q)
            self._refit()
        Qb = [blk[0] for blk in self._fit]
        qv = [blk[2] for blk in self._fit]
        Cb = {}
        for i, blk in enumerate(self._fit):
            for j, Cij in blk[1].items():
                Cb[(i, j)] = Cij
        return QuadraticGame(self.dims, Qb, Cb, qv)

    def estimate_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if self.history_length == 0:
            return np.zeros(self.n)
        if self._fit is None:
            self._refit()
        g = np.zeros(self.n)
        for i in range(len(self.dims)):
            Qi, C, qi = self._fit[i]
            sl = slice(self.offsets[i], self.offsets[i] + self.dims[i])
            gi = Qi @ x[sl] + qi
            for j, Cij in C.items():
                slj = slice(self.offsets[j], self.offsets[j] + self.dims[j])
                gi = gi + Cij @ x[slj]
            g[sl] = gi
        return g


class GaussianProcessEstimator:
    """RBF-kernel posterior-mean gradients, one scalar GP per agent cost.

    All agents share the sample locations, so a single Cholesky factor per
    refit serves every agent's posterior weights.  The observation-noise
    variance defaults to the feedback noise; when that is zero a small jitter
    ladder keeps the factorization stable (the posterior mean then
    interpolates the observed costs).
    """

    JITTER_LADDER = (1e-12, 1e-10, 1e-8, 1e-6)

    def __init__(self, dims, length_scale: float = 50.0, signal_scale: float = 100.0,
                 noise_variance: float = 0.0, window: int | None = None):
        if length_scale <= 0 or signal_scale <= 0:
            raise ValueError("kernel scales must be positive")
        self.dims = tuple(int(d) for d in dims)
        self.offsets = np.concatenate(([0], np.cumsum(self.dims))).astype(int)
        self.n = int(np.sum(self.dims))
        self.length_scale = float(length_scale)
        self.signal_scale = float(signal_scale)
        self.noise_variance = float(noise_variance)
        self.window = window
        self._X = []       # sample locations, each (n,)
        self._P = []       # per-sample cost vectors, each (N,)
        self._weights = None  # (S, N) posterior weights, shared locations

    @property
    def history_length(self) -> int:
        return len(self._X)

    def observe(self, sample: FeedbackSample) -> None:
        self._X.append(np.asarray(sample.x, dtype=float).reshape(-1))
        self._P.append(np.asarray(sample.costs, dtype=float).reshape(-1))
        if self.window is not None and len(self._X) > self.window:
            self._X.pop(0)
            self._P.pop(0)
        self._weights = None

    def _kernel(self, X, Z):
        d2 = np.sum((X[:, None, :] - Z[None, :, :]) ** 2, axis=-1)
        return (self.signal_scale ** 2) * np.exp(-0.5 * d2 / self.length_scale ** 2)

    def _refit(self):
        X = np.asarray(self._X)
        P = np.asarray(self._P)
        S = X.shape[0]
        K = self._kernel(X, X)
        sf2 = self.signal_scale ** 2
        if self.noise_variance > 0.0:
            K[np.diag_indices(S)] += self.noise_variance
            ladder = (0.0,) + self.JITTER_LADDER
        else:
            ladder = self.JITTER_LADDER
        err = None
        for jit in ladder:
            try:
                L = np.linalg.cholesky(K + (jit * sf2) * np.eye(S))
            except np.linalg.LinAlgError as exc:
                err = exc
                continue
            self._weights = np.linalg.solve(L.T, np.linalg.solve(L, P))
            return
        raise FloatingPointError(
            f"GP kernel factorization failed for {S} samples even with "
            f"jitter {self.JITTER_LADDER[-1]:g}") from err

    def predict_costs(self, x) -> np.ndarray:
        """Posterior-mean cost of every agent at x (zero with no history)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if not self._X:
            return np.zeros(len(self.dims))
        if self._weights is None:
            self._refit()
        k = self._kernel(x[None, :], np.asarray(self._X))[0]
        return k @ self._weights

    def estimate_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if not self._X:
            return np.zeros(self.n)
        if self._weights is None:
            self._refit()
        X = np.asarray(self._X)
        k = self._kernel(x[None, :], X)[0]  # (S,)
        g = np.zeros(self.n)
        inv_l2 = 1.0 / self.length_scale ** 2
        for i in range(len(self.dims)):
            sl = slice(self.offsets[i], self.offsets[i] + self.dims[i])
            diff = x[sl][None, :] - X[:, sl]           # (S, n_i)
            w = self._weights[:, i] * k                # (S,)
            g[sl] = -inv_l2 * (w @ diff)
        return g


def make_estimator(kind: str, game: QuadraticGame, ridge: float = 1e-6,
                   gp_length_scale: float = 50.0, gp_signal_scale: float = 100.0,
                   noise_variance: float = 0.0, window: int | None = None):
    """Build a learner by config name: 'perfect', 'ls', or 'gp'."""
    if kind == "perfect":
        return PerfectEstimator(game)
    if kind == "ls":
        return LeastSquaresEstimator(game.dims, ridge=ridge, window=window)
    if kind == "gp":
        return GaussianProcessEstimator(
            game.dims, length_scale=gp_length_scale, signal_scale=gp_signal_scale,
            noise_variance=noise_variance, window=window)
    raise ValueError(f"unknown estimator kind {kind!r}; expected perfect | ls | gp")


@dataclass
class ReconstructionDiagnostics:
    """Measured gradient-reconstruction errors and their settled envelope.

    envelope(t) = min(envelope(t-1), max of the trailing window of measured
    errors): nonincreasing by construction, tracking the level the errors
    have settled below.  Simulation-only diagnostic; it reads the true game.
    """

    window: int = 10
    errors: list = field(default_factory=list)
    envelope: list = field(default_factory=list)

    def record(self, error: float) -> float:
        self.errors.append(float(error))
        recent = max(self.errors[-self.window:])
        env = recent if not self.envelope else min(self.envelope[-1], recent)
        self.envelope.append(env)
        return env

    def measure(self, game: QuadraticGame, estimator, x) -> float:
        """Record ||Ghat(x) - G(x)|| at x and update the envelope."""
        err = float(np.linalg.norm(
            np.asarray(estimator.estimate_gradient(x)) - game.pseudo_gradient(x)))
        self.record(err)
        return err
