"""Outer loop of the two-layer scheme, with full descent and bound accounting.

Round t: the coordinator integrates the feedback collected at round t-1,
estimates the pseudo-gradient at the previous equilibrium, builds the
personalized incentives, the agents solve the regularized inner VI to the
round's unique equilibrium x*_t, and feedback is collected there.  The trace
records everything the convergence analysis talks about:

* fixed-point residual ||x*_t - x*_{t-1}|| and its running average,
* potential values and the per-round descent slack
  theta(x*_t) - theta(x*_{t-1}) + beta_t ||x*_t - x*_{t-1}||^2
  (nonpositive up to solver tolerance under perfect reconstruction),
* measured reconstruction error of the estimate actually used each round,
  with its settled envelope,
* the certified average-residual bound built from those measured errors.

Stationarity of candidate limit points is certified through the projected
gradient fixed-point residual of the potential over the feasible set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimators import NoiseModel, ReconstructionDiagnostics, feedback
from .game import QuadraticGame
from .geometry import FeasibleGeometry
from .incentives import IncentiveSchedule, IncentiveState, extended_mapping
from .inner_solver import SolverParams, solve_vgne

FEASIBILITY_TOL = 1e-8


@dataclass
class RunTrace:
    """Per-round record of one orchestrated run; index 0 is the start point."""

    xs: np.ndarray              # (T+1, n) visited equilibria
    theta: np.ndarray           # (T+1,) potential values
    residuals: np.ndarray       # (T,) ||x*_t - x*_{t-1}||, t = 1..T
    inner_iters: np.ndarray     # (T,) extragradient iterations per round
    eps_measured: np.ndarray    # (T,) reconstruction error of the round's estimate
    envelope: np.ndarray        # (T,) settled nonincreasing error envelope
    alpha: np.ndarray           # (T,)
    kappa: np.ndarray           # (T,)
    beta: np.ndarray            # (T,)
    descent_slack: np.ndarray   # (T,) theta drop + beta * residual^2
    metadata: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return self.residuals.size

    def cumulative_average_residual(self) -> np.ndarray:
        if self.rounds == 0:
            return np.zeros(0)
        return np.cumsum(self.residuals) / np.arange(1, self.rounds + 1)


@dataclass(frozen=True)
class StationarityCertificate:
    x: np.ndarray
    residual: float
    w: float


def default_start(geom: FeasibleGeometry) -> np.ndarray:
    """Default initial equilibrium guess: the projection of the origin."""
    return geom.project(np.zeros(geom.n))


def run(game: QuadraticGame, geom: FeasibleGeometry, estimator,
        schedule: IncentiveSchedule, T: int, x0, noise: NoiseModel | None = None,
        rng: np.random.Generator | None = None, *,
        solver_params: SolverParams | None = None, probe_count: int = 0,
        envelope_window: int = 10) -> RunTrace:
    """Run T outer rounds from the feasible start x0.

    Deterministic given (rng seed, configuration).  probe_count > 0 adds that
    many random feasible cost evaluations to the feedback after every round,
    which excites the least-squares features far better than equilibrium
    points alone.  Raises InnerSolveError with a partial-state message if an
    inner solve fails to converge.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if not geom.is_feasible(x, tol=FEASIBILITY_TOL):
        raise ValueError("x0 is not feasible; use default_start or project it first")
    noise = noise or NoiseModel()
    rng = rng if rng is not None else np.random.default_rng(0)
    params = solver_params or SolverParams()

    n = game.n
    xs = np.zeros((T + 1, n))
    theta = np.zeros(T + 1)
    residuals = np.zeros(T)
    inner_iters = np.zeros(T, dtype=int)
    eps_measured = np.zeros(T)
    alpha = np.zeros(T)
    kappa = np.zeros(T)
    beta = np.zeros(T)
    slack = np.zeros(T)
    diag = ReconstructionDiagnostics(window=envelope_window)

    xs[0] = x
    theta[0] = game.potential(x)
    witness = None
    if probe_count > 0:
        ok, witness = geom.check_nonempty()
        if not ok:
            raise ValueError("cannot probe an empty feasible set")

    pending = []
    lam = None          # projection dual threaded across rounds
    tau_cache = {}      # gain value -> extragradient step
    for t in range(1, T + 1):
        for sample in pending:
            estimator.observe(sample)
        pending.clear()

        ghat = np.asarray(estimator.estimate_gradient(x), dtype=float)
        eps_measured[t - 1] = diag.measure(game, estimator, x)
        state = IncentiveState(x_prev=x, ghat_prev=ghat, t=t)
        amap = extended_mapping(game, state, schedule)

        c = schedule.gain(t)
        if c not in tau_cache:
            tau_cache[c] = 0.9 / max(amap.spectral_norm(), 1e-300)
        round_params = SolverParams(
            tau=tau_cache[c], P_diag=params.P_diag, tol_inner=params.tol_inner,
            max_iters=params.max_iters, projection_tol=params.projection_tol)

        sol = solve_vgne(amap, geom, round_params, x0=x, lam0=lam)
        lam = sol.lam
        x_new = sol.x_star
        if not geom.is_feasible(x_new, tol=FEASIBILITY_TOL):
            raise RuntimeError(f"round {t}: inner solution left the feasible set")

        residuals[t - 1] = float(np.linalg.norm(x_new - x))
        inner_iters[t - 1] = sol.iters
        alpha[t - 1] = schedule.alpha(t)
        kappa[t - 1] = schedule.kappa(t)
        beta[t - 1] = schedule.beta(t)
        theta[t] = game.potential(x_new)
        slack[t - 1] = theta[t] - theta[t - 1] + beta[t - 1] * residuals[t - 1] ** 2
        xs[t] = x_new

        pending.append(feedback(game, x_new, noise, rng, t=t))
        for xp in geom.probe_points(rng, probe_count, witness=witness):
            pending.append(feedback(game, xp, noise, rng, t=t))
        x = x_new

    return RunTrace(
        xs=xs, theta=theta, residuals=residuals, inner_iters=inner_iters,
        eps_measured=eps_measured, envelope=np.asarray(diag.envelope),
        alpha=alpha, kappa=kappa, beta=beta, descent_slack=slack,
        metadata={"T": T, "probe_count": probe_count})


def average_residual(trace: RunTrace, window: tuple[int, int] | None = None) -> float:
    """Mean fixed-point residual over a 1-based inclusive round window."""
    lo, hi = window if window is not None else (1, trace.rounds)
    if not (1 <= lo <= hi <= trace.rounds):
        raise ValueError(f"window {window} outside rounds 1..{trace.rounds}")
    return float(np.mean(trace.residuals[lo - 1:hi]))


def stationarity_residual(game: QuadraticGame, geom: FeasibleGeometry, x,
                          w: float = 1.0) -> StationarityCertificate:
    """Projected-gradient fixed-point residual of the potential at x.

    Zero exactly when the scaled gradient inclusion w*(Qx + q) + N_Omega(x)
    owns zero, i.e. when x is a constrained stationary point; w only scales
    the magnitude, never the zero set.
    """
    if w <= 0:
        raise ValueError("w must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    gamma = 1.0 / (w * (game.operator_norm + 1.0))
    step = x - gamma * w * game.pseudo_gradient(x)
    return StationarityCertificate(
        x=x, residual=float(np.linalg.norm(x - geom.project(step))), w=w)


@dataclass(frozen=True)
class DescentReport:
    """Per-round slack of the descent inequalities along a trace.

    slack_exact is theta(x*_t) - theta(x*_{t-1}) + beta_t ||Delta_t||^2; it is
    nonpositive (up to solver tolerance) under perfect reconstruction.
    slack_inexact relaxes it with the measured reconstruction error e of the
    estimate used in round t:
    theta drop + beta_t (||Delta_t|| - (kappa_t/beta_t) e)^2 - (kappa_t^2/beta_t) e^2.
    """

    slack_exact: np.ndarray
    slack_inexact: np.ndarray

    @property
    def max_exact(self) -> float:
        return float(np.max(self.slack_exact)) if self.slack_exact.size else 0.0

    @property
    def max_inexact(self) -> float:
        return float(np.max(self.slack_inexact)) if self.slack_inexact.size else 0.0


def descent_check(trace: RunTrace) -> DescentReport:
    """Evaluate the exact and error-relaxed descent inequalities per round.

    The per-round coefficients alpha/kappa/beta and the measured errors ride
    along in the trace, so no schedule argument is needed.
    """
    drop = trace.theta[1:] - trace.theta[:-1]
    beta = trace.beta
    kappa = trace.kappa
    e = trace.eps_measured
    slack_exact = drop + beta * trace.residuals ** 2
    safe_beta = np.where(beta > 0, beta, 1.0)
    centered = trace.residuals - kappa * e / safe_beta
    relaxed = np.where(beta > 0, beta * centered ** 2 - kappa ** 2 * e ** 2 / safe_beta, 0.0)
    return DescentReport(slack_exact=slack_exact, slack_inexact=drop + relaxed)


def select_tbar(envelope, rel_change: float = 0.05, span: int = 10) -> int:
    """First round after which the error envelope has settled.

    Returns the smallest 1-based round t such that the envelope changes by
    less than rel_change (relatively) between t and t+span; falls back to the
    final round minus span when it never settles.
    """
    env = np.asarray(envelope, dtype=float)
    T = env.size
    if T == 0:
        return 1
    for t in range(T - span):
        ref = max(abs(env[t]), 1e-12)
        if abs(env[t + span] - env[t]) < rel_change * ref:
            return t + 1
    return max(1, T - span)


def theorem_bound(trace: RunTrace, theta_star: float, tbar: int | None = None,
                  errors=None) -> float:
    """Certified upper bound on the windowed average fixed-point residual.

    Over the window of rounds t in {tbar+1, ..., T}, with Delta = theta at
    round tbar minus theta_star, beta_bar the window sum of beta_t and
    beta_min its minimum, the average residual is bounded by

        (1/(W beta_min)) * sqrt(sum_t (beta_t Delta + beta_bar kappa_t^2 e_t^2 / beta_t))
      + (1/(W beta_min)) * sum_t kappa_t e_t

    where W is the window length and e_t the reconstruction error of the
    estimate used in round t (the trace's measured series by default).  The
    bound is valid whenever theta_star is at most the smallest potential the
    run can reach; pass min(oracle value, trace minimum) to stay sound when
    the multistart oracle is itself only an upper bound.
    """
    T = trace.rounds
    if T == 0:
        raise ValueError("empty trace")
    if tbar is None:
        tbar = select_tbar(trace.envelope)
    if not 0 <= tbar < T:
        raise ValueError(f"tbar={tbar} outside 0..{T - 1}")
    theta_tbar = float(trace.theta[tbar])
    if theta_star > theta_tbar + 1e-12:
        raise ValueError(
            f"theta_star={theta_star:g} exceeds theta at round tbar ({theta_tbar:g}); "
            "the initial gap must be nonnegative")
    delta = theta_tbar - theta_star
    sl = slice(tbar, T)  # rounds tbar+1 .. T (0-based arrays)
    beta = trace.beta[sl]
    kappa = trace.kappa[sl]
    e = np.asarray(errors, dtype=float)[sl] if errors is not None else trace.eps_measured[sl]
    W = beta.size
    beta_min = float(np.min(beta))
    if beta_min <= 0:
        raise ValueError("bound requires beta_t > 0 on the window (ell > 0 and xi admissible)")
    beta_bar = float(np.sum(beta))
    inside = np.sum(beta * delta + beta_bar * (kappa ** 2) * (e ** 2) / beta)
    return float((np.sqrt(inside) + np.sum(kappa * e)) / (W * beta_min))


@dataclass(frozen=True)
class OracleResult:
    """Best stationary point found by multistart; an upper bound on the
    true constrained minimum, not a global-optimality certificate."""

    x_best: np.ndarray
    theta_best: float
    starts: int


def _projected_gradient_descent(game, geom, x0, tol=1e-9, max_iters=20_000):
    x = geom.project(np.asarray(x0, dtype=float))
    s0 = 1.0 / (game.operator_norm + 1.0)  # also the stationarity probe step
    lam = None
    for _ in range(max_iters):
        g = game.pseudo_gradient(x)
        probe, lam = geom.project_with_dual(x - s0 * g, lam0=lam)
        if np.linalg.norm(x - probe) <= tol:
            return x
        fx = game.potential(x)
        # the base step satisfies Armijo exactly (s0 ||Q|| < 1); the absolute
        # slack absorbs projection tolerance noise near stationary points
        ftol = 1e-9 * (1.0 + abs(fx))
        s, xn = s0, probe
        while game.potential(xn) > fx + 1e-4 * (g @ (xn - x)) + ftol and s > 1e-14:
            s *= 0.5
            xn, lam = geom.project_with_dual(x - s * g, lam0=lam)
        if np.linalg.norm(xn - x) <= 1e-15:
            return x
        x = xn
    return x


def global_minimizer_oracle(game: QuadraticGame, geom: FeasibleGeometry,
                            budget: int = 50,
                            rng: np.random.Generator | None = None) -> OracleResult:
    """Multistart projected gradient search for the potential's minimum.

    Runs Armijo-backtracked projected gradient descent from `budget` random
    feasible starts (plus the projected origin) to stationarity residual
    <= 1e-9 and keeps the best value.  More starts can only improve the
    result.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    ok, witness = geom.check_nonempty()
    if not ok:
        raise ValueError("feasible set is empty")
    starts = [geom.project(np.zeros(geom.n))]
    for _ in range(max(0, budget - 1)):
        starts.append(geom.sample_feasible(rng, witness=witness))
    best_x, best_theta = None, np.inf
    for x0 in starts:
        x = _projected_gradient_descent(game, geom, x0)
        val = game.potential(x)
        if val < best_theta:
            best_x, best_theta = x, val
    return OracleResult(x_best=best_x, theta_best=float(best_theta), starts=len(starts))
