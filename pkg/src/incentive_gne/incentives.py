"""Personalized incentive construction and the gain/step schedule.

The coordinator augments each agent's cost with a quadratic anchoring term
(c_t/2)||x_i - x_plus_i||^2 whose center takes a positive-sign gradient step
from the previous round's equilibrium:

    x_plus_t = x*_{t-1} + xi_t * Ghat_{t-1}(x*_{t-1}).

Adding the incentives shifts the stacked gradient map by c_t (x - x_plus_t),
so the regularized round map is (Q + c_t I) x + q - c_t x_plus_t.  With
c_t >= 2*ell the shifted map is ell-strongly monotone, which is what makes the
inner equilibrium unique and computable by projection-type iterations.

Derived per-round quantities used throughout the descent accounting:

    alpha_t = 1 - c_t xi_t      (in (0, 1] by the schedule gate)
    kappa_t = (1 - alpha_t) / (2 alpha_t)
    beta_t  = ell (2 - alpha_t) / (2 alpha_t)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .game import QuadraticGame
from .inner_solver import AffineMap

C_FLOOR = 1e-6  # gain floor when ell = 0, keeps the round map strictly monotone


class ScheduleError(ValueError):
    """Gain/step values violate the admissibility gates."""


@dataclass(frozen=True)
class IncentiveSchedule:
    """Per-round gain c_t and step xi_t with their derived quantities.

    c_of_t and xi_of_t map a round index t >= 1 to the round's values; the
    admissibility gates (c_t >= 2*ell, 0 <= xi_t < 1/c_t) are checked at every
    evaluation so time-varying schedules cannot silently go inadmissible.
    """

    ell: float
    c_of_t: Callable[[int], float]
    xi_of_t: Callable[[int], float]

    def gain(self, t: int) -> float:
        c = float(self.c_of_t(t))
        if c < 2.0 * self.ell or c <= 0.0:
            raise ScheduleError(f"round {t}: gain c={c:g} below the 2*ell={2 * self.ell:g} gate")
        return c

    def step(self, t: int) -> float:
        c = self.gain(t)
        xi = float(self.xi_of_t(t))
        if not 0.0 <= xi < 1.0 / c:
            raise ScheduleError(f"round {t}: step xi={xi:g} outside [0, 1/c={1.0 / c:g})")
        return xi

    def alpha(self, t: int) -> float:
        return 1.0 - self.gain(t) * self.step(t)

    def kappa(self, t: int) -> float:
        a = self.alpha(t)
        return (1.0 - a) / (2.0 * a)

    def beta(self, t: int) -> float:
        a = self.alpha(t)
        return self.ell * (2.0 - a) / (2.0 * a)


def make_schedule(ell: float, c_factor: float = 2.0, cxi_product: float = 0.0) -> IncentiveSchedule:
    """Constant schedule c_t = c_factor * ell, xi_t = cxi_product / c_t.

    c_factor >= 2 keeps the round map strongly monotone; cxi_product in
    [0, 1) keeps alpha_t positive.  When ell = 0 the gain falls back to a
    small floor so the inner equilibrium stays unique.
    """
    if ell < 0.0:
        raise ScheduleError(f"ell must be nonnegative, got {ell:g}")
    if c_factor < 2.0:
        raise ScheduleError(f"c_factor must be >= 2, got {c_factor:g}")
    if not 0.0 <= cxi_product < 1.0:
        raise ScheduleError(f"cxi_product must lie in [0, 1), got {cxi_product:g}")
    c = c_factor * ell if ell > 0.0 else C_FLOOR
    xi = cxi_product / c
    return IncentiveSchedule(ell=ell, c_of_t=lambda t: c, xi_of_t=lambda t: xi)


def schedule_from_gain_and_step(ell: float, c: float, xi: float) -> IncentiveSchedule:
    """Constant schedule from explicit (c, xi); clamps xi into [0, 0.999/c].

    Published parameter tables sometimes round xi so that c * xi lands at or
    above 1; the clamp treats such values as rounded and pulls them back
    inside the admissible range.
    """
    if c < 2.0 * ell or c <= 0.0:
        raise ScheduleError(f"gain c={c:g} below the 2*ell={2 * ell:g} gate")
    xi = min(max(float(xi), 0.0), 0.999 / c)
    return IncentiveSchedule(ell=ell, c_of_t=lambda t: c, xi_of_t=lambda t: xi)


@dataclass
class IncentiveState:
    """Coordinator inputs for round t: previous equilibrium and its estimate."""

    x_prev: np.ndarray
    ghat_prev: np.ndarray
    t: int

    def __post_init__(self):
        self.x_prev = np.asarray(self.x_prev, dtype=float).reshape(-1)
        self.ghat_prev = np.asarray(self.ghat_prev, dtype=float).reshape(-1)
        if self.x_prev.shape != self.ghat_prev.shape:
            raise ValueError("x_prev and ghat_prev have mismatched dimensions")
        if self.t < 1:
            raise ValueError(f"round index must be >= 1, got {self.t}")


def incentive_target(state: IncentiveState, schedule: IncentiveSchedule) -> np.ndarray:
    """Anchor point x_plus_t = x*_{t-1} + xi_t * Ghat_{t-1}(x*_{t-1}).

    Note the positive sign on the gradient step: the anchor deliberately sits
    uphill of the previous equilibrium.
    """
    return state.x_prev + schedule.step(state.t) * state.ghat_prev


def extended_mapping(game: QuadraticGame, state: IncentiveState,
                     schedule: IncentiveSchedule) -> AffineMap:
    """Round map of the incentive-extended game: (Q + c_t I) x + q - c_t x_plus."""
    c = schedule.gain(state.t)
    x_plus = incentive_target(state, schedule)
    M = game.Q + c * np.eye(game.n)
    r = game.q_full - c * x_plus
    return AffineMap(M=M, r=r)
