"""Precision sampling: exponential scalings and the argmax coordinate.

Dividing per-coordinate masses by independent Exp(1) draws and taking the
argmax samples coordinate j with probability mass_j / sum(mass) exactly.
Recovery of the winning coordinate from compressed sketches is reliable
when the winner dominates both the total scaled mass and the runner-up;
check_event_e evaluates those two conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import SeedCtx, exponential_vector


@dataclass(frozen=True)
class ExponentialScaling:
    """d positive Exp(1) draws; bit-identical on regeneration from the seed."""

    u: np.ndarray
    seed_ctx: SeedCtx

    def inverse_power(self, p: float) -> np.ndarray:
        """The per-coordinate multipliers u_j^{-1/p}."""
        return self.u ** (-1.0 / p)


@dataclass(frozen=True)
class EventEReport:
    w: np.ndarray
    j_star: int
    j_star2: int
    eta: float
    cond_mass: bool
    cond_gap: bool

    @property
    def holds(self) -> bool:
        return self.cond_mass and self.cond_gap


def draw_scaling(d: int, seed_ctx: SeedCtx) -> ExponentialScaling:
    if d < 1:
        raise ValueError("d must be at least 1")
    return ExponentialScaling(exponential_vector(seed_ctx, d), seed_ctx)


def argmax_scaled(masses, scaling: ExponentialScaling) -> int:
    """Argmax of masses_j / u_j; ties break to the smallest index."""
    m = np.asarray(masses, dtype=np.float64)
    if m.size != scaling.u.size:
        raise ValueError("masses and scaling dimension mismatch")
    if np.all(m <= 0.0):
        raise ValueError("at least one mass must be positive")
    return int(np.argmax(m / scaling.u))


def check_event_e(masses, scaling: ExponentialScaling, eps: float, delta: float,
                  p: float) -> EventEReport:
    """Evaluate the mass and gap conditions for the scaled argmax.

    eta = eps * delta * 2^{-p} / 1000. With d = 1 there is no runner-up;
    both conditions hold vacuously and j_star2 is -1.
    """
    m = np.asarray(masses, dtype=np.float64)
    w = m / scaling.u
    eta = eps * delta * 2.0 ** (-p) / 1000.0
    j_star = int(np.argmax(w))
    if w.size == 1:
        return EventEReport(w, j_star, -1, eta, True, True)
    rest = w.copy()
    rest[j_star] = -np.inf
    j_star2 = int(np.argmax(rest))
    cond_mass = bool(w[j_star] >= eta * np.sum(w))
    cond_gap = bool(w[j_star] >= (1.0 + eta) * w[j_star2])
    return EventEReport(w, j_star, j_star2, eta, cond_mass, cond_gap)
