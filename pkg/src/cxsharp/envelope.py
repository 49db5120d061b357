"""Two-sided tail envelopes and their sharp stop-loss envelope.

An envelope ``s`` bounds P(|X| > t). Among mean-zero laws obeying it, the
largest possible stop-loss E[(X - u)+] at u >= 0 is a two-piece curve: a
straight line of slope ``-s(knee)`` up to the knee, then the tail integral
of ``s``. The knee solves ``x s(x) + int_x^inf s = (int_0^inf s) / 2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numerics import (
    SQRT2PI,
    BracketedRoot,
    DomainError,
    gaussian_tail,
    solve_decreasing_level,
)

LN2 = math.log(2.0)
KNEE_BRACKET_OFFSET = 1e-9
KNEE_BRACKET_HI = 50.0


class Kind(str, enum.Enum):
    SUB_GAUSSIAN = "gaussian"
    SUB_EXPONENTIAL = "exponential"


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def _nonneg(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be finite and >= 0, got {x!r}")
    return arr


@dataclass(frozen=True)
class TailEnvelope:
    """s(t) = min(1, 2 exp(-t^2/2)) or min(1, 2 exp(-t)), t >= 0."""

    kind: Kind

    @property
    def plateau_edge(self) -> float:
        """Last point where s equals 1."""
        if self.kind is Kind.SUB_GAUSSIAN:
            return math.sqrt(2.0 * LN2)
        return LN2

    def s(self, t):
        arr = _nonneg(t, "t")
        if self.kind is Kind.SUB_GAUSSIAN:
            val = 2.0 * np.exp(-0.5 * arr * arr)
        else:
            val = 2.0 * np.exp(-arr)
        return _out(np.minimum(1.0, val))

    def s_inverse(self, y):
        """Smallest t with s(t) = y, for y in (0, 1]."""
        arr = np.asarray(y, dtype=float)
        if not np.all((arr > 0) & (arr <= 1)):
            raise DomainError(f"y must lie in (0, 1], got {y!r}")
        if self.kind is Kind.SUB_GAUSSIAN:
            return _out(np.sqrt(2.0 * np.log(2.0 / arr)))
        return _out(np.log(2.0 / arr))

    def tail_integral(self, x):
        """Closed form of the integral of s over [x, inf), x >= 0."""
        arr = _nonneg(x)
        t0 = self.plateau_edge
        if self.kind is Kind.SUB_GAUSSIAN:
            beyond = 2.0 * SQRT2PI * np.asarray(gaussian_tail(np.maximum(arr, t0)))
        else:
            beyond = 2.0 * np.exp(-np.maximum(arr, t0))
        return _out(np.where(arr < t0, t0 - arr, 0.0) + beyond)

    def second_moment(self) -> float:
        """Integral of 2 t s(t) over [0, inf): E[X^2] of any law saturating s."""
        t0 = self.plateau_edge
        if self.kind is Kind.SUB_GAUSSIAN:
            # 4 t exp(-t^2/2) integrates to 4 exp(-t0^2/2) = 2
            return t0 * t0 + 2.0
        return t0 * t0 + 2.0 * (t0 + 1.0)


def make_envelope(kind) -> TailEnvelope:
    return TailEnvelope(Kind(kind))


def mass_constants(env: TailEnvelope) -> tuple[float, float]:
    """Total envelope mass and its half."""
    total = float(env.tail_integral(0.0))
    return total, total / 2.0


def knee_function(env: TailEnvelope, x):
    """x s(x) + tail_integral(x), defined for x at or beyond the plateau edge."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < env.plateau_edge):
        raise DomainError(f"knee function needs x >= {env.plateau_edge}, got {x!r}")
    return _out(arr * np.asarray(env.s(arr)) + np.asarray(env.tail_integral(arr)))


@dataclass(frozen=True)
class EnvelopeSolution:
    env: TailEnvelope
    total_mass: float
    half_mass: float
    knee: float
    knee_tail: float  # s(knee)


def solve_envelope(env: TailEnvelope) -> EnvelopeSolution:
    total, half = mass_constants(env)
    bracket = BracketedRoot(env.plateau_edge + KNEE_BRACKET_OFFSET, KNEE_BRACKET_HI)
    knee = solve_decreasing_level(lambda x: knee_function(env, x), half, bracket)
    return EnvelopeSolution(env, total, half, knee, float(env.s(knee)))


def envelope_J(sol: EnvelopeSolution, u):
    """Sharp upper bound on E[(X - u)+], u >= 0, over mean-zero laws under ``sol.env``.

    Beyond the knee the tail integral is evaluated directly, not as
    ``half_mass`` minus accumulated mass, to avoid cancellation.
    """
    arr = _nonneg(u, "u")
    line = sol.half_mass - sol.knee_tail * arr
    tail = np.asarray(sol.env.tail_integral(np.maximum(arr, sol.knee)))
    return _out(np.where(arr <= sol.knee, line, tail))
