"""The tail-saturating extremal law.

Mass sits on [-knee, -t0] and [knee, inf) with the CDF flat in between, so
that P(|X| > t) = s(t) for every t while E[(X - u)+] meets the stop-loss
envelope with equality for every u >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import streams
from .envelope import EnvelopeSolution, TailEnvelope, envelope_J, solve_envelope, make_envelope
from .numerics import DomainError


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


@dataclass(frozen=True)
class ExtremalDistribution:
    sol: EnvelopeSolution

    @classmethod
    def for_kind(cls, kind) -> "ExtremalDistribution":
        return cls(solve_envelope(make_envelope(kind)))

    @property
    def env(self) -> TailEnvelope:
        return self.sol.env

    @property
    def knee(self) -> float:
        return self.sol.knee

    @property
    def plateau_edge(self) -> float:
        return self.sol.env.plateau_edge

    @property
    def plateau_level(self) -> float:
        """The value 1 - s(knee) the CDF holds on (-t0, knee)."""
        return 1.0 - self.sol.knee_tail

    def cdf(self, x):
        arr = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"x must be finite, got {x!r}")
        a, t0, p0 = self.knee, self.plateau_edge, self.sol.knee_tail
        s_abs = np.asarray(self.env.s(np.abs(arr)))
        out = np.select(
            [arr <= -a, arr <= -t0, arr < a],
            [0.0, s_abs - p0, 1.0 - p0],
            default=1.0 - s_abs,
        )
        return _out(out)

    def two_sided_tail(self, t):
        """P(|X| > t) from the branch formulas; F is continuous so P(X < -t) = F(-t)."""
        arr = np.asarray(t, dtype=float)
        return _out(1.0 - np.asarray(self.cdf(arr)) + np.asarray(self.cdf(-arr)))

    def quantile(self, p):
        """Left-continuous inverse inf{x : F(x) >= p}; the plateau probability maps to -t0."""
        arr = np.asarray(p, dtype=float)
        if not np.all((arr > 0) & (arr < 1)):
            raise DomainError(f"p must lie in (0, 1), got {p!r}")
        p0 = self.sol.knee_tail
        left = arr <= 1.0 - p0
        neg = -np.asarray(self.env.s_inverse(np.where(left, np.minimum(arr + p0, 1.0), 1.0)))
        pos = np.asarray(self.env.s_inverse(np.where(left, 1.0, 1.0 - arr)))
        return _out(np.where(left, neg, pos))

    def sample(self, n: int, seed: int, start: int = 0) -> np.ndarray:
        if n <= 0:
            return np.empty(0)
        return self.quantile(streams.uniforms(n, seed, streams.EXTREMAL, start))

    def lower_stop_loss(self, v):
        """E[(-X - v)+] for v >= 0."""
        arr = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DomainError(f"v must be finite and >= 0, got {v!r}")
        a, p0 = self.knee, self.sol.knee_tail
        w = np.minimum(arr, a)
        val = np.asarray(self.env.tail_integral(w)) - self.env.tail_integral(a) - p0 * (a - w)
        return _out(np.maximum(val, 0.0))

    def stop_loss(self, u):
        """E[(X - u)+] for u >= 0; equals the stop-loss envelope."""
        return envelope_J(self.sol, u)

    def stop_loss_full(self, u):
        """E[(X - u)+] on the whole line; negative u through (x+v)+ = (-x-v)+ + x + v."""
        arr = np.asarray(u, dtype=float)
        pos = np.asarray(envelope_J(self.sol, np.maximum(arr, 0.0)))
        neg = np.asarray(self.lower_stop_loss(np.maximum(-arr, 0.0))) - np.minimum(arr, 0.0)
        return _out(np.where(arr >= 0, pos, neg))

    def positive_part_mean(self) -> float:
        return self.knee * self.sol.knee_tail + float(self.env.tail_integral(self.knee))

    def negative_part_mean(self) -> float:
        return float(self.lower_stop_loss(0.0))

    def mean(self) -> float:
        return self.positive_part_mean() - self.negative_part_mean()

    def second_moment(self) -> float:
        return self.env.second_moment()

    def variance(self) -> float:
        return self.second_moment() - self.mean() ** 2


def extremal_cdf(d: ExtremalDistribution, x):
    return d.cdf(x)


def extremal_quantile(d: ExtremalDistribution, p):
    return d.quantile(p)


def extremal_sample(d: ExtremalDistribution, n: int, seed: int) -> np.ndarray:
    return d.sample(n, seed)


def extremal_stop_loss(d: ExtremalDistribution, u):
    return d.stop_loss(u)
