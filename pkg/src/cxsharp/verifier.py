"""Checking convex-order claims with stop-loss curves.

Two integrable laws are in convex order iff their means agree and one
stop-loss curve lies below the other everywhere. Analytic curves are checked
to rounding level; empirical curves carry standard errors, and a check on
them can come back ``INCONCLUSIVE`` but is never silently ``DOMINATED``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .comparison import DOMINANCE_TOL, comparator_stop_loss
from .envelope import TailEnvelope
from .extremal import ExtremalDistribution

ANALYTIC_MEAN_TOL = 1e-10
K_SIGMA = 4.0


class Source(str, enum.Enum):
    ANALYTIC = "analytic"
    EMPIRICAL = "empirical"


class Verdict(str, enum.Enum):
    DOMINATED = "dominated"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive"


def _as_samples(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("need at least one sample")
    return arr


def hinge_mean(samples, u: float) -> tuple[float, float]:
    """Sample mean of (x - u)+ and its standard error."""
    x = _as_samples(samples)
    h = np.maximum(x - u, 0.0)
    se = float(np.std(h, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(np.mean(h)), se


def empirical_stop_loss(samples, u: float) -> float:
    """(1/n) sum max(x_i - u, 0)."""
    return hinge_mean(samples, u)[0]


@dataclass(frozen=True)
class StopLossCurve:
    source: Source
    evaluate: Callable
    mean: float
    n_samples: Optional[int] = None
    stderr: Optional[Callable] = None
    mean_stderr: float = 0.0

    def __call__(self, u):
        return self.evaluate(u)

    def errors(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.stderr is None:
            return np.zeros_like(u)
        return np.asarray(self.stderr(u))


def extremal_curve(dist: ExtremalDistribution) -> StopLossCurve:
    return StopLossCurve(Source.ANALYTIC, dist.stop_loss_full, dist.mean())


def comparator_curve(kind, c: float) -> StopLossCurve:
    return StopLossCurve(Source.ANALYTIC, lambda u: comparator_stop_loss(kind, c, u), 0.0)


def empirical_curve(samples) -> StopLossCurve:
    """Stop-loss curve of the empirical law, evaluated through sorted suffix sums."""
    x = np.sort(_as_samples(samples))
    n = x.size
    s1 = np.concatenate([np.cumsum(x[::-1])[::-1], [0.0]])
    s2 = np.concatenate([np.cumsum((x * x)[::-1])[::-1], [0.0]])

    def moments(u):
        u = np.asarray(u, dtype=float)
        k = np.searchsorted(x, u, side="right")
        cnt = n - k
        m1 = (s1[k] - u * cnt) / n
        m2 = (s2[k] - 2.0 * u * s1[k] + u * u * cnt) / n
        return m1, m2

    def evaluate(u):
        return moments(u)[0]

    def stderr(u):
        m1, m2 = moments(u)
        var = np.maximum(m2 - m1 * m1, 0.0) * n / max(n - 1, 1)
        return np.sqrt(var / n)

    mean_se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return StopLossCurve(Source.EMPIRICAL, evaluate, float(np.mean(x)), n, stderr, mean_se)


@dataclass(frozen=True)
class OrderCheckResult:
    mean_gap: float
    worst_u: Optional[float]
    worst_violation: float
    verdict: Verdict
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "mean_gap": self.mean_gap,
            "worst_u": self.worst_u,
            "worst_violation": self.worst_violation,
            "verdict": self.verdict.value,
            "tolerance": self.tolerance,
        }


def convex_order_check(
    curve_x: StopLossCurve,
    curve_y: StopLossCurve,
    grid,
    tolerance: float = DOMINANCE_TOL,
    k_sigma: float = K_SIGMA,
) -> OrderCheckResult:
    """Is X below Y in convex order, judged on ``grid``?

    Gaps are ``g_Y(u) - g_X(u)``. With standard errors ``se`` the verdict is
    VIOLATED when ``gap + k se < -tolerance`` somewhere, INCONCLUSIVE when
    only ``gap - k se`` crosses ``-tolerance``, DOMINATED otherwise.
    """
    grid = np.asarray(grid, dtype=float)
    mean_gap = curve_y.mean - curve_x.mean
    analytic = curve_x.source is Source.ANALYTIC and curve_y.source is Source.ANALYTIC
    if analytic:
        mean_tol = ANALYTIC_MEAN_TOL
    else:
        mean_tol = k_sigma * math.hypot(curve_x.mean_stderr, curve_y.mean_stderr)
    if abs(mean_gap) > mean_tol:
        return OrderCheckResult(mean_gap, None, -abs(mean_gap), Verdict.VIOLATED, tolerance)

    gaps = np.asarray(curve_y(grid)) - np.asarray(curve_x(grid))
    se = np.hypot(curve_x.errors(grid), curve_y.errors(grid))
    i = int(np.argmin(gaps))
    worst = min(0.0, float(gaps[i]))
    if np.any(gaps + k_sigma * se < -tolerance):
        verdict = Verdict.VIOLATED
    elif np.any(gaps - k_sigma * se < -tolerance):
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.DOMINATED
    return OrderCheckResult(mean_gap, float(grid[i]), worst, verdict, tolerance)


def dkw_epsilon(n: int, alpha: float) -> float:
    """Half-width of the DKW band holding with probability 1 - alpha."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def ks_distance(samples, cdf: Callable) -> float:
    """sup_x |F_n(x) - F(x)| for a continuous F."""
    x = np.sort(_as_samples(samples))
    n = x.size
    f = np.asarray(cdf(x))
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


@dataclass
class TailCheckReport:
    n: int
    confidence: float
    band: float
    grid: np.ndarray
    empirical: np.ndarray
    envelope: np.ndarray
    exceedances: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.exceedances

    @property
    def worst_t(self) -> Optional[float]:
        if not self.exceedances:
            return None
        return max(self.exceedances, key=lambda e: e[1])[0]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "confidence": self.confidence,
            "band": self.band,
            "exceedances": [{"t": t, "excess": e} for t, e in self.exceedances],
            "ok": self.ok,
        }


def check_tail_constraint(
    samples, env: TailEnvelope, confidence: float = 1.0 - 1e-6, grid=None
) -> TailCheckReport:
    """Compare empirical P(|X| > t) with s(t) plus the DKW half-width."""
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    x = np.sort(np.abs(_as_samples(samples)))
    n = x.size
    grid = np.linspace(0.0, 8.0, 801) if grid is None else np.asarray(grid, dtype=float)
    emp = (n - np.searchsorted(x, grid, side="right")) / n
    bound = np.asarray(env.s(grid))
    band = dkw_epsilon(n, 1.0 - confidence)
    excess = emp - bound - band
    hits = [(float(t), float(e)) for t, e in zip(grid, excess) if e > 0]
    return TailCheckReport(n, confidence, band, grid, emp, bound, hits)


def hinge_gap_estimate(samples, c: float, u: float, kind="gaussian") -> tuple[float, float]:
    """Estimate E[(X - u)+] - E[(cY - u)+] with the comparator term exact.

    The standard error covers the sample term only.
    """
    mean, se = hinge_mean(samples, u)
    return mean - float(comparator_stop_loss(kind, c, u)), se
