"""Sharp comparison constants against scaled Gaussian and Laplace laws.

For each envelope the comparator's stop-loss must sit above the envelope
curve. The smallest admissible scale makes the comparator touch the
envelope's linear piece tangentially: its upper-tail quantile at level
``s(knee)`` fixes the touching point, and matching heights there fixes the
scale.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .envelope import EnvelopeSolution, Kind, envelope_J, make_envelope, solve_envelope
from .numerics import (
    DomainError,
    gaussian_pdf,
    gaussian_tail,
    inverse_gaussian_tail,
    log_gaussian_tail,
)

DOMINANCE_TOL = 1e-12


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def _check_scale(c):
    if not (math.isfinite(c) and c > 0):
        raise DomainError(f"scale must be finite and positive, got {c!r}")


def gaussian_stop_loss(c: float, u):
    """E[(cG - u)+] = c phi(u/c) - u P(G > u/c), any real u."""
    _check_scale(c)
    arr = np.asarray(u, dtype=float)
    x = arr / c
    return _out(c * np.asarray(gaussian_pdf(x)) - arr * np.asarray(gaussian_tail(x)))


def laplace_stop_loss(c: float, u):
    """E[(cL - u)+] = (c/2) exp(-u/c) for u >= 0, L standard Laplace."""
    _check_scale(c)
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"Laplace stop-loss formula needs u >= 0, got {u!r}")
    return _out(0.5 * c * np.exp(-arr / c))


def comparator_stop_loss(kind, c: float, u):
    """Stop-loss of the comparator on the whole line.

    Negative u uses g(-v) = g(v) + v, valid for laws symmetric about 0.
    """
    kind = Kind(kind)
    arr = np.asarray(u, dtype=float)
    if kind is Kind.SUB_GAUSSIAN:
        return gaussian_stop_loss(c, arr)
    v = np.abs(arr)
    return _out(np.asarray(laplace_stop_loss(c, v)) + np.maximum(-arr, 0.0))


def comparator_tail(kind, c: float, u):
    """P(cY > u); the stop-loss derivative is its negative."""
    kind = Kind(kind)
    _check_scale(c)
    arr = np.asarray(u, dtype=float)
    if kind is Kind.SUB_GAUSSIAN:
        return gaussian_tail(arr / c)
    half = 0.5 * np.exp(-np.abs(arr) / c)
    return _out(np.where(arr >= 0, half, 1.0 - half))


@dataclass(frozen=True)
class ComparisonConstants:
    """Sharp scale for one comparator family.

    ``quantile`` is the unit comparator's upper quantile at level
    ``sol.knee_tail`` (z for the Gaussian, w_E for the Laplace law).
    """

    kind: Kind
    sol: EnvelopeSolution
    quantile: float
    scale: float
    scale_squared: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "scale_squared", self.scale * self.scale)

    @property
    def tangency(self) -> float:
        return self.scale * self.quantile

    def as_dict(self) -> dict:
        if self.kind is Kind.SUB_GAUSSIAN:
            return {
                "a": self.sol.knee,
                "p0": self.sol.knee_tail,
                "z": self.quantile,
                "c0": self.scale,
                "c0_squared": self.scale_squared,
            }
        return {
            "a_E": self.sol.knee,
            "p_E": self.sol.knee_tail,
            "w_E": self.quantile,
            "cE": self.scale,
        }


@functools.lru_cache(maxsize=None)
def compute_gaussian_comparison() -> ComparisonConstants:
    sol = solve_envelope(make_envelope(Kind.SUB_GAUSSIAN))
    z = inverse_gaussian_tail(sol.knee_tail)
    return ComparisonConstants(Kind.SUB_GAUSSIAN, sol, z, sol.half_mass / gaussian_pdf(z))


@functools.lru_cache(maxsize=None)
def compute_exponential_comparison() -> ComparisonConstants:
    sol = solve_envelope(make_envelope(Kind.SUB_EXPONENTIAL))
    w = math.log(1.0 / (2.0 * sol.knee_tail))
    return ComparisonConstants(
        Kind.SUB_EXPONENTIAL, sol, w, sol.half_mass / (sol.knee_tail * (1.0 + w))
    )


def sharp_constants(kind) -> ComparisonConstants:
    if Kind(kind) is Kind.SUB_GAUSSIAN:
        return compute_gaussian_comparison()
    return compute_exponential_comparison()


@dataclass(frozen=True)
class GridSpec:
    """Uniform points on [0, split] followed by log-spaced points on (split, u_max]."""

    u_max: float = 40.0
    split: float = 10.0
    n_uniform: int = 99_501
    n_log: int = 500

    def build(self) -> np.ndarray:
        if not (0 < self.split < self.u_max) or self.n_uniform < 2 or self.n_log < 1:
            raise ValueError(f"invalid grid {self!r}")
        uniform = np.linspace(0.0, self.split, self.n_uniform)
        tail = np.geomspace(self.split, self.u_max, self.n_log + 1)[1:]
        return np.concatenate([uniform, tail])


@dataclass(frozen=True)
class DominanceReport:
    kind: Kind
    scale: float
    grid: np.ndarray
    gaps: np.ndarray
    min_gap: float
    argmin_u: float
    tangency_u: float
    tangency_gap: float

    @property
    def dominated(self) -> bool:
        return self.min_gap >= -DOMINANCE_TOL

    def rows(self):
        return zip(self.grid.tolist(), self.gaps.tolist())

    def summary(self) -> dict:
        return {
            "kind": self.kind.value,
            "scale": self.scale,
            "points": int(self.grid.size),
            "min_gap": self.min_gap,
            "argmin_u": self.argmin_u,
            "tangency_u": self.tangency_u,
            "tangency_gap": self.tangency_gap,
            "dominated": self.dominated,
        }


def dominance_report(kind, c: float, grid_spec: GridSpec | None = None) -> DominanceReport:
    """Comparator stop-loss minus the stop-loss envelope along a grid on [0, u_max]."""
    kind = Kind(kind)
    _check_scale(c)
    grid_spec = grid_spec or GridSpec()
    if grid_spec.u_max < 40.0:
        raise ValueError("dominance grid must reach u_max >= 40")
    sharp = sharp_constants(kind)
    tangency = c * sharp.quantile
    grid = np.union1d(grid_spec.build(), [tangency])
    gaps = np.asarray(comparator_stop_loss(kind, c, grid)) - np.asarray(envelope_J(sharp.sol, grid))
    i = int(np.argmin(gaps))
    tangency_gap = float(comparator_stop_loss(kind, c, tangency) - envelope_J(sharp.sol, tangency))
    return DominanceReport(kind, c, grid, gaps, float(gaps[i]), float(grid[i]), tangency, tangency_gap)


def monotone_ratio(kind, c: float, u):
    """Ratio R with D'(u) = w(u) (1 - R(u)) for D = comparator stop-loss minus envelope tail.

    Gaussian: P(G > u/c) / (2 exp(-u^2/2)) on u >= knee (computed in log space).
    Laplace: exp(u (1 - 1/c)) / 4 on u >= 0.
    """
    kind = Kind(kind)
    _check_scale(c)
    arr = np.asarray(u, dtype=float)
    if kind is Kind.SUB_GAUSSIAN:
        knee = compute_gaussian_comparison().sol.knee
        if not np.all(np.isfinite(arr)) or np.any(arr < knee):
            raise DomainError(f"Gaussian ratio is only monotone-certified on u >= {knee}")
        log_r = np.asarray(log_gaussian_tail(arr / c)) + 0.5 * arr * arr - math.log(2.0)
        with np.errstate(over="ignore"):
            return _out(np.exp(log_r))
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"Laplace ratio needs u >= 0, got {u!r}")
    return _out(0.25 * np.exp(arr * (1.0 - 1.0 / c)))


def tail_difference(kind, c: float, u):
    """D(u) = comparator stop-loss minus the envelope's tail integral."""
    sharp = sharp_constants(kind)
    return _out(np.asarray(comparator_stop_loss(kind, c, u)) - np.asarray(sharp.sol.env.tail_integral(u)))


# the Laplace stop-loss decays like exp(-u/c), so D only drops below 1e-12 near u = 52
LIMIT_HORIZON = {Kind.SUB_GAUSSIAN: 40.0, Kind.SUB_EXPONENTIAL: 80.0}


def monotone_ratio_preconditions(kind, c: float, u_max: float | None = None, points: int = 10_000) -> dict:
    """Grid evidence for the monotone-ratio argument on [knee, u_max]."""
    kind = Kind(kind)
    sharp = sharp_constants(kind)
    u_max = LIMIT_HORIZON[kind] if u_max is None else u_max
    grid = np.linspace(sharp.sol.knee, u_max, points)
    ratio = np.asarray(monotone_ratio(kind, c, grid))
    d_start = float(tail_difference(kind, c, sharp.sol.knee))
    d_end = float(tail_difference(kind, c, u_max))
    return {
        "u_max": u_max,
        "D_at_knee": d_start,
        "D_at_umax": d_end,
        "ratio_nondecreasing": bool(np.all(np.diff(ratio) >= 0)),
        "holds": d_start >= -DOMINANCE_TOL and abs(d_end) < DOMINANCE_TOL and bool(np.all(np.diff(ratio) >= 0)),
    }


def sharpness_witness(kind, c: float) -> float:
    """Analytic lower bound on E[(X* - u_c)+] - E[(cY - u_c)+] at u_c = c * quantile.

    Positive exactly when c is below the sharp scale, and affine in c.
    """
    kind = Kind(kind)
    _check_scale(c)
    sharp = sharp_constants(kind)
    half, p = sharp.sol.half_mass, sharp.sol.knee_tail
    if kind is Kind.SUB_GAUSSIAN:
        return half - c * float(gaussian_pdf(sharp.quantile))
    return half - c * p * (1.0 + sharp.quantile)
