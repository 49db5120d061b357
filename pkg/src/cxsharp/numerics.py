"""Gaussian special functions and a bracketed monotone root solver.

Everything downstream (envelopes, comparators, the extremal law) is built on
these few primitives, so they accept scalars or numpy arrays alike and raise
:class:`DomainError` instead of returning NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize, special

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
INV_SQRT2PI = 1.0 / SQRT2PI

ROOT_TOL = 1e-13
ROOT_MAX_ITER = 200


class DomainError(ValueError):
    """Argument outside the domain on which a quantity is defined."""


class BracketError(ValueError):
    """The search bracket does not straddle the requested level."""


class ConvergenceError(RuntimeError):
    """Root finding exhausted its iteration budget."""


def _finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return arr


def _out(arr):
    return float(arr) if arr.ndim == 0 else arr


def gaussian_pdf(x):
    """Standard normal density (2*pi)^(-1/2) exp(-x^2/2)."""
    arr = _finite(x)
    return _out(INV_SQRT2PI * np.exp(-0.5 * arr * arr))


def gaussian_tail(x):
    """Upper tail P(G > x) of a standard normal.

    For x > 0 the scaled complementary error function is used so that the
    result keeps full relative precision deep into the tail.
    """
    arr = _finite(x)
    pos = arr > 0
    xp = np.where(pos, arr, 0.0) / SQRT2
    xn = np.where(pos, 0.0, arr) / SQRT2
    upper = 0.5 * special.erfcx(xp) * np.exp(-xp * xp)
    lower = 0.5 * special.erfc(xn)
    return _out(np.where(pos, upper, lower))


def log_gaussian_tail(x):
    """log P(G > x), finite for every finite x."""
    arr = _finite(x)
    return _out(special.log_ndtr(-arr))


def inverse_gaussian_tail(p):
    """Return x with P(G > x) = p, for 0 < p < 1.

    Starts from ``-ndtri(p)`` and applies Newton steps on the tail itself,
    which brings the residual |tail(x) - p| down to rounding level.
    """
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError(f"p must lie in (0, 1), got {p!r}")
    x = -special.ndtri(arr)
    for _ in range(3):
        dens = INV_SQRT2PI * np.exp(-0.5 * x * x)
        x = x + (np.asarray(gaussian_tail(x)) - arr) / dens
    return _out(x)


def gaussian_upper_integral(x):
    """Integral of exp(-t^2/2) over [x, inf), i.e. sqrt(2*pi) * P(G > x)."""
    arr = _finite(x)
    return _out(SQRT2PI * np.asarray(gaussian_tail(arr)))


def mills_ratio(x):
    """phi(x) / P(G > x), evaluated without underflow."""
    arr = _finite(x)
    return _out(np.exp(-0.5 * arr * arr - math.log(SQRT2PI) - special.log_ndtr(-arr)))


@dataclass(frozen=True)
class BracketedRoot:
    lo: float
    hi: float
    tol: float = ROOT_TOL
    max_iter: int = ROOT_MAX_ITER

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise BracketError(f"need finite lo < hi, got [{self.lo}, {self.hi}]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")


def solve_decreasing_level(
    f: Callable[[float], float], level: float, bracket: BracketedRoot
) -> float:
    """Solve f(x) = level for f nonincreasing on the bracket.

    Brent's method (bisection safeguarded by secant / inverse quadratic
    steps) with an absolute argument tolerance of ``bracket.tol``.
    """
    flo = f(bracket.lo) - level
    fhi = f(bracket.hi) - level
    if flo < 0 or fhi > 0:
        raise BracketError(
            f"level {level!r} not straddled: f(lo)-level={flo!r}, f(hi)-level={fhi!r}"
        )
    if flo == 0:
        return float(bracket.lo)
    if fhi == 0:
        return float(bracket.hi)
    root, info = optimize.brentq(
        lambda x: f(x) - level,
        bracket.lo,
        bracket.hi,
        xtol=bracket.tol,
        maxiter=bracket.max_iter,
        full_output=True,
        disp=False,
    )
    if not info.converged:
        raise ConvergenceError(
            f"no convergence after {info.iterations} iterations ({info.flag})"
        )
    return float(root)
