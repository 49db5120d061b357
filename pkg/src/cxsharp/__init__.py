"""Sharp convex-order comparison of tail-constrained laws with Gaussian and Laplace scales."""

from .comparison import (
    ComparisonConstants,
    compute_exponential_comparison,
    compute_gaussian_comparison,
    dominance_report,
    sharp_constants,
    sharpness_witness,
)
from .envelope import Kind, TailEnvelope, make_envelope, solve_envelope
from .extremal import ExtremalDistribution

__all__ = [
    "ComparisonConstants",
    "ExtremalDistribution",
    "Kind",
    "TailEnvelope",
    "compute_exponential_comparison",
    "compute_gaussian_comparison",
    "dominance_report",
    "make_envelope",
    "sharp_constants",
    "sharpness_witness",
    "solve_envelope",
]
