"""Counter-based random streams.

Draw ``i`` of stream ``(seed, stream)`` depends only on ``(seed, stream, i)``,
never on how the draws were chunked, so sampling can be split across index
ranges without changing a single bit of output.
"""

from __future__ import annotations

import numpy as np
from scipy import special

_MASK64 = (1 << 64) - 1
_CHUNK = 1 << 20

# stream ids used across the package, kept apart so draws never collide
EXTREMAL = 0
GAUSSIAN = 1
LAPLACE = 2
TREES = 3
COMPARATOR_MC = 4


def _bitgen(seed: int, stream: int, start: int) -> np.random.Philox:
    bg = np.random.Philox(key=[int(seed) & _MASK64, int(stream) & _MASK64])
    if start >= 4:
        bg.advance(start // 4)
    return bg


def uniforms(n: int, seed: int, stream: int = 0, start: int = 0) -> np.ndarray:
    """Uniforms on the open interval (0, 1) for indices [start, start + n)."""
    if n < 0 or start < 0:
        raise ValueError("n and start must be nonnegative")
    out = np.empty(n, dtype=float)
    bg = _bitgen(seed, stream, start)
    skip = start % 4
    if skip:
        bg.random_raw(skip)
    for lo in range(0, n, _CHUNK):
        hi = min(n, lo + _CHUNK)
        raw = bg.random_raw(hi - lo)
        # top 53 bits, shifted half a step off zero
        out[lo:hi] = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53
    return out


def normal(n: int, seed: int, scale: float = 1.0, stream: int = GAUSSIAN, start: int = 0) -> np.ndarray:
    return scale * special.ndtri(uniforms(n, seed, stream, start))


def normal_matrix(n: int, d: int, seed: int, scale: float = 1.0, stream: int = GAUSSIAN) -> np.ndarray:
    return normal(n * d, seed, scale, stream).reshape(n, d)


def laplace(n: int, seed: int, scale: float = 1.0, stream: int = LAPLACE, start: int = 0) -> np.ndarray:
    """Scaled standard Laplace draws (density exp(-|x|)/2) by inversion."""
    u = uniforms(n, seed, stream, start)
    lower = u < 0.5
    x = np.where(lower, np.log(2.0 * np.where(lower, u, 0.5)),
                 -np.log(2.0 * (1.0 - np.where(lower, 0.5, u))))
    return scale * x
