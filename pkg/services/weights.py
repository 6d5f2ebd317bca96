"""
Exponential-weights distribution and inverse-CDF sampling shared by every policy.
"""

from __future__ import annotations

import numpy as np

# Smallest exponent whose exp() is still a normal float64; keeps every weight > 0.
_EXP_FLOOR = float(np.log(np.finfo(np.float64).tiny))


def distribution(z: np.ndarray, eta: float) -> np.ndarray:
    """
    p_i proportional to exp(-eta * z_i), computed with a max-shift in the exponent.
    Entries are strictly positive and sum to one.
    """
    z = np.asarray(z, dtype=np.float64)
    if not eta > 0.0 or not np.isfinite(eta):
        raise ValueError(f"eta must be positive and finite, got {eta}")
    if not np.all(np.isfinite(z)):
        raise ValueError("cumulative estimates must be finite")
    # shift before scaling: max_i(-eta * z_i) = -eta * min_i z_i
    x = -eta * (z - z.min())
    np.maximum(x, _EXP_FLOOR, out=x)
    w = np.exp(x)
    return w / w.sum()


def sample(p: np.ndarray, u: float) -> int:
    """Smallest arm i with p_0 + ... + p_i > u."""
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, u, side="right"))
    # cumsum may land a hair below 1.0
    return min(i, len(cdf) - 1)
