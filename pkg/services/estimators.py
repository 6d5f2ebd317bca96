"""
Loss estimates built from a single observed loss.

Both estimators are nonzero only at the played arm, so they are kept
sparse as (arm, value); `dense()` expands them when a full vector is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, slots=True)
class Estimate:
    arm: int
    value: float
    K: int

    def dense(self) -> np.ndarray:
        v = np.zeros(self.K)
        v[self.arm] = self.value
        return v


def _check_loss(loss: float) -> None:
    if not 0.0 <= loss <= 1.0:
        raise ValueError(f"loss must lie in [0, 1], got {loss}")


def iw_value(loss: float, prob: float) -> float:
    """Importance-weighted value loss / p."""
    _check_loss(loss)
    if not prob > 0.0:
        raise ValueError("importance weighting needs a positive probability for the played arm")
    return loss / prob


def ix_value(loss: float, prob: float, gamma: float) -> float:
    """Implicit-exploration value loss / (p + gamma); never exceeds 1/gamma."""
    _check_loss(loss)
    if not gamma > 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return loss / (prob + gamma)


def iw_estimate(loss: float, arm: int, probs: np.ndarray) -> Estimate:
    return Estimate(arm=arm, value=iw_value(loss, float(probs[arm])), K=len(probs))


def ix_estimate(loss: float, arm: int, probs: np.ndarray, gamma: float) -> Estimate:
    return Estimate(arm=arm, value=ix_value(loss, float(probs[arm]), gamma), K=len(probs))
