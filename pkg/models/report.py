from __future__ import annotations

from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

# Run-level CSV columns, in order.
CSV_COLUMNS = [
    "seed", "algo", "K", "T", "D", "d_star", "tilde_D", "skips", "regret",
    "bound_cor1", "bound_cor2", "bound_skip", "bound_thm4_worst", "bound_thm4_bestarm",
]

# Report bound key -> CSV column.
BOUND_COLUMNS = {
    "cor1": "bound_cor1",
    "cor2": "bound_cor2",
    "skip": "bound_skip",
    "thm4-worst": "bound_thm4_worst",
    "thm4-bestarm": "bound_thm4_bestarm",
}


class RoundRecord(BaseModel):
    """Everything a policy decided and observed in one round."""
    t: int
    probs: List[float]
    arm: int
    loss: float
    delay: int
    eta: float
    gamma: Optional[float] = None
    tau: int = Field(..., description="Missing-feedback count fed to the step size (tau or tilde tau)")
    arrivals: List[int] = Field(default_factory=list, description="Origin rounds delivered at the end of this round")
    estimate: Optional[float] = Field(None, description="Estimate value at the played arm, set when the feedback is applied")
    d_star: Optional[int] = None
    l_bck: Optional[float] = None


class EpisodeTrace(BaseModel):
    """Full per-round record of one episode; sufficient input for the DeDa oracles."""
    algo: str
    K: int
    T: int
    rounds: List[RoundRecord] = Field(default_factory=list)

    def column(self, name: str, dtype=float) -> np.ndarray:
        values = [getattr(r, name) for r in self.rounds]
        if any(v is None for v in values):
            values = [np.nan if v is None else v for v in values]
            dtype = float
        return np.asarray(values, dtype=dtype)

    def played_probs(self) -> np.ndarray:
        return np.asarray([r.probs[r.arm] for r in self.rounds], dtype=float)


class RegretReport(BaseModel):
    """Per-seed summary of one episode."""
    model_config = ConfigDict(
        json_schema_extra={
            "examples": [
                {
                    "seed": 0, "algo": "dada", "K": 10, "T": 5000,
                    "pseudo_regret": 412.0, "D": 124675, "d_star": 25,
                    "bounds": {"cor1": 1902.4},
                }
            ]
        }
    )

    seed: int
    algo: str
    K: int
    T: int
    cumulative_loss: float
    arm_losses: List[float]
    best_arm: int
    best_loss: float
    pseudo_regret: float
    D: int
    d_star: int
    tilde_D: Optional[int] = None
    skips: Optional[int] = None
    discarded: Optional[int] = None
    skip_violations: Optional[int] = None
    memory_peak: Optional[int] = None
    checkpoint_regret: Dict[int, float] = Field(default_factory=dict)
    bounds: Dict[str, float] = Field(default_factory=dict)
    comparator: Literal["hindsight_best"] = Field(
        "hindsight_best",
        description="High-probability bounds are checked against the best arm in hindsight, not a fixed comparator",
    )

    def csv_row(self) -> dict:
        row = {
            "seed": self.seed,
            "algo": self.algo,
            "K": self.K,
            "T": self.T,
            "D": self.D,
            "d_star": self.d_star,
            "tilde_D": self.tilde_D,
            "skips": self.skips,
            "regret": self.pseudo_regret,
        }
        for key, column in BOUND_COLUMNS.items():
            row[column] = self.bounds.get(key)
        return row


class RegretSummary(BaseModel):
    """Across-seed aggregate of pseudo-regret."""
    algo: str
    n: int
    mean: float
    stderr: float
    quantiles: Dict[str, float]
    delta: float
    violation_fraction: Dict[str, float] = Field(
        default_factory=dict, description="Fraction of seeds whose regret exceeds each bound"
    )
    mean_bounds: Dict[str, float] = Field(default_factory=dict)
