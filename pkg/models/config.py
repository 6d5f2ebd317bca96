from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.instance import AdversarySpec, DelaySpec

Algo = Literal["dada", "dada-hp", "dada-skip", "dada-hp-skip", "deda-known", "deda-bound"]

ALGOS: tuple[str, ...] = ("dada", "dada-hp", "dada-skip", "dada-hp-skip", "deda-known", "deda-bound")


class SeedRange(BaseModel):
    """`count` consecutive seeds starting at `base`."""
    model_config = ConfigDict(extra="forbid")

    count: int = Field(..., ge=1, json_schema_extra={"example": 50})
    base: int = Field(0, ge=0)

    def expand(self) -> List[int]:
        return list(range(self.base, self.base + self.count))


class RunConfig(BaseModel):
    """One algorithm on one instance family, replicated over seeds."""
    model_config = ConfigDict(
        extra="forbid",
        populate_by_name=True,
        json_schema_extra={
            "examples": [
                {
                    "algo": "dada",
                    "adversary": {"kind": "bernoulli_gap", "best_mean": 0.3, "other_mean": 0.5},
                    "delays": {"kind": "constant", "d": 25},
                    "K": 10,
                    "T": 5000,
                    "seeds": {"count": 50, "base": 0},
                    "delta": 0.05,
                }
            ]
        },
    )

    algo: Algo = Field(..., description="Policy variant")
    adversary: AdversarySpec
    delays: DelaySpec
    K: int = Field(..., ge=2, description="Number of arms")
    T: int = Field(..., ge=1, description="Horizon")
    seeds: Union[List[int], SeedRange] = Field(default_factory=lambda: SeedRange(count=1))
    delta: float = Field(0.05, gt=0.0, lt=1.0, description="Confidence parameter of high-probability bounds")
    d_bound: Optional[int] = Field(None, ge=0, description="A priori maximum delay (deda-bound only)")
    checkpoints: List[int] = Field(default_factory=list, description="Rounds at which prefix regret is recorded")
    csv: Optional[Path] = None
    json_path: Optional[Path] = Field(None, alias="json")
    trace_dir: Optional[Path] = None
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.algo == "deda-bound" and self.d_bound is None:
            raise ValueError("algo 'deda-bound' requires d_bound")
        bad = [c for c in self.checkpoints if not 1 <= c <= self.T]
        if bad:
            raise ValueError(f"checkpoints outside [1, T]: {bad}")
        best_arm = getattr(self.adversary, "best_arm", None)
        base = getattr(self.adversary, "base", None)
        if base is not None:
            best_arm = getattr(base, "best_arm", best_arm)
        if best_arm is not None and best_arm >= self.K:
            raise ValueError(f"best_arm {best_arm} out of range for K={self.K}")
        if isinstance(self.seeds, list) and not self.seeds:
            raise ValueError("seeds must not be empty")
        return self

    def seed_list(self) -> List[int]:
        return list(self.seeds) if isinstance(self.seeds, list) else self.seeds.expand()
