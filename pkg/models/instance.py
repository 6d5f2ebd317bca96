"""
Problem-instance models: oblivious loss matrices, delay schedules,
the descriptors that generate them, and the feedback events a policy sees.

Rounds are 1-based (t = 1..T); arms are 0-based indices.
"""

from __future__ import annotations

from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, field_validator, model_validator

from models.errors import InvalidConfigError


# -----------------------------------------------------------------------------
# Adversary descriptors
# -----------------------------------------------------------------------------
class ConstantLosses(BaseModel):
    """Every arm suffers the same constant loss `c` in every round."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["constant"] = "constant"
    c: float = Field(0.0, ge=0.0, le=1.0, description="Constant loss value")


class BernoulliGap(BaseModel):
    """Independent Bernoulli losses; one arm has a smaller mean than the rest."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["bernoulli_gap"] = "bernoulli_gap"
    best_mean: float = Field(..., ge=0.0, le=1.0, json_schema_extra={"example": 0.3})
    other_mean: float = Field(..., ge=0.0, le=1.0, json_schema_extra={"example": 0.5})
    best_arm: int = Field(0, ge=0, description="Index of the low-mean arm")


class SwitchingLosses(BaseModel):
    """Bernoulli losses whose best arm moves to the next index every `period` rounds."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["switching"] = "switching"
    period: int = Field(..., ge=1)
    best_mean: float = Field(0.3, ge=0.0, le=1.0)
    other_mean: float = Field(0.5, ge=0.0, le=1.0)


class ScaledLosses(BaseModel):
    """A base adversary with every loss multiplied by `B`."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["scaled"] = "scaled"
    base: "AdversarySpec"
    B: float = Field(..., gt=0.0, le=1.0, description="Loss range scale")


AdversarySpec = Annotated[
    Union[ConstantLosses, BernoulliGap, SwitchingLosses, ScaledLosses],
    Field(discriminator="kind"),
]
ScaledLosses.model_rebuild()


# -----------------------------------------------------------------------------
# Delay descriptors
# -----------------------------------------------------------------------------
class ConstantDelay(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["constant"] = "constant"
    d: int = Field(..., ge=0, json_schema_extra={"example": 25})


class UniformDelay(BaseModel):
    """Raw delays uniform on {0, ..., dmax}."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["uniform"] = "uniform"
    dmax: int = Field(..., ge=0)


class GeometricDelay(BaseModel):
    """Raw delays geometric on {0, 1, ...} with the given mean."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["geometric"] = "geometric"
    mean: float = Field(..., ge=0.0)


class OneHugeDelay(BaseModel):
    """Round 1 waits until the horizon; every other round is undelayed."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["one_huge"] = "one_huge"


DelaySpec = Annotated[
    Union[ConstantDelay, UniformDelay, GeometricDelay, OneHugeDelay],
    Field(discriminator="kind"),
]

_ADVERSARY_ADAPTER = TypeAdapter(AdversarySpec)
_DELAY_ADAPTER = TypeAdapter(DelaySpec)


def parse_adversary(spec) -> BaseModel:
    """Accept a descriptor model or a plain dict and return the validated model."""
    if isinstance(spec, BaseModel):
        return spec
    try:
        return _ADVERSARY_ADAPTER.validate_python(spec)
    except ValidationError as e:
        raise InvalidConfigError(f"invalid adversary descriptor: {e}") from e


def parse_delays(spec) -> BaseModel:
    if isinstance(spec, BaseModel):
        return spec
    try:
        return _DELAY_ADAPTER.validate_python(spec)
    except ValidationError as e:
        raise InvalidConfigError(f"invalid delay descriptor: {e}") from e


# -----------------------------------------------------------------------------
# Generated instances
# -----------------------------------------------------------------------------
def _frozen_copy(values: np.ndarray) -> np.ndarray:
    """Private read-only copy, so the caller's array stays writable."""
    out = np.array(values, copy=True)
    out.setflags(write=False)
    return out


class LossMatrix(BaseModel):
    """T x K grid of losses in [0, 1], fixed before any policy runs."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray

    @field_validator("values")
    @classmethod
    def _own_copy(cls, v: np.ndarray) -> np.ndarray:
        return _frozen_copy(v)

    @model_validator(mode="after")
    def _check(self) -> "LossMatrix":
        v = self.values
        if v.ndim != 2:
            raise ValueError("loss matrix must be two-dimensional")
        if v.shape[0] < 1 or v.shape[1] < 2:
            raise ValueError(f"need T >= 1 and K >= 2, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("losses must lie in [0, 1]")
        return self

    @property
    def T(self) -> int:
        return int(self.values.shape[0])

    @property
    def K(self) -> int:
        return int(self.values.shape[1])

    def loss(self, t: int, arm: int) -> float:
        return float(self.values[t - 1, arm])

    def cumulative(self, upto: int | None = None) -> np.ndarray:
        """Per-arm cumulative losses L_{upto,i} (whole horizon by default)."""
        upto = self.T if upto is None else upto
        return self.values[:upto].sum(axis=0)


class DelaySchedule(BaseModel):
    """Per-round delays d_t with t + d_t <= T."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray

    @field_validator("values")
    @classmethod
    def _own_copy(cls, v: np.ndarray) -> np.ndarray:
        return _frozen_copy(v)

    @model_validator(mode="after")
    def _check(self) -> "DelaySchedule":
        d = self.values
        if d.ndim != 1 or d.shape[0] < 1:
            raise ValueError("delay schedule must be a non-empty vector")
        if not np.issubdtype(d.dtype, np.integer):
            raise ValueError("delays must be integers")
        if d.min() < 0:
            raise ValueError("delays must be nonnegative")
        rounds = np.arange(1, d.shape[0] + 1)
        if np.any(rounds + d > d.shape[0]):
            raise ValueError("every feedback must arrive by the end of round T")
        return self

    @classmethod
    def of(cls, delays) -> "DelaySchedule":
        return cls(values=np.asarray(delays, dtype=np.int64))

    @property
    def T(self) -> int:
        return int(self.values.shape[0])

    @property
    def total(self) -> int:
        return int(self.values.sum())

    @property
    def max_delay(self) -> int:
        return int(self.values.max())

    def delay(self, t: int) -> int:
        return int(self.values[t - 1])


class FeedbackEvent(BaseModel):
    """The loss of the arm played in `origin_round`, revealed at the end of round origin_round + delay."""
    model_config = ConfigDict(frozen=True)

    origin_round: int = Field(..., ge=1)
    arm: int = Field(..., ge=0)
    loss: float = Field(..., ge=0.0, le=1.0)
    delay: int = Field(..., ge=0)

    @property
    def due_round(self) -> int:
        return self.origin_round + self.delay
