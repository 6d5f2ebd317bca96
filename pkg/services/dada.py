"""
Delay-adaptive Exp3 (DAda-Exp3).

The policy plays exponential weights over z, the per-arm sum of the loss
estimates that have arrived so far, with a step size tuned from the number of
missing feedbacks. Estimates are importance weighted (iw) or use implicit
exploration with gamma_t = eta_t (ix).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Literal, Optional, Tuple

import numpy as np

from models.errors import ProtocolError, StepSizeError
from models.instance import FeedbackEvent
from services.estimators import Estimate, iw_value, ix_value
from services.weights import distribution, sample

logger = logging.getLogger(__name__)

EstimatorMode = Literal["iw", "ix"]
StepRule = Callable[[int, int, int], float]


def step_size_cor1(t: int, K: int, cum_tau: int) -> float:
    """eta_t = sqrt(log K / (tK + sum_{s<=t} tau_s))."""
    return math.sqrt(math.log(K) / (t * K + cum_tau))


def step_size_cor2(t: int, K: int, cum_tau: int) -> Tuple[float, float]:
    """eta_t = gamma_t = 1/2 sqrt(3 log K / (2tK + sum_{s<=t} tau_s))."""
    eta = 0.5 * math.sqrt(3.0 * math.log(K) / (2 * t * K + cum_tau))
    return eta, eta


class StepSchedule:
    """Step-size rule over (t, K, cum_tau); `cor1`, `cor2` or a caller-supplied rule."""

    def __init__(self, mode: Literal["cor1", "cor2", "custom"], rule: Optional[StepRule] = None):
        if mode == "custom" and rule is None:
            raise ValueError("custom schedule needs a rule")
        self.mode = mode
        self.rule = rule

    @classmethod
    def cor1(cls) -> "StepSchedule":
        return cls("cor1")

    @classmethod
    def cor2(cls) -> "StepSchedule":
        return cls("cor2")

    @classmethod
    def custom(cls, rule: StepRule) -> "StepSchedule":
        return cls("custom", rule)

    def __call__(self, t: int, K: int, cum_tau: int) -> float:
        if self.mode == "cor1":
            return step_size_cor1(t, K, cum_tau)
        if self.mode == "cor2":
            return step_size_cor2(t, K, cum_tau)[0]
        return float(self.rule(t, K, cum_tau))

    def __repr__(self) -> str:
        return f"StepSchedule(mode={self.mode!r})"


@dataclass(slots=True)
class Pending:
    """What act() froze for a round whose feedback has not arrived yet."""
    arm: int
    prob: float
    gamma: Optional[float]


@dataclass
class DadaState:
    z: np.ndarray
    outstanding: Dict[int, Pending] = field(default_factory=dict)
    t: int = 0
    tau: int = 0
    cum_tau: int = 0
    eta: float = math.inf
    gamma: Optional[float] = None
    last_eta: float = math.inf


class DadaPolicy:
    """
    Exponential weights over arrived estimates with a delay-adaptive step size.

    Round protocol: act(t) computes p_t from everything delivered up to the end
    of round t-1; receive(t, arrivals) then applies the feedback due at t.
    """

    def __init__(self, K: int, schedule: StepSchedule, estimator: EstimatorMode = "iw"):
        if K < 2:
            raise ValueError(f"need K >= 2, got {K}")
        if estimator not in ("iw", "ix"):
            raise ValueError(f"unknown estimator {estimator!r}")
        self.K = K
        self.schedule = schedule
        self.estimator = estimator
        self.state = DadaState(z=np.zeros(K))

    def __repr__(self) -> str:
        return f"DadaPolicy(K={self.K}, schedule={self.schedule!r}, estimator={self.estimator!r})"

    def act(self, t: int, u: float, tau: Optional[int] = None) -> Tuple[np.ndarray, int]:
        """
        Play round t with uniform draw u.

        `tau` overrides the missing-feedback count fed to the step size;
        by default it is the number of outstanding rounds, i.e. tau_t.
        """
        st = self.state
        if t != st.t + 1:
            raise ProtocolError(f"act({t}) called after round {st.t}")
        st.tau = len(st.outstanding) if tau is None else tau
        st.cum_tau += st.tau
        eta = self.schedule(t, self.K, st.cum_tau)
        if not eta > 0.0:
            raise StepSizeError(f"non-positive step size {eta} at round {t}")
        if eta > st.eta:
            raise StepSizeError(f"step size increased at round {t}: {st.eta} -> {eta}")
        st.last_eta, st.eta = st.eta, eta
        st.gamma = eta if self.estimator == "ix" else None
        st.t = t

        p = distribution(st.z, eta)
        arm = sample(p, u)
        st.outstanding[t] = Pending(arm=arm, prob=float(p[arm]), gamma=st.gamma)
        return p, arm

    def receive(self, t: int, arrivals: Iterable[FeedbackEvent]) -> Dict[int, Estimate]:
        """Fold the feedback due at the end of round t into z; returns the estimates applied."""
        st = self.state
        applied: Dict[int, Estimate] = {}
        # fixed order keeps z bit-identical whatever order the caller passes
        for ev in sorted(arrivals, key=lambda e: e.origin_round):
            if ev.due_round != t:
                raise ProtocolError(f"feedback from round {ev.origin_round} is due at {ev.due_round}, not {t}")
            pending = st.outstanding.pop(ev.origin_round, None)
            if pending is None:
                raise ProtocolError(f"feedback for round {ev.origin_round} is not outstanding")
            if ev.arm != pending.arm:
                raise ProtocolError(f"feedback for round {ev.origin_round} names arm {ev.arm}, played {pending.arm}")
            if self.estimator == "ix":
                value = ix_value(ev.loss, pending.prob, pending.gamma)
            else:
                value = iw_value(ev.loss, pending.prob)
            st.z[pending.arm] += value
            applied[ev.origin_round] = Estimate(arm=pending.arm, value=value, K=self.K)
        return applied

    def discard(self, origin_round: int) -> None:
        """Drop an outstanding round without applying its feedback."""
        if self.state.outstanding.pop(origin_round, None) is None:
            raise ProtocolError(f"round {origin_round} is not outstanding")
