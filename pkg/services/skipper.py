"""
Skipping controller for DAda-Exp3.

A round whose feedback has been outstanding for more than sqrt(D~_t / log K)
rounds stops being counted in the missing-feedback statistic and its eventual
feedback is thrown away (treated as a zero loss). The counted statistics
tau~ and D~ replace tau and sum(tau) in the step-size schedule.
"""

from __future__ import annotations

import logging
import math
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from models.errors import ProtocolError
from models.instance import FeedbackEvent
from services.dada import DadaPolicy
from services.estimators import Estimate

logger = logging.getLogger(__name__)


class SkipController:
    def __init__(self, K: int):
        if K < 2:
            raise ValueError(f"need K >= 2, got {K}")
        self.K = K
        self.log_k = math.log(K)
        # insertion order is round order, so the first key is the oldest
        self.counted_outstanding: Dict[int, None] = {}
        self.skipped: Set[int] = set()
        self.tilde_tau = 0
        self.tilde_D = 0
        self.tilde_delays: Dict[int, int] = {}
        self.violations = 0
        self.discarded = 0
        self.t = 0

    def begin_round(self, t: int) -> Tuple[int, int]:
        """Counted missing feedbacks among rounds < t, and the running sum D~_t including them."""
        if t != self.t + 1:
            raise ProtocolError(f"begin_round({t}) called after round {self.t}")
        self.t = t
        self.tilde_tau = len(self.counted_outstanding)
        self.tilde_D += self.tilde_tau
        self.counted_outstanding[t] = None
        return self.tilde_tau, self.tilde_D

    def threshold(self) -> float:
        return math.sqrt(self.tilde_D / self.log_k)

    def end_round(self, t: int, arrivals: Iterable[FeedbackEvent]) -> Tuple[List[FeedbackEvent], Optional[int]]:
        """
        Split the arrivals due at t into kept and discarded ones, then skip the
        oldest counted round if it has waited longer than the threshold.
        """
        if t != self.t:
            raise ProtocolError(f"end_round({t}) called during round {self.t}")
        kept: List[FeedbackEvent] = []
        for ev in sorted(arrivals, key=lambda e: e.origin_round):
            s = ev.origin_round
            if s in self.skipped:
                self.discarded += 1
                continue
            if s not in self.counted_outstanding:
                raise ProtocolError(f"arrival for unknown round {s}")
            del self.counted_outstanding[s]
            self.tilde_delays[s] = ev.delay
            kept.append(ev)

        if not self.counted_outstanding:
            return kept, None
        limit = self.threshold()
        rounds = iter(self.counted_outstanding)
        oldest = next(rounds)
        if t - oldest <= limit:
            return kept, None

        del self.counted_outstanding[oldest]
        self.skipped.add(oldest)
        self.tilde_delays[oldest] = t - oldest
        logger.debug("round %d skipped at end of round %d (age %d > %.3f)", oldest, t, t - oldest, limit)

        runner_up = next(iter(self.counted_outstanding), None)
        if runner_up is not None and t - runner_up > limit:
            self.violations += 1
            logger.warning("round %d also exceeds the skip threshold at round %d", runner_up, t)
        return kept, oldest

    def effective_delays(self, T: int) -> np.ndarray:
        """d~_s for s = 1..T; meaningful once every round's feedback was delivered or skipped."""
        out = np.zeros(T, dtype=np.int64)
        for s, d in self.tilde_delays.items():
            out[s - 1] = d
        return out


class SkippingDadaPolicy:
    """DAda-Exp3 whose step size is driven by the counted statistics of a SkipController."""

    def __init__(self, policy: DadaPolicy):
        self.policy = policy
        self.K = policy.K
        self.controller = SkipController(policy.K)

    def __repr__(self) -> str:
        return f"SkippingDadaPolicy({self.policy!r})"

    @property
    def state(self):
        return self.policy.state

    @property
    def skipped(self) -> Set[int]:
        return self.controller.skipped

    @property
    def tilde_D(self) -> int:
        return self.controller.tilde_D

    def act(self, t: int, u: float) -> Tuple[np.ndarray, int]:
        tilde_tau, _ = self.controller.begin_round(t)
        return self.policy.act(t, u, tau=tilde_tau)

    def receive(self, t: int, arrivals: Iterable[FeedbackEvent]) -> Dict[int, Estimate]:
        arrivals = list(arrivals)
        kept, _ = self.controller.end_round(t, arrivals)
        kept_rounds = {ev.origin_round for ev in kept}
        for ev in arrivals:
            if ev.origin_round not in kept_rounds:
                self.policy.discard(ev.origin_round)
        return self.policy.receive(t, kept)
