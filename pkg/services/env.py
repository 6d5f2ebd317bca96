"""
Delayed-feedback environment: oblivious loss/delay generation, the feedback
queue that delivers each round's loss at the end of round t + d_t, and the
ground-truth delay bookkeeping (tau_t, D, d*).
"""

from __future__ import annotations

import heapq
import logging
from typing import List, NamedTuple, Set, Tuple

import numpy as np

from models.errors import InvalidConfigError, ProtocolError
from models.instance import (
    BernoulliGap,
    ConstantDelay,
    ConstantLosses,
    DelaySchedule,
    FeedbackEvent,
    GeometricDelay,
    LossMatrix,
    OneHugeDelay,
    ScaledLosses,
    SwitchingLosses,
    UniformDelay,
    parse_adversary,
    parse_delays,
)

logger = logging.getLogger(__name__)


def seed_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Two independent generators (environment, policy) derived from one seed."""
    env_seq, policy_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_seq), np.random.default_rng(policy_seq)


# -----------------------------------------------------------------------------
# Losses
# -----------------------------------------------------------------------------
def _bernoulli(means: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(means.shape) < means).astype(np.float64)


def _loss_values(spec, T: int, K: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(spec, ConstantLosses):
        return np.full((T, K), spec.c, dtype=np.float64)
    if isinstance(spec, BernoulliGap):
        if spec.best_arm >= K:
            raise InvalidConfigError(f"best_arm {spec.best_arm} out of range for K={K}")
        means = np.full(K, spec.other_mean)
        means[spec.best_arm] = spec.best_mean
        return _bernoulli(np.broadcast_to(means, (T, K)), rng)
    if isinstance(spec, SwitchingLosses):
        best = (np.arange(T) // spec.period) % K
        means = np.full((T, K), spec.other_mean)
        means[np.arange(T), best] = spec.best_mean
        return _bernoulli(means, rng)
    if isinstance(spec, ScaledLosses):
        return _loss_values(spec.base, T, K, rng) * spec.B
    raise InvalidConfigError(f"unknown adversary descriptor: {spec!r}")


def gen_losses(spec, T: int, K: int, rng: np.random.Generator) -> LossMatrix:
    """Draw a T x K loss matrix from the named adversary."""
    if T < 1 or K < 2:
        raise InvalidConfigError(f"need T >= 1 and K >= 2, got T={T}, K={K}")
    spec = parse_adversary(spec)
    return LossMatrix(values=_loss_values(spec, T, K, rng))


# -----------------------------------------------------------------------------
# Delays
# -----------------------------------------------------------------------------
def raw_delays(spec, T: int, rng: np.random.Generator) -> np.ndarray:
    """Delays as drawn, before clipping at the horizon."""
    if T < 1:
        raise InvalidConfigError(f"need T >= 1, got T={T}")
    spec = parse_delays(spec)
    if isinstance(spec, ConstantDelay):
        raw = np.full(T, spec.d, dtype=np.int64)
    elif isinstance(spec, UniformDelay):
        raw = rng.integers(0, spec.dmax + 1, size=T, dtype=np.int64)
    elif isinstance(spec, GeometricDelay):
        raw = rng.geometric(1.0 / (spec.mean + 1.0), size=T).astype(np.int64) - 1
    elif isinstance(spec, OneHugeDelay):
        raw = np.zeros(T, dtype=np.int64)
        raw[0] = T - 1
    else:
        raise InvalidConfigError(f"unknown delay descriptor: {spec!r}")
    if raw.min() < 0:
        raise InvalidConfigError("raw delays must be nonnegative")
    return raw


def clip_delays(raw: np.ndarray, T: int) -> np.ndarray:
    """d_t <- min(raw_t, T - t) so that every feedback arrives by the end of round T."""
    raw = np.asarray(raw, dtype=np.int64)
    if raw.min() < 0:
        raise InvalidConfigError("raw delays must be nonnegative")
    return np.minimum(raw, T - np.arange(1, T + 1))


def gen_delays(spec, T: int, rng: np.random.Generator) -> DelaySchedule:
    return DelaySchedule(values=clip_delays(raw_delays(spec, T, rng), T))


# -----------------------------------------------------------------------------
# Delay bookkeeping
# -----------------------------------------------------------------------------
class DelayAccounting(NamedTuple):
    tau: np.ndarray   # tau[t-1] = |O_t|
    D: int
    d_star: int


def delay_accounting(schedule: DelaySchedule) -> DelayAccounting:
    """tau_t = |{s < t : s + d_s >= t}| for every round, plus D and d*."""
    d = schedule.values
    T = schedule.T
    # round s is missing during rounds s+1 .. s+d_s
    diff = np.zeros(T + 2, dtype=np.int64)
    s = np.arange(1, T + 1)
    np.add.at(diff, s + 1, 1)
    np.add.at(diff, s + d + 1, -1)
    tau = np.cumsum(diff)[1 : T + 1]
    D = int(d.sum())
    assert int(tau.sum()) == D
    return DelayAccounting(tau=tau, D=D, d_star=int(d.max()))


def outstanding_sets(schedule: DelaySchedule) -> List[Set[int]]:
    """O_t for t = 1..T (index t-1). Quadratic in the worst case; meant for small instances."""
    d = schedule.values
    return [
        {s for s in range(max(1, t - schedule.max_delay), t) if s + d[s - 1] >= t}
        for t in range(1, schedule.T + 1)
    ]


# -----------------------------------------------------------------------------
# Feedback queue
# -----------------------------------------------------------------------------
class FeedbackQueue:
    """Pending feedback keyed by due round s + d_s; popped once per round in increasing order."""

    def __init__(self):
        self._heap: List[Tuple[int, int, FeedbackEvent]] = []
        self._last_popped = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, event: FeedbackEvent) -> None:
        if event.due_round <= self._last_popped:
            raise ProtocolError(
                f"event from round {event.origin_round} is due at {event.due_round}, "
                f"but round {self._last_popped} was already delivered"
            )
        heapq.heappush(self._heap, (event.due_round, event.origin_round, event))

    def pop_due(self, t: int) -> List[FeedbackEvent]:
        """All events with s + d_s = t, in ascending origin-round order."""
        if t <= self._last_popped:
            raise ProtocolError(f"round {t} popped after round {self._last_popped}")
        if self._heap and self._heap[0][0] < t:
            raise ProtocolError(f"round {t} popped while feedback due at {self._heap[0][0]} is pending")
        self._last_popped = t
        due: List[FeedbackEvent] = []
        while self._heap and self._heap[0][0] == t:
            due.append(heapq.heappop(self._heap)[2])
        return due

    def pending_origins(self) -> List[int]:
        return sorted(origin for _, origin, _ in self._heap)
