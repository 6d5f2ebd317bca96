"""
Delay- and data-adaptive Exp3 (DeDa-Exp3), plus oracles that recompute its
bookkeeping directly from a finished run.

The policy keeps, besides z, the probability-weighted sums m and the scalar
L_bck, which together give a step size that adapts to the observed losses
while paying only a polynomial price in the maximum delay d*.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, NamedTuple, Optional, Tuple

import numpy as np

from models.errors import ProtocolError, StepSizeError, TraceError
from models.instance import FeedbackEvent
from models.report import EpisodeTrace
from services.estimators import Estimate, ix_value
from services.weights import distribution, sample

logger = logging.getLogger(__name__)


def delay_penalty(d_star: int) -> int:
    """C = 4 d*^2 + 6 d* + 2."""
    return 4 * d_star * d_star + 6 * d_star + 2


def deda_step_size(d_star: int, L_bck: float, K: int) -> Tuple[float, float]:
    """1/eta = (4 d*^2 + 6 d* + 2) / log K + sqrt(L_bck / log K); gamma = eta."""
    log_k = math.log(K)
    eta = 1.0 / (delay_penalty(d_star) / log_k + math.sqrt(L_bck / log_k))
    return eta, eta


@dataclass(slots=True)
class Snapshot:
    """Per-round memory entry; only the played arm's coordinates are needed."""
    arm: int
    prob: float
    gamma: float
    m_arm: float
    z_arm: float


@dataclass
class DedaState:
    z: np.ndarray
    m: np.ndarray
    l_bck: float = 0.0
    d_star: int = 0
    memory: Dict[int, Snapshot] = field(default_factory=dict)
    t: int = 0
    eta: float = math.inf
    gamma: float = math.inf
    memory_peak: int = 0


class DedaPolicy:
    """
    DeDa-Exp3 in one of two modes: known-delay (d_t is revealed when round t is
    played) or prior-bound (d* is fixed to an a priori bound d_bound).
    """

    def __init__(self, K: int, d_bound: Optional[int] = None):
        if K < 2:
            raise ValueError(f"need K >= 2, got {K}")
        if d_bound is not None and d_bound < 0:
            raise ValueError(f"d_bound must be nonnegative, got {d_bound}")
        self.K = K
        self.d_bound = d_bound
        self.state = DedaState(z=np.zeros(K), m=np.zeros(K), d_star=d_bound or 0)

    @property
    def mode(self) -> str:
        return "known-delay" if self.d_bound is None else "prior-bound"

    def __repr__(self) -> str:
        return f"DedaPolicy(K={self.K}, mode={self.mode!r}, d_bound={self.d_bound})"

    def act(self, t: int, u: float, delay: Optional[int] = None) -> Tuple[np.ndarray, int]:
        st = self.state
        if t != st.t + 1:
            raise ProtocolError(f"act({t}) called after round {st.t}")
        if self.d_bound is None:
            if delay is None:
                raise ProtocolError(f"known-delay mode needs d_{t} when round {t} is played")
            st.d_star = max(delay, st.d_star)

        eta, gamma = deda_step_size(st.d_star, st.l_bck, self.K)
        if eta > st.eta:
            raise StepSizeError(f"step size increased at round {t}: {st.eta} -> {eta}")
        st.eta, st.gamma = eta, gamma
        st.t = t

        p = distribution(st.z, eta)
        arm = sample(p, u)
        st.memory[t] = Snapshot(arm=arm, prob=float(p[arm]), gamma=gamma, m_arm=st.m[arm], z_arm=st.z[arm])
        st.memory_peak = max(st.memory_peak, len(st.memory))
        return p, arm

    def receive(self, t: int, arrivals: Iterable[FeedbackEvent]) -> Dict[int, Estimate]:
        """
        Apply the feedback due at the end of round t: z and m are updated over
        all arrivals first, then L_bck is advanced against the stored snapshots.
        """
        st = self.state
        batch = []
        seen = set()
        for ev in sorted(arrivals, key=lambda e: e.origin_round):
            if ev.origin_round in seen:
                raise ProtocolError(f"duplicate arrival for round {ev.origin_round}")
            seen.add(ev.origin_round)
            if ev.due_round != t:
                raise ProtocolError(f"feedback from round {ev.origin_round} is due at {ev.due_round}, not {t}")
            snap = st.memory.get(ev.origin_round)
            if snap is None:
                raise ProtocolError(f"no memory entry for round {ev.origin_round}")
            if ev.arm != snap.arm:
                raise ProtocolError(f"feedback for round {ev.origin_round} names arm {ev.arm}, played {snap.arm}")
            batch.append((ev.origin_round, snap, ix_value(ev.loss, snap.prob, snap.gamma)))

        for _, snap, value in batch:
            st.z[snap.arm] += value
            st.m[snap.arm] += value * snap.prob

        applied: Dict[int, Estimate] = {}
        for s, snap, value in batch:
            st.l_bck += value * (st.m[snap.arm] - snap.m_arm) + value * snap.prob * (st.z[snap.arm] - snap.z_arm)
            del st.memory[s]
            applied[s] = Estimate(arm=snap.arm, value=value, K=self.K)
        return applied


# -----------------------------------------------------------------------------
# Oracles over a finished run
# -----------------------------------------------------------------------------
class TraceArrays(NamedTuple):
    arm: np.ndarray
    prob: np.ndarray      # p_{t, A_t}
    est: np.ndarray       # hat ell_{t, A_t}
    delay: np.ndarray
    arrival: np.ndarray   # t + d_t
    gamma: np.ndarray
    eta: np.ndarray
    d_star: np.ndarray
    l_bck: np.ndarray


def trace_arrays(trace: EpisodeTrace) -> TraceArrays:
    if len(trace.rounds) != trace.T:
        raise TraceError(f"trace holds {len(trace.rounds)} of {trace.T} rounds")
    for r in trace.rounds:
        if r.estimate is None:
            raise TraceError(f"round {r.t} has no applied estimate")
        if r.gamma is None or r.d_star is None or r.l_bck is None:
            raise TraceError(f"round {r.t} lacks step-size bookkeeping")
    delay = trace.column("delay", np.int64)
    return TraceArrays(
        arm=trace.column("arm", np.int64),
        prob=trace.played_probs(),
        est=trace.column("estimate"),
        delay=delay,
        arrival=np.arange(1, trace.T + 1) + delay,
        gamma=trace.column("gamma"),
        eta=trace.column("eta"),
        d_star=trace.column("d_star", np.int64),
        l_bck=trace.column("l_bck"),
    )


def _lbck_direct(a: TraceArrays, s: int) -> float:
    i = s - 1
    window = (a.arrival >= s) & (a.arrival <= a.arrival[i]) & (a.arm == a.arm[i])
    return float(np.sum(a.est[i] * a.est[window] * (a.prob[window] + a.prob[i])))


def _missing_mask(a: TraceArrays, t: int) -> np.ndarray:
    """Boolean mask of O_t over rounds 1..T."""
    rounds = np.arange(1, len(a.arm) + 1)
    return (rounds < t) & (a.arrival >= t)


def _lfwd(a: TraceArrays, t: int) -> float:
    i = t - 1
    same = a.arm == a.arm[i]
    delta = float(np.sum(a.est[_missing_mask(a, t) & same]))
    return a.est[i] * a.prob[i] * delta + a.est[i] ** 2 * a.prob[i]


def _lbck_cap_term(a: TraceArrays, j: int) -> float:
    """sum over s in O_j, {j}, D_j of hat ell_s hat ell_j p_j at the arm played in j."""
    i = j - 1
    rounds = np.arange(1, len(a.arm) + 1)
    neighbourhood = _missing_mask(a, j) | (rounds == j) | ((rounds > j) & (rounds <= a.arrival[i]))
    same = a.arm == a.arm[i]
    return float(np.sum(a.est[neighbourhood & same]) * a.est[i] * a.prob[i])


def oracle_lbck_direct(trace: EpisodeTrace, s: int) -> float:
    """sum_i l^bck_{s,i} by the direct double sum over j with s <= j + d_j <= s + d_s."""
    return _lbck_direct(trace_arrays(trace), s)


def oracle_lfwd(trace: EpisodeTrace, t: int) -> float:
    """sum_i l^fwd_{t,i} = hat ell_t p_t Delta_t + hat ell_t^2 p_t at the played arm."""
    return _lfwd(trace_arrays(trace), t)


def oracle_lbck_cap(trace: EpisodeTrace, t: int) -> float:
    """Upper bound on the L_bck accumulated before round t: twice the neighbourhood sums up to t."""
    a = trace_arrays(trace)
    return 2.0 * sum(_lbck_cap_term(a, j) for j in range(1, t + 1))


def _rel_gap(x: float, y: float) -> float:
    scale = max(abs(x), abs(y))
    return 0.0 if scale == 0.0 else abs(x - y) / scale


class DedaCheck(NamedTuple):
    max_recurrence_error: float   # relative gap, incremental vs direct L_bck
    min_slack_lbck_cap: float     # normalised rhs - lhs, >= 0 when the inequality holds
    min_slack_fwd_cap: float
    min_slack_step: float
    gamma_monotone: bool

    def passed(self, tol: float = 1e-9) -> bool:
        return (
            self.max_recurrence_error <= tol
            and min(self.min_slack_lbck_cap, self.min_slack_fwd_cap, self.min_slack_step) >= -tol
            and self.gamma_monotone
        )


def check_deda_trace(trace: EpisodeTrace) -> DedaCheck:
    """Evaluate the L_bck identity and the step-size-control inequalities at every round."""
    a = trace_arrays(trace)
    T, log_k = trace.T, math.log(trace.K)
    lbck = np.array([_lbck_direct(a, s) for s in range(1, T + 1)])
    fwd_cum = np.cumsum([_lfwd(a, t) for t in range(1, T + 1)])
    cap_cum = 2.0 * np.cumsum([_lbck_cap_term(a, j) for j in range(1, T + 1)])

    rec_err, s_cap, s_fwd, s_step = 0.0, math.inf, math.inf, math.inf
    for t in range(1, T + 1):
        i = t - 1
        lbck_prefix = float(lbck[a.arrival < t].sum())
        rec_err = max(rec_err, _rel_gap(a.l_bck[i], lbck_prefix))
        s_cap = min(s_cap, (cap_cum[i] - lbck_prefix) / max(1.0, abs(cap_cum[i])))
        fwd_rhs = lbck_prefix + delay_penalty(int(a.d_star[i])) / a.gamma[i]
        s_fwd = min(s_fwd, (fwd_rhs - fwd_cum[i]) / max(1.0, abs(fwd_rhs)))
        if fwd_cum[i] > 0.0:
            cap = math.sqrt(log_k / fwd_cum[i])
            s_step = min(s_step, (cap - a.eta[i]) / max(1.0, cap))
    gamma_monotone = bool(np.all(np.diff(a.gamma) <= 0.0))
    return DedaCheck(rec_err, s_cap, s_fwd, s_step if s_step != math.inf else 0.0, gamma_monotone)
