"""
Closed-form regret bounds for the DAda, skipping and DeDa variants, evaluated
exactly as printed (constants included) so that simulated regret can be
compared against them.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, NamedTuple, Sequence

import numpy as np

from models.errors import InvalidConfigError
from services.deda import delay_penalty

# high-probability skipping constants
C1 = 2.0 * math.sqrt(6.0)
C2 = math.sqrt(2.0 / 3.0)
C3 = 4.0 * (math.sqrt(3.0) + 1.0)
C4 = 1.0 + 2.0 / math.sqrt(3.0)

# DeDa worst-case constant
C_DEDA = 2.0 + math.sqrt(2.0)


def _need(kind: str, params: dict, *names: str) -> list:
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise InvalidConfigError(f"bound {kind!r} needs {', '.join(missing)}")
    return [params[n] for n in names]


def _log_k(K) -> float:
    if K < 2:
        raise InvalidConfigError(f"need K >= 2, got {K}")
    return math.log(K)


def _confidence(delta) -> float:
    if not 0.0 < delta < 1.0:
        raise InvalidConfigError(f"delta must lie in (0, 1), got {delta}")
    return math.log(2.0 / delta)


# -----------------------------------------------------------------------------
# DAda
# -----------------------------------------------------------------------------
def _cor1(p: dict) -> float:
    K, T, D = _need("cor1", p, "K", "T", "D")
    return 3.0 * math.sqrt(_log_k(K) * (T * K + D))


def _cor2(p: dict) -> float:
    K, T, D, d_star, delta = _need("cor2", p, "K", "T", "D", "d_star", "delta")
    log_k = _log_k(K)
    return (
        2.0 * math.sqrt(3.0 * log_k * (2 * K * T + D))
        + (2.0 * math.sqrt((2 * T * K + D) / (3.0 * log_k)) + d_star + 2.0) * _confidence(delta) / 2.0
    )


def _thm1(p: dict) -> float:
    K, etas, taus = _need("thm1", p, "K", "etas", "taus")
    etas, taus = np.asarray(etas, dtype=float), np.asarray(taus, dtype=float)
    return _log_k(K) / etas[-1] + float(np.minimum(1.0, etas * (taus + K)).sum())


def _thm2(p: dict) -> float:
    K, etas, taus, d_star, delta = _need("thm2", p, "K", "etas", "taus", "d_star", "delta")
    etas, taus = np.asarray(etas, dtype=float), np.asarray(taus, dtype=float)
    return (
        3.0 * _log_k(K) / (2.0 * etas[-1])
        + float((etas * (taus + 2 * K)).sum())
        + (1.0 / etas[-1] + d_star + 2.0) / 2.0 * _confidence(delta)
    )


# -----------------------------------------------------------------------------
# Skipping
# -----------------------------------------------------------------------------
def _skip_term(kind: str, p: dict, log_k: float) -> float:
    R, D_Rbar = _need(kind, p, "R", "D_Rbar")
    return max(2.0 * log_k, R + math.sqrt(D_Rbar * log_k))


def _skip_exp(p: dict) -> float:
    if p.get("skips") is not None:
        return _skip_exp_realized(p)
    K, T = _need("skip-exp", p, "K", "T")
    log_k = _log_k(K)
    return 3.0 * math.sqrt(T * K * log_k) + 10.0 * _skip_term("skip-exp", p, log_k)


def _skip_exp_realized(p: dict) -> float:
    """|S| plus cor1 on the zeroed losses and effective delays."""
    K, T, skips, tilde_sum = _need("skip-exp", p, "K", "T", "skips", "tilde_delay_sum")
    return skips + 3.0 * math.sqrt(_log_k(K) * (T * K + tilde_sum))


def _skip_hp(p: dict) -> float:
    if p.get("skips") is not None:
        return _skip_hp_realized(p)
    K, T, delta = _need("skip-hp", p, "K", "T", "delta")
    log_k = _log_k(K)
    L = _confidence(delta) / log_k
    return (C1 + C2 * L) * math.sqrt(K * T * log_k) + (C3 + C4 * L) * _skip_term("skip-hp", p, log_k)


def _skip_hp_realized(p: dict) -> float:
    K, T, skips, tilde_sum, tilde_max, delta = _need(
        "skip-hp", p, "K", "T", "skips", "tilde_delay_sum", "tilde_d_star", "delta"
    )
    return skips + _cor2({"K": K, "T": T, "D": tilde_sum, "d_star": tilde_max, "delta": delta})


class SkipSet(NamedTuple):
    size: int       # |R|
    D_Rbar: int     # total delay of the rounds kept
    value: float    # |R| + sqrt(D_Rbar log K)


def best_skip_set(delays: Sequence[int], K: int) -> SkipSet:
    """
    Minimise |R| + sqrt(D_Rbar log K) over R. For a fixed |R| = k the best
    choice drops the k largest delays, so only T + 1 candidates are compared.
    """
    log_k = _log_k(K)
    d = np.sort(np.asarray(delays, dtype=np.int64))[::-1]
    kept = d.sum() - np.concatenate(([0], np.cumsum(d)))
    values = np.arange(len(d) + 1) + np.sqrt(kept * log_k)
    k = int(np.argmin(values))
    return SkipSet(size=k, D_Rbar=int(kept[k]), value=float(values[k]))


# -----------------------------------------------------------------------------
# DeDa
# -----------------------------------------------------------------------------
def _thm4_worst(p: dict) -> float:
    K, T, D, d_star = _need("thm4-worst", p, "K", "T", "D", "d_star")
    return delay_penalty(d_star) + C_DEDA * math.sqrt(_log_k(K) * (K * T + 2 * D))


def _thm4_bestarm(p: dict) -> float:
    K, d_star, L_best, L_total = _need("thm4-bestarm", p, "K", "d_star", "L_best", "L_total")
    c = C_DEDA * math.sqrt(_log_k(K))
    C_prime = delay_penalty(d_star) + c * c * d_star
    return 2.0 * C_prime + 4.0 * c * math.sqrt(d_star * L_best / 2.0) + 2.0 * c * math.sqrt(L_total)


def _thm4_realized(p: dict) -> float:
    K, d_star, cross = _need("thm4-realized", p, "K", "d_star", "cross")
    return delay_penalty(d_star) + C_DEDA * math.sqrt(_log_k(K) * cross)


def thm4_cross_term(losses: np.ndarray, arms: np.ndarray, delays: np.ndarray) -> float:
    """
    sum_t ( sum_{s in O_t or D_t} l_{s,A_s} l_{t,A_s} + sum_i l_{t,i} ) on the
    realized actions. Pairs (s, s + k) with k <= d_s are visited once per lag.
    """
    losses = np.asarray(losses, dtype=float)
    arms = np.asarray(arms, dtype=np.int64)
    delays = np.asarray(delays, dtype=np.int64)
    T = losses.shape[0]
    played = losses[np.arange(T), arms]
    total = float(losses.sum())
    for k in range(1, int(delays.max(initial=0)) + 1):
        early = np.flatnonzero(delays[: T - k] >= k)
        late = early + k
        # s = early is missing at round late; late is played while early is missing
        total += float(np.sum(played[early] * losses[late, arms[early]]))
        total += float(np.sum(played[late] * losses[early, arms[late]]))
    return total


_BOUNDS: Dict[str, Callable[[dict], float]] = {
    "cor1": _cor1,
    "cor2": _cor2,
    "skip-exp": _skip_exp,
    "skip-hp": _skip_hp,
    "thm4-worst": _thm4_worst,
    "thm4-bestarm": _thm4_bestarm,
    "thm1": _thm1,
    "thm2": _thm2,
    "thm4-realized": _thm4_realized,
}

BOUND_KINDS = tuple(_BOUNDS)


def bound_value(kind: str, **params) -> float:
    """
    Evaluate a named bound.

    Parameters by kind:
        cor1            K, T, D
        cor2            K, T, D, d_star, delta
        skip-exp        K, T and either (R, D_Rbar) or (skips, tilde_delay_sum)
        skip-hp         as skip-exp plus delta; the realized form also needs tilde_d_star
        thm4-worst      K, T, D, d_star
        thm4-bestarm    K, d_star, L_best, L_total
        thm1            K, etas, taus
        thm2            K, etas, taus, d_star, delta
        thm4-realized   K, d_star, cross (see thm4_cross_term)
    """
    fn = _BOUNDS.get(kind)
    if fn is None:
        raise InvalidConfigError(f"unknown bound kind {kind!r}; expected one of {', '.join(BOUND_KINDS)}")
    return float(fn(params))
