"""
Randomised self-checks behind the `verify` command.

Every check draws small instances from a seeded generator, exercises one part
of the library and returns a CheckResult; `run_verification` runs them all and
`raise_on_failure` turns failures into a VerificationError.
"""

from __future__ import annotations

import logging
from typing import Callable, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from models.config import RunConfig
from models.errors import BanditError, VerificationError
from models.instance import BernoulliGap, DelaySchedule, FeedbackEvent, LossMatrix, UniformDelay
from services.dada import DadaPolicy, StepSchedule
from services.deda import DedaPolicy, check_deda_trace
from services.env import (
    FeedbackQueue,
    clip_delays,
    delay_accounting,
    gen_delays,
    gen_losses,
    outstanding_sets,
)
from services.estimators import iw_estimate, ix_estimate
from services.harness import play, run_episode
from services.skipper import SkippingDadaPolicy
from services.weights import distribution
from utils.fingerprint import digests_match

logger = logging.getLogger(__name__)

TOL = 1e-12


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = Field("", description="First failure found, or a short summary on success")


def _instance(rng: np.random.Generator, T_max: int = 200, K_max: int = 5, d_max: int = 20) -> Tuple[LossMatrix, DelaySchedule]:
    T = int(rng.integers(1, T_max + 1))
    K = int(rng.integers(2, K_max + 1))
    best, other = sorted(rng.random(2))
    adversary = BernoulliGap(best_mean=best, other_mean=other, best_arm=int(rng.integers(K)))
    losses = gen_losses(adversary, T, K, rng)
    delays = gen_delays(UniformDelay(dmax=int(rng.integers(0, d_max + 1))), T, rng)
    return losses, delays


def _child(rng: np.random.Generator) -> np.random.Generator:
    return np.random.default_rng(int(rng.integers(2**32)))


# -----------------------------------------------------------------------------
# Checks
# -----------------------------------------------------------------------------
def check_estimators(rng: np.random.Generator, n: int = 1000) -> CheckResult:
    """IW is unbiased and IX is biased downward by exactly p/(p + gamma), over all K outcomes."""
    for k in range(n):
        K = int(rng.integers(2, 9))
        p = rng.dirichlet(np.ones(K))
        p = np.maximum(p, 1e-12)
        p /= p.sum()
        ell = rng.random(K)
        gamma = float(rng.uniform(1e-3, 1.0))
        iw = sum(p[a] * iw_estimate(ell[a], a, p).dense() for a in range(K))
        ix = sum(p[a] * ix_estimate(ell[a], a, p, gamma).dense() for a in range(K))
        if np.max(np.abs(iw - ell)) > TOL:
            return CheckResult(name="estimators", passed=False, detail=f"IW biased on draw {k}")
        if np.max(np.abs(ix - p * ell / (p + gamma))) > TOL:
            return CheckResult(name="estimators", passed=False, detail=f"IX mean wrong on draw {k}")
        if max(ix_estimate(ell[a], a, p, gamma).value for a in range(K)) > 1.0 / gamma:
            return CheckResult(name="estimators", passed=False, detail=f"IX exceeds 1/gamma on draw {k}")
    return CheckResult(name="estimators", passed=True, detail=f"{n} draws")


def check_env(rng: np.random.Generator, n: int = 100) -> CheckResult:
    """Clipping, tau accounting and queue delivery agree with the definitions."""
    for k in range(n):
        T = int(rng.integers(1, 201))
        raw = rng.integers(0, 3 * T, size=T)
        d = clip_delays(raw, T)
        if np.any(np.arange(1, T + 1) + d > T) or np.any(d > raw):
            return CheckResult(name="env", passed=False, detail=f"clipping broken on instance {k}")
        schedule = DelaySchedule(values=d)
        acct = delay_accounting(schedule)
        sets = outstanding_sets(schedule)
        if int(acct.tau.sum()) != acct.D or [len(o) for o in sets] != acct.tau.tolist():
            return CheckResult(name="env", passed=False, detail=f"tau accounting broken on instance {k}")

        queue = FeedbackQueue()
        delivered = {}
        for t in range(1, T + 1):
            if queue.pending_origins() != sorted(sets[t - 1]):
                return CheckResult(name="env", passed=False, detail=f"pending set differs from O_{t} on instance {k}")
            queue.push(FeedbackEvent(origin_round=t, arm=0, loss=0.0, delay=int(d[t - 1])))
            for ev in queue.pop_due(t):
                delivered[ev.origin_round] = t
        if len(queue) or any(delivered.get(s) != s + int(d[s - 1]) for s in range(1, T + 1)):
            return CheckResult(name="env", passed=False, detail=f"delivery broken on instance {k}")
    return CheckResult(name="env", passed=True, detail=f"{n} schedules")


def check_weights(rng: np.random.Generator, n: int = 200) -> CheckResult:
    for k in range(n):
        K = int(rng.integers(2, 9))
        eta = float(10.0 ** rng.uniform(-9, 1))
        # dyadic z and an integer shift keep z + c exact
        z = rng.integers(0, 2**20, size=K) / 1024.0
        c = float(rng.integers(0, 10**6))
        p = distribution(z, eta)
        if np.max(np.abs(p - distribution(z + c, eta))) > TOL:
            return CheckResult(name="weights", passed=False, detail=f"shift invariance fails on draw {k}")
        big = distribution(rng.random(K) * 1e12, eta)
        for q in (p, big):
            if not (np.all(q > 0.0) and abs(q.sum() - 1.0) <= TOL):
                return CheckResult(name="weights", passed=False, detail=f"invalid simplex on draw {k}")
    return CheckResult(name="weights", passed=True, detail=f"{n} draws")


def check_dada(rng: np.random.Generator, n: int = 100) -> CheckResult:
    """tau consistency, step-size monotonicity and simplex validity in both estimator modes."""
    for k in range(n):
        losses, delays = _instance(rng)
        schedule, mode = (StepSchedule.cor1(), "iw") if k % 2 == 0 else (StepSchedule.cor2(), "ix")
        result = play(DadaPolicy(losses.K, schedule, mode), losses, delays, _child(rng))
        if not np.array_equal(result.taus, delay_accounting(delays).tau):
            return CheckResult(name="dada", passed=False, detail=f"tau mismatch on instance {k}")
        if np.any(np.diff(result.etas) > 0.0) or result.etas.min() <= 0.0:
            return CheckResult(name="dada", passed=False, detail=f"step sizes not positive non-increasing on instance {k}")
        if result.max_simplex_error > TOL or result.min_prob <= 0.0:
            return CheckResult(name="dada", passed=False, detail=f"invalid distribution on instance {k}")
    return CheckResult(name="dada", passed=True, detail=f"{n} instances")


def check_deda(rng: np.random.Generator, n: int = 100) -> CheckResult:
    """L_bck recurrence against the direct sum, step-size control inequalities, bookkeeping identities."""
    worst = 0.0
    for k in range(n):
        losses, delays = _instance(rng)
        known = k % 2 == 0
        policy = DedaPolicy(losses.K) if known else DedaPolicy(losses.K, d_bound=delays.max_delay)
        result = play(policy, losses, delays, _child(rng), record_trace=True, algo="deda")
        check = check_deda_trace(result.trace)
        worst = max(worst, check.max_recurrence_error)
        if not check.passed():
            return CheckResult(name="deda", passed=False, detail=f"instance {k} ({policy.mode}): {check}")

        z = np.zeros(losses.K)
        for r in result.trace.rounds:
            for s in r.arrivals:
                src = result.trace.rounds[s - 1]
                z[src.arm] += src.estimate
        if not np.array_equal(z, policy.state.z):
            return CheckResult(name="deda", passed=False, detail=f"z differs from the arrived estimates on instance {k}")
        if policy.state.memory or policy.state.memory_peak > delays.max_delay + 1:
            return CheckResult(name="deda", passed=False, detail=f"memory bookkeeping broken on instance {k}")
    return CheckResult(name="deda", passed=True, detail=f"{n} instances, worst recurrence gap {worst:.2e}")


def check_skipper(rng: np.random.Generator, n: int = 100) -> CheckResult:
    """No second round crosses the threshold, D~ <= D, skipped feedback is discarded, no-skip runs match DAda."""
    for k in range(n):
        losses, delays = _instance(rng, d_max=40)
        if k % 3 == 0 and delays.T > 1:
            d = delays.values.copy()
            d[0] = delays.T - 1
            delays = DelaySchedule(values=d)
        seed = int(rng.integers(2**32))
        wrapped = SkippingDadaPolicy(DadaPolicy(losses.K, StepSchedule.cor1(), "iw"))
        skip_run = play(wrapped, losses, delays, np.random.default_rng(seed))
        ctl = wrapped.controller
        acct = delay_accounting(delays)
        if ctl.violations:
            return CheckResult(name="skipper", passed=False, detail=f"{ctl.violations} threshold violations on instance {k}")
        if ctl.tilde_D > acct.D or np.any(skip_run.taus > acct.tau):
            return CheckResult(name="skipper", passed=False, detail=f"counted statistics exceed the true ones on instance {k}")
        if ctl.discarded != len(ctl.skipped):
            return CheckResult(name="skipper", passed=False, detail=f"discarded arrivals != skipped rounds on instance {k}")
        if not ctl.skipped:
            plain = play(DadaPolicy(losses.K, StepSchedule.cor1(), "iw"), losses, delays, np.random.default_rng(seed))
            if not (np.array_equal(plain.arms, skip_run.arms) and np.array_equal(plain.etas, skip_run.etas)):
                return CheckResult(name="skipper", passed=False, detail=f"no-skip run diverges from DAda on instance {k}")
    return CheckResult(name="skipper", passed=True, detail=f"{n} instances")


def check_determinism(rng: np.random.Generator, n: int = 3) -> CheckResult:
    algos = ("dada", "dada-hp-skip", "deda-known")
    for k in range(n):
        config = RunConfig(
            algo=algos[k % len(algos)],
            adversary={"kind": "bernoulli_gap", "best_mean": 0.3, "other_mean": 0.5},
            delays={"kind": "geometric", "mean": 3.0},
            K=4,
            T=300,
        )
        seed = int(rng.integers(2**31))
        first, _ = run_episode(config, seed)
        second, _ = run_episode(config, seed)
        if not digests_match(first, second):
            return CheckResult(name="determinism", passed=False, detail=f"{config.algo} seed {seed} is not reproducible")
    return CheckResult(name="determinism", passed=True, detail=f"{n} configs")


# (name, check, whether it takes the instance count)
CHECKS: Sequence[Tuple[str, Callable[..., CheckResult], bool]] = (
    ("estimators", check_estimators, False),
    ("env", check_env, True),
    ("weights", check_weights, False),
    ("dada", check_dada, True),
    ("deda", check_deda, True),
    ("skipper", check_skipper, True),
    ("determinism", check_determinism, False),
)


def run_verification(instances: int = 100, seed: int = 0) -> List[CheckResult]:
    """Run every check; instance-based checks use `instances` random instances each."""
    rng = np.random.default_rng(seed)
    results = []
    for name, check, scaled in CHECKS:
        child = _child(rng)
        try:
            result = check(child, instances) if scaled else check(child)
        except (BanditError, ValueError) as e:
            result = CheckResult(name=name, passed=False, detail=f"raised {type(e).__name__}: {e}")
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, "check %-12s %s  %s", name, "ok" if result.passed else "FAILED", result.detail)
        results.append(result)
    return results


def raise_on_failure(results: Sequence[CheckResult]) -> None:
    failed = [r for r in results if not r.passed]
    if failed:
        raise VerificationError("; ".join(f"{r.name}: {r.detail}" for r in failed))


def verify_config(config: RunConfig) -> List[CheckResult]:
    """
    Checks on a user-supplied configuration: every seed must reproduce its
    report digest, and DeDa runs must also pass the trace oracles.
    """
    results = []
    deda = config.algo.startswith("deda")
    for seed in config.seed_list():
        first, trace = run_episode(config, seed, record_trace=deda)
        second, _ = run_episode(config, seed)
        same = digests_match(first, second)
        results.append(CheckResult(name=f"determinism[seed={seed}]", passed=same,
                                   detail="" if same else "report digests differ"))
        if deda:
            check = check_deda_trace(trace)
            results.append(CheckResult(name=f"deda-oracle[seed={seed}]", passed=check.passed(), detail=str(check)))
    return results
