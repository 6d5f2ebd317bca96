"""
Episode driver: builds a policy from a RunConfig, plays it against a generated
instance, and turns the run into a RegretReport with every applicable bound.
"""

from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from models.config import RunConfig
from models.errors import InvalidConfigError
from models.instance import DelaySchedule, FeedbackEvent, LossMatrix
from models.report import EpisodeTrace, RegretReport, RegretSummary, RoundRecord
from services.bounds import best_skip_set, bound_value, thm4_cross_term
from services.dada import DadaPolicy, StepSchedule
from services.deda import DedaPolicy
from services.env import FeedbackQueue, delay_accounting, gen_delays, gen_losses, seed_streams
from services.skipper import SkippingDadaPolicy
from utils.output import write_trace

logger = logging.getLogger(__name__)

Policy = Union[DadaPolicy, SkippingDadaPolicy, DedaPolicy]


def build_policy(config: RunConfig) -> Policy:
    K = config.K
    if config.algo == "dada":
        return DadaPolicy(K, StepSchedule.cor1(), "iw")
    if config.algo == "dada-hp":
        return DadaPolicy(K, StepSchedule.cor2(), "ix")
    if config.algo == "dada-skip":
        return SkippingDadaPolicy(DadaPolicy(K, StepSchedule.cor1(), "iw"))
    if config.algo == "dada-hp-skip":
        return SkippingDadaPolicy(DadaPolicy(K, StepSchedule.cor2(), "ix"))
    if config.algo == "deda-known":
        return DedaPolicy(K)
    if config.algo == "deda-bound":
        return DedaPolicy(K, d_bound=config.d_bound)
    raise InvalidConfigError(f"unknown algo {config.algo!r}")


# -----------------------------------------------------------------------------
# Interaction loop
# -----------------------------------------------------------------------------
class PlayResult(NamedTuple):
    arms: np.ndarray
    etas: np.ndarray
    taus: np.ndarray          # tau_t, or tilde tau_t for skipping policies
    max_simplex_error: float  # max_t |sum_i p_t,i - 1|
    min_prob: float
    trace: Optional[EpisodeTrace]


def _step_stats(policy: Policy) -> Tuple[float, Optional[float], int, Optional[int], Optional[float]]:
    st = policy.state
    if isinstance(policy, DedaPolicy):
        # round t is already in memory; the rest are O_t
        return st.eta, st.gamma, len(st.memory) - 1, st.d_star, st.l_bck
    return st.eta, st.gamma, st.tau, None, None


def play(
    policy: Policy,
    losses: LossMatrix,
    delays: DelaySchedule,
    rng: np.random.Generator,
    record_trace: bool = False,
    algo: str = "",
) -> PlayResult:
    """
    Run the delayed-feedback protocol for T rounds: act on round t, push its
    feedback, then deliver everything due at the end of t.
    """
    T, K = losses.T, losses.K
    if delays.T != T:
        raise InvalidConfigError(f"loss matrix has {T} rounds but delay schedule has {delays.T}")
    needs_delay = isinstance(policy, DedaPolicy) and policy.d_bound is None

    queue = FeedbackQueue()
    arms = np.empty(T, dtype=np.int64)
    etas = np.empty(T)
    taus = np.empty(T, dtype=np.int64)
    simplex_error, min_prob = 0.0, 1.0
    trace = EpisodeTrace(algo=algo, K=K, T=T) if record_trace else None

    for t in range(1, T + 1):
        d_t = delays.delay(t)
        u = float(rng.random())
        if needs_delay:
            p, arm = policy.act(t, u, delay=d_t)
        else:
            p, arm = policy.act(t, u)
        eta, gamma, tau, d_star, l_bck = _step_stats(policy)
        arms[t - 1], etas[t - 1], taus[t - 1] = arm, eta, tau
        simplex_error = max(simplex_error, abs(float(p.sum()) - 1.0))
        min_prob = min(min_prob, float(p.min()))

        loss = losses.loss(t, arm)
        queue.push(FeedbackEvent(origin_round=t, arm=arm, loss=loss, delay=d_t))
        arrivals = queue.pop_due(t)
        applied = policy.receive(t, arrivals)

        if trace is not None:
            trace.rounds.append(
                RoundRecord(
                    t=t, probs=p.tolist(), arm=arm, loss=loss, delay=d_t, eta=eta, gamma=gamma, tau=tau,
                    arrivals=[ev.origin_round for ev in arrivals], d_star=d_star, l_bck=l_bck,
                )
            )
            for s, est in applied.items():
                trace.rounds[s - 1].estimate = est.value

    return PlayResult(arms, etas, taus, simplex_error, min_prob, trace)


# -----------------------------------------------------------------------------
# Episodes
# -----------------------------------------------------------------------------
def _prefix_regret(losses: LossMatrix, played: np.ndarray, upto: int) -> float:
    return float(played[:upto].sum() - losses.cumulative(upto).min())


def _bounds(config: RunConfig, policy: Policy, result: PlayResult, losses: LossMatrix,
            delays: DelaySchedule, D: int, d_star: int) -> Dict[str, float]:
    K, T, delta, algo = config.K, config.T, config.delta, config.algo
    out: Dict[str, float] = {}
    if algo in ("dada", "dada-skip"):
        out["cor1"] = bound_value("cor1", K=K, T=T, D=D)
    if algo in ("dada-hp", "dada-hp-skip"):
        out["cor2"] = bound_value("cor2", K=K, T=T, D=D, d_star=d_star, delta=delta)
    if algo == "dada":
        out["thm1"] = bound_value("thm1", K=K, etas=result.etas, taus=result.taus)
    if algo == "dada-hp":
        out["thm2"] = bound_value("thm2", K=K, etas=result.etas, taus=result.taus, d_star=d_star, delta=delta)

    if isinstance(policy, SkippingDadaPolicy):
        best = best_skip_set(delays.values, K)
        tilde = policy.controller.effective_delays(T)
        kind = "skip-exp" if algo == "dada-skip" else "skip-hp"
        out["skip"] = bound_value(kind, K=K, T=T, R=best.size, D_Rbar=best.D_Rbar, delta=delta)
        out["skip-realized"] = bound_value(
            kind, K=K, T=T, skips=len(policy.skipped), tilde_delay_sum=int(tilde.sum()),
            tilde_d_star=int(tilde.max()), delta=delta,
        )

    if isinstance(policy, DedaPolicy):
        d_run = policy.state.d_star
        arm_losses = losses.cumulative()
        out["thm4-worst"] = bound_value("thm4-worst", K=K, T=T, D=D, d_star=d_run)
        out["thm4-bestarm"] = bound_value(
            "thm4-bestarm", K=K, d_star=d_run, L_best=float(arm_losses.min()), L_total=float(arm_losses.sum())
        )
        cross = thm4_cross_term(losses.values, result.arms, delays.values)
        out["thm4-realized"] = bound_value("thm4-realized", K=K, d_star=d_run, cross=cross)
    return out


def run_episode(config: RunConfig, seed: int, record_trace: bool = False) -> Tuple[RegretReport, Optional[EpisodeTrace]]:
    """One seed of one configuration; deterministic in (config, seed)."""
    env_rng, policy_rng = seed_streams(seed)
    losses = gen_losses(config.adversary, config.T, config.K, env_rng)
    delays = gen_delays(config.delays, config.T, env_rng)
    acct = delay_accounting(delays)
    policy = build_policy(config)
    if config.algo == "deda-bound" and config.d_bound < acct.d_star:
        logger.warning("seed %d: d_bound=%d is below the realized max delay %d", seed, config.d_bound, acct.d_star)

    result = play(policy, losses, delays, policy_rng, record_trace=record_trace, algo=config.algo)
    played = losses.values[np.arange(config.T), result.arms]
    arm_losses = losses.cumulative()
    best_arm = int(np.argmin(arm_losses))
    cumulative = float(played.sum())

    report = RegretReport(
        seed=seed,
        algo=config.algo,
        K=config.K,
        T=config.T,
        cumulative_loss=cumulative,
        arm_losses=arm_losses.tolist(),
        best_arm=best_arm,
        best_loss=float(arm_losses[best_arm]),
        pseudo_regret=cumulative - float(arm_losses[best_arm]),
        D=acct.D,
        d_star=acct.d_star,
        checkpoint_regret={c: _prefix_regret(losses, played, c) for c in config.checkpoints},
        bounds=_bounds(config, policy, result, losses, delays, acct.D, acct.d_star),
    )
    if isinstance(policy, SkippingDadaPolicy):
        ctl = policy.controller
        report.tilde_D = ctl.tilde_D
        report.skips = len(ctl.skipped)
        report.discarded = ctl.discarded
        report.skip_violations = ctl.violations
    if isinstance(policy, DedaPolicy):
        report.memory_peak = policy.state.memory_peak

    logger.debug("seed %d %s: regret %.3f D=%d d*=%d", seed, config.algo, report.pseudo_regret, acct.D, acct.d_star)
    return report, result.trace


def _run_one(args: Tuple[RunConfig, int]) -> RegretReport:
    config, seed = args
    report, trace = run_episode(config, seed, record_trace=config.trace_dir is not None)
    if trace is not None:
        write_trace(trace, config.trace_dir, seed)
    return report


def run_seeds(config: RunConfig, workers: Optional[int] = None) -> List[RegretReport]:
    """Every seed of the config, in seed order; fans out to processes when workers > 1."""
    workers = workers or config.workers
    jobs = [(config, seed) for seed in config.seed_list()]
    logger.info("running %s on %d seeds (K=%d, T=%d, workers=%d)", config.algo, len(jobs), config.K, config.T, workers)
    if workers <= 1 or len(jobs) == 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


# -----------------------------------------------------------------------------
# Aggregation and sweeps
# -----------------------------------------------------------------------------
QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


def aggregate(reports: Sequence[RegretReport], delta: float = 0.05) -> RegretSummary:
    if not reports:
        raise InvalidConfigError("cannot aggregate an empty list of reports")
    regrets = np.array([r.pseudo_regret for r in reports])
    n = len(regrets)
    stderr = float(regrets.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    levels = sorted(set(QUANTILE_LEVELS) | {1.0 - delta})
    quantiles = {f"{q:g}": float(np.quantile(regrets, q)) for q in levels}

    keys = sorted({k for r in reports for k in r.bounds})
    violation, mean_bounds = {}, {}
    for key in keys:
        pairs = [(r.pseudo_regret, r.bounds[key]) for r in reports if key in r.bounds]
        violation[key] = sum(reg > b for reg, b in pairs) / len(pairs)
        mean_bounds[key] = float(np.mean([b for _, b in pairs]))

    algos = {r.algo for r in reports}
    return RegretSummary(
        algo=algos.pop() if len(algos) == 1 else "mixed",
        n=n,
        mean=float(regrets.mean()),
        stderr=stderr,
        quantiles=quantiles,
        delta=delta,
        violation_fraction=violation,
        mean_bounds=mean_bounds,
    )


def _set_path(data: dict, dotted: str, value) -> None:
    *parents, leaf = dotted.split(".")
    node = data
    for key in parents:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise InvalidConfigError(f"cannot set {dotted!r}: {key!r} is not an object")
    node[leaf] = value


def parse_value(text: str):
    """Grid and override values are JSON when they parse as JSON, plain strings otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def validate_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise InvalidConfigError(f"invalid run configuration: {e}") from e


def expand_grid(base: dict, grid: Dict[str, Sequence]) -> List[RunConfig]:
    """Cartesian product of grid values over (possibly dotted) config fields."""
    if not grid:
        return [validate_config(base)]
    fields = list(grid)
    configs = []
    for combo in itertools.product(*(grid[f] for f in fields)):
        data = json.loads(json.dumps(base, default=str))
        for field, value in zip(fields, combo):
            _set_path(data, field, value)
        configs.append(validate_config(data))
    return configs
