import logging

import pytest

from models.config import ALGOS, RunConfig
from models.errors import InvalidConfigError
from services.env import delay_accounting, gen_delays, gen_losses, seed_streams
from services.harness import aggregate, build_policy, expand_grid, run_episode, run_seeds, validate_config
from utils.fingerprint import digests_match

BERNOULLI = {"kind": "bernoulli_gap", "best_mean": 0.3, "other_mean": 0.5}


def make_config(algo="dada", **overrides) -> RunConfig:
    data = {
        "algo": algo,
        "adversary": BERNOULLI,
        "delays": {"kind": "uniform", "dmax": 8},
        "K": 4,
        "T": 200,
    }
    if algo == "deda-bound":
        data["d_bound"] = 8
    data.update(overrides)
    return RunConfig.model_validate(data)


class TestRunEpisode:
    @pytest.mark.parametrize("algo", ALGOS)
    def test_identical_arms_have_no_regret(self, algo):
        config = make_config(algo, adversary={"kind": "constant", "c": 0.0})
        for seed in range(3):
            report, _ = run_episode(config, seed)
            assert report.pseudo_regret == 0.0

    @pytest.mark.parametrize("algo", ALGOS)
    def test_single_round(self, algo):
        config = make_config(algo, K=2, T=1, delays={"kind": "constant", "d": 5})
        report, _ = run_episode(config, 7)
        assert 0.0 <= report.pseudo_regret <= 1.0
        assert report.D == 0 and report.d_star == 0

    @pytest.mark.parametrize("algo", ALGOS)
    def test_deterministic(self, algo):
        config = make_config(algo)
        first, _ = run_episode(config, 11)
        second, _ = run_episode(config, 11)
        assert digests_match(first, second)
        other, _ = run_episode(config, 12)
        assert not digests_match(first, other)

    @pytest.mark.parametrize("algo", ALGOS)
    def test_regret_from_trace(self, algo):
        config = make_config(algo)
        report, trace = run_episode(config, 3, record_trace=True)
        env_rng, _ = seed_streams(3)
        losses = gen_losses(config.adversary, config.T, config.K, env_rng)
        delays = gen_delays(config.delays, config.T, env_rng)

        played = sum(r.loss for r in trace.rounds)
        assert report.cumulative_loss == played
        assert report.pseudo_regret == played - losses.cumulative().min()
        assert report.D == delay_accounting(delays).D
        assert [r.delay for r in trace.rounds] == delays.values.tolist()
        for r in trace.rounds:
            assert abs(sum(r.probs) - 1.0) <= 1e-12 and min(r.probs) > 0.0

    def test_tau_sums_to_total_delay(self):
        report, trace = run_episode(make_config("dada"), 0, record_trace=True)
        assert sum(r.tau for r in trace.rounds) == report.D

    @pytest.mark.parametrize("algo", ["dada-skip", "dada-hp-skip"])
    def test_skip_fields(self, algo):
        report, _ = run_episode(make_config(algo, K=10, T=300, delays={"kind": "one_huge"}), 0)
        assert report.skips == 1
        assert report.discarded == report.skips
        assert report.skip_violations == 0
        assert report.tilde_D <= report.D

    def test_checkpoints(self):
        config = make_config("dada", checkpoints=[50, 200])
        report, _ = run_episode(config, 0)
        assert set(report.checkpoint_regret) == {50, 200}
        assert report.checkpoint_regret[200] == pytest.approx(report.pseudo_regret)

    @pytest.mark.parametrize(
        "algo,keys",
        [
            ("dada", {"cor1", "thm1"}),
            ("dada-hp", {"cor2", "thm2"}),
            ("dada-skip", {"cor1", "skip", "skip-realized"}),
            ("dada-hp-skip", {"cor2", "skip", "skip-realized"}),
            ("deda-known", {"thm4-worst", "thm4-bestarm", "thm4-realized"}),
            ("deda-bound", {"thm4-worst", "thm4-bestarm", "thm4-realized"}),
        ],
    )
    def test_bound_keys(self, algo, keys):
        report, _ = run_episode(make_config(algo), 0)
        assert set(report.bounds) == keys
        assert all(v > 0 for v in report.bounds.values())

    def test_deda_memory_peak(self):
        report, _ = run_episode(make_config("deda-known"), 0)
        assert 1 <= report.memory_peak <= report.d_star + 1

    def test_low_prior_bound_warns(self, caplog):
        config = make_config("deda-bound", d_bound=0)
        with caplog.at_level(logging.WARNING, logger="services.harness"):
            run_episode(config, 0)
        assert "below the realized max delay" in caplog.text

    def test_build_policy(self):
        assert build_policy(make_config("deda-bound")).d_bound == 8
        assert build_policy(make_config("dada-hp")).estimator == "ix"


class TestRunSeeds:
    def test_seed_order(self):
        config = make_config("dada", seeds={"count": 3, "base": 5}, T=50)
        assert [r.seed for r in run_seeds(config)] == [5, 6, 7]

    def test_explicit_seed_list(self):
        config = make_config("dada", seeds=[9, 2], T=50)
        assert [r.seed for r in run_seeds(config)] == [9, 2]

    def test_workers_do_not_change_results(self):
        config = make_config("dada-hp", seeds={"count": 4}, T=80)
        serial = run_seeds(config, workers=1)
        parallel = run_seeds(config, workers=2)
        assert len(serial) == len(parallel)
        assert all(digests_match(a, b) for a, b in zip(serial, parallel))

    def test_trace_files(self, tmp_path):
        config = make_config("deda-known", seeds={"count": 2}, T=30, trace_dir=tmp_path)
        run_seeds(config)
        assert sorted(p.name for p in tmp_path.iterdir()) == ["deda-known_seed0.csv", "deda-known_seed1.csv"]


class TestAggregate:
    def test_single_report(self):
        report, _ = run_episode(make_config("dada", T=50), 0)
        summary = aggregate([report])
        assert summary.mean == report.pseudo_regret
        assert summary.stderr == 0.0
        assert set(summary.quantiles.values()) == {report.pseudo_regret}
        assert "0.95" in summary.quantiles

    def test_identical_reports(self):
        report, _ = run_episode(make_config("dada", T=50), 0)
        summary = aggregate([report] * 5)
        assert summary.stderr == 0.0
        assert summary.n == 5

    def test_violation_fraction(self):
        report, _ = run_episode(make_config("dada", T=50), 0)
        low = report.model_copy(update={"bounds": {"cor1": report.pseudo_regret - 1.0}})
        high = report.model_copy(update={"bounds": {"cor1": report.pseudo_regret + 1.0}})
        summary = aggregate([low, high, high, high], delta=0.1)
        assert summary.violation_fraction["cor1"] == 0.25
        assert "0.9" in summary.quantiles

    def test_mixed_algorithms(self):
        a, _ = run_episode(make_config("dada", T=50), 0)
        b, _ = run_episode(make_config("deda-known", T=50), 0)
        assert aggregate([a, b]).algo == "mixed"

    def test_empty(self):
        with pytest.raises(InvalidConfigError):
            aggregate([])


class TestConfig:
    def test_deda_bound_needs_d_bound(self):
        with pytest.raises(InvalidConfigError):
            validate_config({"algo": "deda-bound", "adversary": BERNOULLI, "delays": {"kind": "constant", "d": 1},
                             "K": 3, "T": 10})

    @pytest.mark.parametrize(
        "override",
        [{"K": 1}, {"T": 0}, {"checkpoints": [500]}, {"delta": 1.0}, {"seeds": []},
         {"adversary": {"kind": "bernoulli_gap", "best_mean": 0.3, "other_mean": 0.5, "best_arm": 9}},
         {"adversary": {"kind": "bernoulli_gap", "best_mean": 1.3, "other_mean": 0.5}},
         {"delays": {"kind": "sometimes"}}, {"algo": "exp4"}, {"workers": 0}],
    )
    def test_rejected(self, override):
        data = {"algo": "dada", "adversary": BERNOULLI, "delays": {"kind": "constant", "d": 1}, "K": 3, "T": 10}
        data.update(override)
        with pytest.raises(InvalidConfigError):
            validate_config(data)

    def test_json_alias(self, tmp_path):
        config = make_config("dada", json=str(tmp_path / "out.json"))
        assert config.json_path == tmp_path / "out.json"


class TestGrid:
    def test_empty_grid(self):
        base = make_config("dada").model_dump(mode="json", by_alias=True)
        assert len(expand_grid(base, {})) == 1

    def test_cartesian_product_with_dotted_fields(self):
        base = make_config("dada", delays={"kind": "constant", "d": 1}).model_dump(mode="json", by_alias=True)
        configs = expand_grid(base, {"algo": ["dada", "deda-known"], "delays.d": [0, 5, 10]})
        assert len(configs) == 6
        assert {(c.algo, c.delays.d) for c in configs} == {
            (a, d) for a in ("dada", "deda-known") for d in (0, 5, 10)
        }

    def test_bad_grid_value(self):
        base = make_config("dada").model_dump(mode="json", by_alias=True)
        with pytest.raises(InvalidConfigError):
            expand_grid(base, {"K": [1]})
