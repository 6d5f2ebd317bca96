import math

import numpy as np
import pytest

from models.errors import ProtocolError
from models.instance import DelaySchedule, FeedbackEvent, LossMatrix
from services.dada import DadaPolicy, StepSchedule
from services.env import delay_accounting
from services.harness import play
from services.skipper import SkipController, SkippingDadaPolicy
from services.verification import check_skipper


def bernoulli_losses(T, K, seed=0):
    rng = np.random.default_rng(seed)
    means = np.full(K, 0.5)
    means[0] = 0.3
    return LossMatrix(values=(rng.random((T, K)) < means).astype(float))


def one_huge(T):
    d = np.zeros(T, dtype=int)
    d[0] = T - 1
    return DelaySchedule.of(d)


class TestController:
    @pytest.mark.parametrize("age,skips", [(7, True), (6, False)])
    def test_threshold(self, age, skips):
        ctl = SkipController(8)
        ctl.counted_outstanding = {1: None}
        ctl.tilde_D = 100
        ctl.t = 1 + age
        assert ctl.threshold() == pytest.approx(math.sqrt(100 / math.log(8)))
        _, skipped = ctl.end_round(1 + age, [])
        assert (skipped == 1) is skips

    def test_counts_rounds_before_t(self):
        ctl = SkipController(2)
        assert ctl.begin_round(1) == (0, 0)
        ctl.end_round(1, [])
        assert ctl.begin_round(2) == (1, 1)

    def test_discarded_feedback(self):
        ctl = SkipController(10)
        ctl.begin_round(1)
        ctl.end_round(1, [])
        ctl.begin_round(2)
        kept, skipped = ctl.end_round(2, [FeedbackEvent(origin_round=2, arm=0, loss=1.0, delay=0)])
        assert skipped == 1 and len(kept) == 1
        ctl.begin_round(3)
        kept, _ = ctl.end_round(3, [FeedbackEvent(origin_round=1, arm=0, loss=1.0, delay=2)])
        assert kept == [] and ctl.discarded == 1
        assert ctl.effective_delays(3).tolist() == [1, 0, 0]

    def test_protocol(self):
        ctl = SkipController(3)
        with pytest.raises(ProtocolError):
            ctl.begin_round(2)
        ctl.begin_round(1)
        with pytest.raises(ProtocolError):
            ctl.end_round(1, [FeedbackEvent(origin_round=5, arm=0, loss=0.0, delay=0)])


class TestSkippingPolicy:
    def test_one_huge_delay(self):
        T, K = 1000, 10
        policy = SkippingDadaPolicy(DadaPolicy(K, StepSchedule.cor1()))
        play(policy, bernoulli_losses(T, K), one_huge(T), np.random.default_rng(0))
        assert policy.skipped == {1}
        assert policy.controller.discarded == 1
        assert policy.controller.violations == 0
        assert policy.controller.effective_delays(T).sum() == 1
        assert policy.tilde_D < delay_accounting(one_huge(T)).D

    def test_skipped_round_never_reaches_z(self):
        T, K = 200, 10
        policy = SkippingDadaPolicy(DadaPolicy(K, StepSchedule.cor1()))
        result = play(policy, bernoulli_losses(T, K, 1), one_huge(T), np.random.default_rng(1), record_trace=True)
        assert result.trace.rounds[0].estimate is None
        applied = sum(r.estimate for r in result.trace.rounds[1:])
        assert float(policy.state.z.sum()) == pytest.approx(applied, rel=1e-12)

    def test_no_skips_matches_dada(self):
        T, K = 300, 2
        losses = bernoulli_losses(T, K, 2)
        delays = DelaySchedule.of(np.minimum(2, T - np.arange(1, T + 1)))
        skipping = SkippingDadaPolicy(DadaPolicy(K, StepSchedule.cor1()))
        a = play(skipping, losses, delays, np.random.default_rng(5), record_trace=True)
        b = play(DadaPolicy(K, StepSchedule.cor1()), losses, delays, np.random.default_rng(5), record_trace=True)
        assert not skipping.skipped
        assert np.array_equal(a.arms, b.arms)
        assert np.array_equal(a.taus, b.taus)
        assert [r.probs for r in a.trace.rounds] == [r.probs for r in b.trace.rounds]

    def test_skips_with_many_arms(self):
        # log 10 > 1, so a two-round wait already exceeds sqrt(D~ / log K) early on
        T, K = 50, 10
        delays = DelaySchedule.of(np.minimum(2, T - np.arange(1, T + 1)))
        policy = SkippingDadaPolicy(DadaPolicy(K, StepSchedule.cor1()))
        play(policy, bernoulli_losses(T, K), delays, np.random.default_rng(0))
        assert 1 in policy.skipped
        assert policy.tilde_D <= delay_accounting(delays).D

    def test_ix_variant(self, small_instance):
        losses, delays = small_instance
        policy = SkippingDadaPolicy(DadaPolicy(losses.K, StepSchedule.cor2(), "ix"))
        result = play(policy, losses, delays, np.random.default_rng(3))
        assert np.all(result.taus <= delay_accounting(delays).tau)
        assert policy.controller.discarded == len(policy.skipped)


def test_random_instances(rng):
    assert check_skipper(rng, 30).passed
