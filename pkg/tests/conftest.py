import os

import hypothesis
import numpy as np
import pytest

from models.instance import DelaySchedule, LossMatrix

np.seterr(all="warn")

hypothesis.settings.register_profile("ci", deadline=None, max_examples=100)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=5)
hypothesis.settings.register_profile("debugger", deadline=None, report_multiple_bugs=False)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_instance(rng):
    """K=3, T=40 Bernoulli losses with delays uniform on {0..6}, clipped at the horizon."""
    T, K = 40, 3
    values = (rng.random((T, K)) < np.array([0.2, 0.5, 0.6])).astype(float)
    raw = rng.integers(0, 7, size=T)
    delays = np.minimum(raw, T - np.arange(1, T + 1))
    return LossMatrix(values=values), DelaySchedule(values=delays)
