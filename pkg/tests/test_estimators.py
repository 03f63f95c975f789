import numpy as np
import pytest

from sdot.core.exceptions import SdotError
from sdot.services.estimators import RunningEstimators, sigma2_hat, update_w_hat


def feed(values):
    est = RunningEstimators()
    for value in values:
        update_w_hat(est, float(value))
    return est


class TestWHat:
    def test_first_update(self):
        assert feed([3.0]).w_hat == -3.0

    def test_matches_batch_mean(self):
        values = np.random.default_rng(42).normal(2.0, 0.5, size=100)
        assert abs(feed(values).w_hat + values.mean()) <= 1e-12


class TestSigma2Hat:
    def test_constant_stream(self):
        assert sigma2_hat(feed([1.7] * 50)) == 0.0

    def test_alternating_signs(self):
        assert sigma2_hat(feed([-1.0, 1.0] * 10)) == pytest.approx(1.0, abs=1e-15)

    def test_matches_two_pass_variance(self):
        values = np.random.default_rng(42).normal(-0.3, 2.0, size=5000)
        assert abs(sigma2_hat(feed(values)) - np.var(values)) <= 1e-10

    def test_empty_stream(self):
        with pytest.raises(SdotError):
            sigma2_hat(RunningEstimators())
