from dataclasses import dataclass

from sdot.core.exceptions import SdotError


@dataclass
class RunningEstimators:
    """
    Recursive estimators fed with h_k = h_eps(X_k, V_{k-1}).

    W_n = -(1/n) sum h_k and sigma2_n = (1/n) sum h_k^2 - W_n^2, the latter kept
    through Welford's centered sum of squares `m2`.
    """

    n: int = 0
    mean_h: float = 0.0
    m2: float = 0.0

    @property
    def w_hat(self) -> float:
        return -self.mean_h


def update_w_hat(est: RunningEstimators, h_value: float) -> RunningEstimators:
    est.n += 1
    delta = h_value - est.mean_h
    est.mean_h += delta / est.n
    est.m2 += delta * (h_value - est.mean_h)
    return est


def sigma2_hat(est: RunningEstimators) -> float:
    if est.n < 1:
        raise SdotError("sigma2_hat needs at least one observation")
    return max(est.m2 / est.n, 0.0)
