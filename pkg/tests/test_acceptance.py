"""Desk-scale Monte-Carlo runs checking convergence rates; enabled with --runslow."""
import numpy as np
import pytest

from sdot.services.experiment import monte_carlo, parse_config

THREADS = 4


def mixture_payload(size, targets, eps, algorithms, n_max, replications, snapshots, seed=1):
    return {
        "schema_version": 1,
        "name": "acceptance",
        "source": {
            "kind": "sampled",
            "base": {
                "kind": "gaussian_mixture",
                "weights": [0.5, 0.5],
                "means": [[0.3, 0.3], [0.7, 0.7]],
                "stds": [0.15, 0.15],
            },
            "size": size,
            "seed": 7,
        },
        "target": {"size": targets, "dim": 2, "seed": 8},
        "eps": [eps],
        "algorithms": algorithms,
        "n_max": n_max,
        "replications": replications,
        "snapshots": snapshots,
        "seed": seed,
        "record_wall_time": False,
    }


def final_means(result, column, algorithm="sgn"):
    table = result.aggregate[result.aggregate["algorithm"] == algorithm].set_index("n")
    return table[column]


@pytest.mark.slow
def test_sgn_potential_error_rate():
    sgn = {"algorithm": "sgn", "alpha": 0.0, "gamma": 1e-3, "beta": 0.49}
    config = parse_config(mixture_payload(1000, 20, 0.1, [sgn], 100000, 20, [10000, 100000]))
    errors = final_means(monte_carlo(config, threads=THREADS), "v_err_sq_mean")
    assert errors[100000] <= 0.2 * errors[10000]


@pytest.mark.slow
def test_w_hat_error_decays_like_inverse_square_root():
    config = parse_config(mixture_payload(1000, 20, 0.1, [{"algorithm": "sgn"}], 100000, 50, [1000, 10000, 100000]))
    errors = final_means(monte_carlo(config, threads=THREADS), "w_abs_err_mean")
    for earlier, later in ((1000, 10000), (10000, 100000)):
        assert 0.2 <= errors[later] / errors[earlier] <= 0.55


@pytest.mark.slow
def test_preconditioner_converges_to_gradient_covariance():
    config = parse_config(mixture_payload(1000, 20, 0.1, [{"algorithm": "sgn"}], 100000, 5, [10000, 100000]))
    errors = final_means(monte_carlo(config, threads=THREADS), "sbar_err_fro_mean")
    assert errors[100000] <= 0.5 * errors[10000]


@pytest.mark.slow
def test_standardized_w_hat_is_roughly_normal():
    config = parse_config(mixture_payload(200, 10, 0.1, [{"algorithm": "sgn"}], 100000, 200, [100000]))
    result = monte_carlo(config, threads=THREADS)
    final = result.runs[result.runs["n"] == 100000]
    w_tilde = np.sqrt(100000) * (final["w_hat"] - result.truth.W_eps) / np.sqrt(final["sigma2_hat"])
    assert abs(w_tilde.mean()) <= 0.3
    assert 0.7 <= w_tilde.std(ddof=1) <= 1.3


@pytest.mark.slow
def test_sgn_beats_sgd_at_small_eps():
    algorithms = [{"algorithm": "sgd"}, {"algorithm": "sgn"}]
    config = parse_config(mixture_payload(1000, 20, 0.01, algorithms, 100000, 20, [100000]))
    result = monte_carlo(config, threads=THREADS)
    sgd = final_means(result, "v_err_sq_mean", "sgd")[100000]
    sgn = final_means(result, "v_err_sq_mean", "sgn")[100000]
    assert sgn < sgd
