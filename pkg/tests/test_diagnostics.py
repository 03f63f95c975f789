import json

import numpy as np
import pytest

from sdot.schemas.experiment import CheckSpec
from sdot.schemas.report import CheckStatus
from sdot.services.diagnostics import (
    asymptotic_covariances,
    covariance_checks,
    finite_difference_oracle,
    g_identity_check,
    g_matrix,
    hessian_bound_checks,
    keystone_applicable,
    keystone_check,
    kl_check,
    kl_constant,
    normality_stats,
    random_points,
    run_diagnostics,
    self_concordance_checks,
    sgd_stability_check,
)
from sdot.services.linalg import centering_matrix, lambda_min_perp, pinv_psd
from sdot.services.objective import project_zero_mean
from sdot.services.truth import GroundTruth, ground_truth

from tests.conftest import make_instance


@pytest.fixture(scope="module")
def cube():
    """Source in R^3 so that G* has full rank on the complement of 1."""
    return make_instance(40, 4, dim=3, seed=17)


@pytest.fixture(scope="module")
def cube_truth(cube):
    source, target = cube
    return ground_truth(source, target, 0.5)


def statuses(results):
    return {result.name: result.status for result in results}


class TestLimitMatrices:
    def test_g_matrix_at_optimum_matches_truth(self, cube, cube_truth):
        source, target = cube
        G = g_matrix(cube_truth.v_star, source, target, 0.5)
        np.testing.assert_allclose(G, cube_truth.G_star, atol=1e-12)

    def test_g_matrix_rows_sum_to_zero(self, cube):
        source, target = cube
        G = g_matrix(np.array([0.3, -0.1, 0.0, -0.2]), source, target, 0.5)
        np.testing.assert_allclose(G, G.T, atol=1e-14)
        np.testing.assert_allclose(G.sum(axis=1), 0.0, atol=1e-12)

    def test_g_identity(self, cube, cube_truth):
        _, target = cube
        assert g_identity_check(cube_truth, target.weights).status == CheckStatus.PASS

    def test_hessian_lambda_max(self, cube, cube_truth):
        _, target = cube
        results = statuses(hessian_bound_checks(cube_truth, target.weights))
        assert results["hessian_lambda_max"] == CheckStatus.PASS

    def test_hessian_floor_is_advisory(self, cube, cube_truth):
        _, target = cube
        floor = [r for r in hessian_bound_checks(cube_truth, target.weights) if r.name == "hessian_floor"][0]
        assert not floor.required

    @pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
    def test_keystone_under_uniform_weights(self, cube, eps):
        source, target = cube
        truth = ground_truth(source, target, eps)
        results = keystone_check(truth.G_star, truth.H_star, target.weights, eps)
        assert [r.status for r in results] == [CheckStatus.PASS, CheckStatus.PASS]
        assert lambda_min_perp(truth.H_star - truth.G_star) >= -1e-9

    def test_keystone_not_applicable(self):
        nu = np.array([0.9, 0.1])
        assert not keystone_applicable(nu, 0.2)
        results = keystone_check(np.eye(2), np.eye(2), nu, 0.2)
        assert all(r.status == CheckStatus.NOT_APPLICABLE for r in results)

    def test_keystone_single_atom_is_vacuous(self):
        results = keystone_check(np.zeros((1, 1)), np.zeros((1, 1)), np.ones(1), 0.1)
        assert all(r.status == CheckStatus.PASS for r in results)


class TestAsymptoticCovariances:
    def test_lyapunov_identity(self, cube_truth):
        assert statuses(covariance_checks(cube_truth))["lyapunov_identity"] == CheckStatus.PASS

    def test_newton_covariance_is_smaller(self, cube_truth):
        covariances = asymptotic_covariances(cube_truth.G_star, cube_truth.H_star)
        assert covariances.gamma_lambda_min > 0.5
        assert covariances.ordering_gap >= -1e-8

    def test_hessian_equal_to_covariance(self):
        projector = centering_matrix(3)
        g = projector @ np.diag([1.0, 2.0, 3.0]) @ projector
        covariances = asymptotic_covariances(g, g)
        np.testing.assert_allclose(covariances.gamma, projector, atol=1e-10)
        np.testing.assert_allclose(covariances.sigma_v, pinv_psd(g), atol=1e-10)
        assert covariances.lyapunov_residual <= 1e-8

    def test_rank_deficient_covariance_is_not_applicable(self):
        projector = centering_matrix(3)
        g = np.outer(projector[0], projector[0])
        result = statuses(covariance_checks_from(g))
        assert result["lyapunov_identity"] == CheckStatus.NOT_APPLICABLE

    def test_sgd_stability_is_advisory(self, cube_truth):
        result = sgd_stability_check(cube_truth.H_star, 1.0)
        assert not result.required


def covariance_checks_from(g):
    zeros = np.zeros(g.shape[0])
    truth = GroundTruth(W_eps=0.0, v_star=zeros, G_star=g, H_star=g, eps=1.0, sigma2_eps=0.0, residual=0.0, converged=True)
    return covariance_checks(truth)


class TestPointChecks:
    def test_all_hold_at_minimizer(self, cube, cube_truth):
        source, target = cube
        results = self_concordance_checks(cube_truth.v_star, cube_truth, source, target, 0.5)
        assert all(r.status == CheckStatus.PASS for r in results)

    def test_hold_around_minimizer(self, desk, desk_truth):
        source, target = desk
        for v in random_points(desk_truth.v_star, 100, 1.0, seed=3):
            results = self_concordance_checks(v, desk_truth, source, target, 1.0)
            failed = [r.name for r in results if r.status == CheckStatus.FAIL]
            assert not failed

    def test_random_points_radius(self):
        v_star = project_zero_mean(np.arange(5.0))
        points = random_points(v_star, 50, 0.7, seed=1)
        distances = np.linalg.norm(points - v_star, axis=1)
        assert distances.max() <= 0.7 + 1e-12
        np.testing.assert_allclose(points.sum(axis=1), v_star.sum(), atol=1e-12)


class TestKlCheck:
    def test_skipped_at_minimizer(self, cube, cube_truth):
        source, target = cube
        assert kl_check(cube_truth.v_star, cube_truth, source, target, 0.5).status == CheckStatus.SKIPPED

    @pytest.mark.parametrize("radius", [1e-3, 10.0])
    def test_holds_near_and_far(self, cube, cube_truth, radius):
        source, target = cube
        direction = project_zero_mean(np.array([1.0, -2.0, 0.5, 0.5]))
        v = cube_truth.v_star + radius * direction / np.linalg.norm(direction)
        assert kl_check(v, cube_truth, source, target, 0.5).status == CheckStatus.PASS

    def test_constant(self):
        g = centering_matrix(3) * 0.2
        assert kl_constant(g, 2.0) == pytest.approx(2.0 * 0.2 * 0.5)


class TestNormalityStats:
    def test_all_equal(self):
        assert normality_stats([0.3] * 40).std == 0.0

    def test_standard_normal(self):
        values = np.random.default_rng(42).standard_normal(10000)
        summary = normality_stats(values)
        assert abs(summary.mean) <= 0.05
        assert abs(summary.std - 1.0) <= 0.05
        assert summary.ks_statistic < 0.03
        assert sum(summary.counts) == 10000

    def test_shift(self):
        values = np.random.default_rng(42).standard_normal(100)
        assert normality_stats(values + 1.0).mean == pytest.approx(normality_stats(values).mean + 1.0, abs=1e-12)


class TestFiniteDifference:
    def test_quadratic(self):
        rng = np.random.default_rng(42)
        root = rng.standard_normal((4, 4))
        a, b = root @ root.T, rng.standard_normal(4)
        v = rng.standard_normal(4)
        oracle = finite_difference_oracle(lambda x: 0.5 * x @ a @ x + b @ x, v, 1e-3, grad=lambda x: a @ x + b)
        projector = centering_matrix(4)
        np.testing.assert_allclose(oracle.gradient, projector @ (a @ v + b), atol=1e-10)
        np.testing.assert_allclose(oracle.hessian, projector @ a @ projector, atol=1e-10)

    def test_linear_function_has_no_curvature(self):
        b = np.array([1.0, -3.0, 2.0])
        oracle = finite_difference_oracle(lambda x: b @ x, np.zeros(3), 1e-2)
        np.testing.assert_allclose(oracle.hessian, 0.0, atol=1e-8)

    def test_step_must_be_positive(self):
        with pytest.raises(ValueError):
            finite_difference_oracle(lambda x: 0.0, np.zeros(2), 0.0)


class TestRunDiagnostics:
    def test_uniform_desk_instance_passes(self, cube, cube_truth):
        source, target = cube
        report = run_diagnostics(source, target, cube_truth, CheckSpec(points=20))
        assert report.ok, [r.name for r in report.failed]
        names = {r.name for r in report.checks}
        assert {"keystone_order", "gamma_floor", "lyapunov_identity", "strong_convexity", "kl_inequality"} <= names
        json.dumps(report.model_dump(mode="json"))
