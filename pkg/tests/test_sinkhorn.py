import numpy as np
import pytest

from sdot.schemas.measure import DiscreteEmpirical, TargetMeasure
from sdot.services.objective import cost_matrix, exact_objective
from sdot.services.sinkhorn import marginal_residual, primal_value, sinkhorn_solve

from tests.conftest import make_instance


class TestSinkhornSolve:
    def test_single_atoms_closed_form(self):
        source = DiscreteEmpirical(points=[[0.0, 0.0]])
        target = TargetMeasure(points=[[1.0, 2.0]])
        result = sinkhorn_solve(source, target, 0.3)
        assert abs(result.W_eps - (5.0 - 0.3)) <= 1e-12
        np.testing.assert_array_equal(result.v_star, [0.0])

    @pytest.mark.parametrize("eps", [1.0, 0.1])
    def test_primal_matches_dual(self, eps):
        source, target = make_instance(30, 6, seed=21)
        costs = cost_matrix(source.points, target)
        result = sinkhorn_solve(source, target, eps, costs=costs)
        assert result.converged
        assert result.residual <= 1e-9
        primal = primal_value(result.coupling, costs, source.weights, target.weights, eps)
        assert primal == pytest.approx(result.W_eps, abs=1e-6)
        assert result.W_eps >= -eps

    def test_dual_value_is_minus_objective(self):
        source, target = make_instance(10, 3, seed=2)
        result = sinkhorn_solve(source, target, 0.2)
        assert result.W_eps == pytest.approx(-exact_objective(source, target, result.v_star, 0.2).value, abs=1e-14)
        assert abs(result.v_star.sum()) <= 1e-12

    def test_identical_supports(self):
        points = [[0.0], [1.0]]
        source = DiscreteEmpirical(points=points)
        target = TargetMeasure(points=points)
        result = sinkhorn_solve(source, target, 0.05)
        assert -0.05 <= result.W_eps <= 0.0

    def test_budget_exhaustion_is_flagged(self):
        source, target = make_instance(30, 6, seed=21)
        result = sinkhorn_solve(source, target, 0.01, tol=1e-15, max_iter=2)
        assert not result.converged
        assert result.iterations == 2
        assert result.residual > 1e-15

    def test_trace_records_every_sweep(self):
        source, target = make_instance(15, 4, seed=4)
        result = sinkhorn_solve(source, target, 0.1, trace=True)
        assert len(result.trace) == result.iterations == len(result.residuals)
        assert result.trace[-1].residual == result.residual
        assert result.residuals[-1] < result.residuals[0]
        np.testing.assert_allclose(result.trace[-1].v, result.v_star)

    @pytest.mark.parametrize("seed", [4, 9, 21])
    def test_residual_never_increases(self, seed):
        source, target = make_instance(30, 6, seed=seed)
        result = sinkhorn_solve(source, target, 0.05, trace=True)
        assert np.all(np.diff(result.residuals) <= 1e-12)


class TestMarginalResidual:
    def test_product_coupling(self):
        mu, nu = np.array([0.3, 0.7]), np.array([0.2, 0.5, 0.3])
        assert marginal_residual(np.outer(mu, nu), mu, nu) == pytest.approx(0.0, abs=1e-16)

    def test_doubled_coupling(self):
        mu, nu = np.array([0.3, 0.7]), np.array([0.2, 0.5, 0.3])
        assert marginal_residual(2.0 * np.outer(mu, nu), mu, nu) == pytest.approx(1.0)
