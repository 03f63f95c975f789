"""
Semi-dual objective of entropic semi-discrete transport.

For a sample x with cost row c_x and a dual potential v in R^J,

    h_eps(x, v) = eps + eps * log sum_j nu_j exp((v_j - c_x[j]) / eps) - <v, nu>

and H_eps(v) = E[h_eps(X, v)]. Every exponential goes through a max-shifted
log-sum-exp so that costs up to 1e6 * eps stay finite.
"""
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from sdot.core.exceptions import CostError, DimensionMismatchError
from sdot.schemas.measure import DiscreteEmpirical, TargetMeasure
from sdot.schemas.solver import CostKind

# (points of shape (n, d), target points of shape (J, d)) -> costs of shape (n, J)
CostFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ObjectiveValue(NamedTuple):
    value: float
    gradient: np.ndarray
    hessian: Optional[np.ndarray]


class SampleTerms(NamedTuple):
    h: np.ndarray
    pi: np.ndarray


def _check_costs(costs: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(costs)):
        raise CostError("cost values must be finite")
    if np.any(costs < 0):
        raise CostError("cost values must be non-negative", {"min": float(costs.min())})
    return costs


def cost_matrix(
    xs: np.ndarray,
    target: TargetMeasure,
    kind: CostKind = CostKind.SQUARED,
    cost_fn: Optional[CostFunction] = None,
) -> np.ndarray:
    """
    Costs c(x_i, y_j) for a block of points.

    Args:
        xs (np.ndarray): Points of shape (n, d).
        target (TargetMeasure): The discrete target.
        kind (CostKind): Squared or dimension-normalized squared Euclidean distance.
        cost_fn (Optional[CostFunction]): User hook replacing the Euclidean costs.

    Returns:
        np.ndarray: Matrix of shape (n, J).
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != target.dim:
        raise DimensionMismatchError(
            "source points do not match the target dimension",
            {"expected": target.dim, "got": xs.shape[-1] if xs.ndim else None},
        )
    if cost_fn is not None:
        costs = np.asarray(cost_fn(xs, target.points), dtype=float)
        if costs.shape != (xs.shape[0], target.size):
            raise CostError("cost callback returned the wrong shape", {"shape": costs.shape})
        return _check_costs(costs)

    costs = cdist(xs, target.points, "sqeuclidean")
    if kind == CostKind.NORMALIZED:
        costs /= target.dim
    return _check_costs(costs)


def cost_row(
    x: np.ndarray,
    target: TargetMeasure,
    kind: CostKind = CostKind.SQUARED,
    cost_fn: Optional[CostFunction] = None,
) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatchError("a single point must be a vector", {"shape": x.shape})
    return cost_matrix(x[None, :], target, kind, cost_fn)[0]


def _logits(c_x: np.ndarray, v: np.ndarray, eps: float, nu: np.ndarray) -> np.ndarray:
    return (v - c_x) / eps + np.log(nu)


def soft_assignment(c_x: np.ndarray, v: np.ndarray, eps: float, nu: np.ndarray) -> np.ndarray:
    logits = _logits(c_x, v, eps, nu)
    return np.exp(logits - logsumexp(logits, axis=-1, keepdims=True))


def h_eps(c_x: np.ndarray, v: np.ndarray, eps: float, nu: np.ndarray) -> float:
    return float(eps + eps * logsumexp(_logits(c_x, v, eps, nu)) - v @ nu)


def h_and_pi(c_x: np.ndarray, v: np.ndarray, eps: float, nu: np.ndarray, log_nu: np.ndarray) -> Tuple[float, np.ndarray]:
    """h_eps and pi from a single log-sum-exp; the per-step kernel of the solvers."""
    logits = (v - c_x) / eps + log_nu
    lse = logsumexp(logits)
    return float(eps + eps * lse - v @ nu), np.exp(logits - lse)


def grad_h(pi: np.ndarray, nu: np.ndarray) -> np.ndarray:
    if pi.shape != nu.shape:
        raise DimensionMismatchError("pi and nu differ in length", {"pi": pi.shape, "nu": nu.shape})
    return pi - nu


def hess_h(pi: np.ndarray, eps: float) -> np.ndarray:
    return (np.diag(pi) - np.outer(pi, pi)) / eps


def project_zero_mean(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v - v.mean(axis=-1, keepdims=True)


def sample_terms(costs: np.ndarray, v: np.ndarray, eps: float, target: TargetMeasure) -> SampleTerms:
    """Row-wise h_eps(x_i, v) and pi(x_i, v) for a cost matrix of shape (I, J)."""
    logits = (v[None, :] - costs) / eps + target.log_weights[None, :]
    lse = logsumexp(logits, axis=1)
    h = eps + eps * lse - v @ target.weights
    pi = np.exp(logits - lse[:, None])
    return SampleTerms(h=h, pi=pi)


def exact_objective(
    source: DiscreteEmpirical,
    target: TargetMeasure,
    v: np.ndarray,
    eps: float,
    kind: CostKind = CostKind.SQUARED,
    costs: Optional[np.ndarray] = None,
    hessian: bool = True,
) -> ObjectiveValue:
    """
    Exact H_eps(v), its gradient and Hessian for a discrete source.

    Args:
        source (DiscreteEmpirical): Source atoms x_i with weights mu_i.
        target (TargetMeasure): The discrete target.
        v (np.ndarray): Dual potential.
        eps (float): Regularization parameter.
        kind (CostKind): Cost used when `costs` is not given.
        costs (Optional[np.ndarray]): Precomputed (I, J) cost matrix.
        hessian (bool): Skip the (J, J) Hessian when False.

    Returns:
        ObjectiveValue: value = sum_i mu_i h_eps(x_i, v) with matching gradient and Hessian.
    """
    if costs is None:
        costs = cost_matrix(source.points, target, kind)
    v = np.asarray(v, dtype=float)
    terms = sample_terms(costs, v, eps, target)
    mu = source.weights

    mean_pi = mu @ terms.pi
    gradient = mean_pi - target.weights
    hess = None
    if hessian:
        weighted = terms.pi * mu[:, None]
        hess = (np.diag(mean_pi) - terms.pi.T @ weighted) / eps
        hess = 0.5 * (hess + hess.T)
    return ObjectiveValue(value=float(mu @ terms.h), gradient=gradient, hessian=hess)


def gradient_covariance(
    source: DiscreteEmpirical,
    target: TargetMeasure,
    v: np.ndarray,
    eps: float,
    kind: CostKind = CostKind.SQUARED,
    costs: Optional[np.ndarray] = None,
) -> np.ndarray:
    """G_eps(v) = sum_i mu_i (pi(x_i, v) - nu)(pi(x_i, v) - nu)^T."""
    if costs is None:
        costs = cost_matrix(source.points, target, kind)
    phis = sample_terms(costs, np.asarray(v, dtype=float), eps, target).pi - target.weights[None, :]
    g = phis.T @ (phis * source.weights[:, None])
    return 0.5 * (g + g.T)
