"""
Log-domain Sinkhorn for discrete sources, used as the ground-truth oracle.

With Mr = -C / eps, the sweeps alternate

    v <- log(nu) - logsumexp(Mr + u[:, None], axis=0)
    u <- log(mu) - logsumexp(Mr + v[None, :], axis=1)

so that T = exp(Mr + u[:, None] + v[None, :]) has exact row marginals after each
sweep. The semi-dual potential is eps * (v - log nu), projected to zero mean.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import logsumexp, rel_entr

from sdot.schemas.measure import DiscreteEmpirical, TargetMeasure
from sdot.schemas.solver import CostKind
from sdot.services.objective import cost_matrix, exact_objective, project_zero_mean

logger = logging.getLogger(__name__)


@dataclass
class SinkhornTraceEntry:
    iteration: int
    wall_time_s: float
    residual: float
    v: np.ndarray


@dataclass
class SinkhornResult:
    W_eps: float
    v_star: np.ndarray
    u_star: np.ndarray
    coupling: np.ndarray
    iterations: int
    residual: float
    converged: bool
    eps: float
    residuals: List[float] = field(default_factory=list)
    trace: Optional[List[SinkhornTraceEntry]] = None


def marginal_residual(coupling: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float:
    rows = np.abs(coupling.sum(axis=1) - mu).sum()
    cols = np.abs(coupling.sum(axis=0) - nu).sum()
    return float(max(rows, cols))


def primal_value(coupling: np.ndarray, costs: np.ndarray, mu: np.ndarray, nu: np.ndarray, eps: float) -> float:
    """<T, C> + eps * sum T (log(T / (mu nu)) - 1)."""
    reference = np.outer(mu, nu)
    return float(np.sum(coupling * costs) + eps * (np.sum(rel_entr(coupling, reference)) - np.sum(coupling)))


def _semi_dual_potential(v: np.ndarray, log_nu: np.ndarray, eps: float) -> np.ndarray:
    return project_zero_mean(eps * (v - log_nu))


def sinkhorn_solve(
    source: DiscreteEmpirical,
    target: TargetMeasure,
    eps: float,
    tol: float = 1e-9,
    max_iter: int = 10000,
    kind: CostKind = CostKind.SQUARED,
    costs: Optional[np.ndarray] = None,
    trace: bool = False,
) -> SinkhornResult:
    """
    Solve discrete regularized OT between `source` and `target`.

    Args:
        source (DiscreteEmpirical): Source atoms and weights mu.
        target (TargetMeasure): Target atoms and weights nu.
        eps (float): Regularization parameter.
        tol (float): Stop once the l1 marginal residual is at most tol.
        max_iter (int): Sweep budget; the result is flagged when exhausted.
        kind (CostKind): Cost used when `costs` is not given.
        costs (Optional[np.ndarray]): Precomputed (I, J) cost matrix.
        trace (bool): Record (iteration, time, residual, potential) per sweep.

    Returns:
        SinkhornResult: W_eps is -H_eps(v*) evaluated by `exact_objective`.
    """
    if costs is None:
        costs = cost_matrix(source.points, target, kind)
    log_mu = np.log(source.weights)
    log_nu = target.log_weights
    kernel = -costs / eps

    u = np.zeros(source.size)
    v = np.zeros(target.size)
    residual = np.inf
    residuals: List[float] = []
    entries: Optional[List[SinkhornTraceEntry]] = [] if trace else None
    started = time.perf_counter()

    iteration = 0
    while iteration < max_iter and residual > tol:
        iteration += 1
        v = log_nu - logsumexp(kernel + u[:, None], axis=0)
        u = log_mu - logsumexp(kernel + v[None, :], axis=1)
        coupling = np.exp(kernel + u[:, None] + v[None, :])
        residual = marginal_residual(coupling, source.weights, target.weights)
        residuals.append(residual)
        if entries is not None:
            entries.append(
                SinkhornTraceEntry(iteration, time.perf_counter() - started, residual, _semi_dual_potential(v, log_nu, eps))
            )
        logger.debug("sinkhorn sweep %d residual %.3e", iteration, residual)

    coupling = np.exp(kernel + u[:, None] + v[None, :])
    converged = residual <= tol
    if not converged:
        logger.warning("Sinkhorn stopped after %d sweeps with residual %.3e > %.1e", iteration, residual, tol)

    v_star = _semi_dual_potential(v, log_nu, eps)
    objective = exact_objective(source, target, v_star, eps, costs=costs, hessian=False)
    return SinkhornResult(
        W_eps=-objective.value,
        v_star=v_star,
        u_star=u,
        coupling=coupling,
        iterations=iteration,
        residual=float(residual),
        converged=bool(converged),
        eps=eps,
        residuals=residuals,
        trace=entries,
    )
