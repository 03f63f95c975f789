"""
Limit matrices and the checkable inequalities around the semi-dual objective.

Every check returns a `CheckResult`. Bounds that only hold in part of the
parameter space (the Hessian floor min(nu)/eps, the keystone ordering G* <= H*,
the KL constant) are reported with `required=False`.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel
from scipy import stats

from sdot.core.exceptions import RankDeficiencyError
from sdot.schemas.experiment import CheckSpec
from sdot.schemas.measure import DiscreteEmpirical, TargetMeasure
from sdot.schemas.report import CheckResult, CheckStatus, DiagnosticReport
from sdot.schemas.solver import CostKind
from sdot.services.linalg import (
    centering_matrix,
    lambda_max_perp,
    lambda_min_perp,
    pinv_psd,
    require_full_rank_perp,
    sqrt_pinv_psd,
    sqrt_psd,
    symmetrize,
)
from sdot.services.measures import SeededStream
from sdot.services.objective import cost_matrix, exact_objective, gradient_covariance, project_zero_mean
from sdot.services.truth import GroundTruth

logger = logging.getLogger(__name__)

SLACK = 1e-9
KEYSTONE_TOL = 1e-9
GAMMA_TOL = 1e-6
G_IDENTITY_TOL = 1e-8
LYAPUNOV_TOL = 1e-8
KL_FLOOR = 1e-14


def _upper(name: str, value: float, bound: float, tol: float = SLACK, required: bool = True, detail: Optional[str] = None) -> CheckResult:
    slack = bound + tol - value
    status = CheckStatus.PASS if slack >= 0 else CheckStatus.FAIL
    return CheckResult(name=name, value=value, bound=bound, status=status, required=required, slack=slack, detail=detail)


def _lower(name: str, value: float, bound: float, tol: float = SLACK, required: bool = True, detail: Optional[str] = None) -> CheckResult:
    slack = value - bound + tol
    status = CheckStatus.PASS if slack >= 0 else CheckStatus.FAIL
    return CheckResult(name=name, value=value, bound=bound, status=status, required=required, slack=slack, detail=detail)


def _not_applicable(name: str, detail: str, required: bool = True) -> CheckResult:
    return CheckResult(name=name, status=CheckStatus.NOT_APPLICABLE, required=required, detail=detail)


def g_matrix(
    v: np.ndarray,
    source: DiscreteEmpirical,
    target: TargetMeasure,
    eps: float,
    kind: CostKind = CostKind.SQUARED,
    costs: Optional[np.ndarray] = None,
) -> np.ndarray:
    return gradient_covariance(source, target, v, eps, kind, costs)


def g_identity_check(truth: GroundTruth, nu: np.ndarray) -> CheckResult:
    """At v*, G* = diag(nu) - nu nu^T - eps H*."""
    expected = np.diag(nu) - np.outer(nu, nu) - truth.eps * truth.H_star
    return _upper("g_identity", float(np.linalg.norm(truth.G_star - expected, "fro")), 0.0, G_IDENTITY_TOL)


def hessian_bound_checks(truth: GroundTruth, nu: np.ndarray) -> List[CheckResult]:
    eps = truth.eps
    return [
        _upper("hessian_lambda_max", float(np.linalg.eigvalsh(symmetrize(truth.H_star)).max()), 1.0 / eps),
        _lower(
            "hessian_floor",
            lambda_min_perp(truth.H_star),
            float(nu.min()) / eps,
            required=False,
            detail="holds when soft assignments at v* vary little across the source",
        )
        if nu.size > 1
        else _not_applicable("hessian_floor", "J = 1", required=False),
    ]


def keystone_applicable(nu: np.ndarray, eps: float) -> bool:
    """eps <= min(nu) / (max(nu) - min(nu)), always true for uniform nu."""
    spread = float(nu.max() - nu.min())
    if spread <= 1e-12 * float(nu.max()):
        return True
    return eps <= float(nu.min()) / spread


def keystone_check(G_star: np.ndarray, H_star: np.ndarray, nu: np.ndarray, eps: float) -> List[CheckResult]:
    """
    Check G* <= H* on the complement of 1, and lambda_min(Gamma) >= 1.

    Args:
        G_star (np.ndarray): Gradient covariance at v*.
        H_star (np.ndarray): Hessian of H_eps at v*.
        nu (np.ndarray): Target weights.
        eps (float): Regularization parameter.

    Returns:
        List[CheckResult]: `keystone_order` and `gamma_floor`.
    """
    if nu.size == 1:
        vacuous = "empty orthogonal complement"
        return [
            CheckResult(name="keystone_order", status=CheckStatus.PASS, required=False, detail=vacuous),
            CheckResult(name="gamma_floor", status=CheckStatus.PASS, required=False, detail=vacuous),
        ]
    if not keystone_applicable(nu, eps):
        detail = f"eps={eps:g} exceeds min(nu)/(max(nu)-min(nu))"
        return [_not_applicable("keystone_order", detail, False), _not_applicable("gamma_floor", detail, False)]

    results = [_lower("keystone_order", lambda_min_perp(H_star - G_star), 0.0, KEYSTONE_TOL, required=False)]
    try:
        require_full_rank_perp(G_star, "G*")
    except RankDeficiencyError as exc:
        results.append(_not_applicable("gamma_floor", str(exc), False))
        return results
    root = sqrt_pinv_psd(G_star)
    results.append(_lower("gamma_floor", lambda_min_perp(root @ H_star @ root), 1.0, GAMMA_TOL, required=False))
    return results


@dataclass
class AsymptoticCovariances:
    gamma: np.ndarray
    sigma_v: np.ndarray
    sigma_star: np.ndarray
    lyapunov_residual: float
    gamma_lambda_min: float
    ordering_gap: float


def asymptotic_covariances(G_star: np.ndarray, H_star: np.ndarray) -> AsymptoticCovariances:
    """
    Gamma = G^{-1/2} H G^{-1/2}, Sigma_v = G^{-1/2} (2 Gamma - P)^- G^{-1/2} and the
    Newton covariance Sigma* = H^- G H^-.

    `lyapunov_residual` is the relative Frobenius residual of
    (A H - P/2) Sigma_v + Sigma_v (H A - P/2) = A G A with A = G^-, and
    `ordering_gap` is lambda_min of Sigma_v - Sigma* on the complement of 1,
    scaled by the norm of Sigma_v.
    """
    size = G_star.shape[0]
    require_full_rank_perp(G_star, "G*")
    projector = centering_matrix(size)

    root = sqrt_pinv_psd(G_star)
    a = root @ root
    gamma = symmetrize(root @ H_star @ root)
    sigma_v = symmetrize(root @ np.linalg.pinv(2.0 * gamma - projector, rcond=1e-10, hermitian=True) @ root)
    h_pinv = pinv_psd(H_star)
    sigma_star = symmetrize(h_pinv @ G_star @ h_pinv)

    drift = a @ H_star - 0.5 * projector
    lhs = drift @ sigma_v + sigma_v @ drift.T
    rhs = a @ G_star @ a
    scale = max(float(np.linalg.norm(rhs, "fro")), np.finfo(float).tiny)
    residual = float(np.linalg.norm(lhs - rhs, "fro")) / scale

    sigma_scale = max(float(np.linalg.norm(sigma_v, 2)), np.finfo(float).tiny)
    return AsymptoticCovariances(
        gamma=gamma,
        sigma_v=sigma_v,
        sigma_star=sigma_star,
        lyapunov_residual=residual,
        gamma_lambda_min=lambda_min_perp(gamma),
        ordering_gap=lambda_min_perp(sigma_v - sigma_star) / sigma_scale,
    )


def covariance_checks(truth: GroundTruth) -> List[CheckResult]:
    if truth.G_star.shape[0] == 1:
        return [_not_applicable("lyapunov_identity", "J = 1")]
    try:
        covariances = asymptotic_covariances(truth.G_star, truth.H_star)
    except RankDeficiencyError as exc:
        return [_not_applicable("lyapunov_identity", str(exc))]
    results = [_upper("lyapunov_identity", covariances.lyapunov_residual, 0.0, LYAPUNOV_TOL)]
    if covariances.gamma_lambda_min > 0.5:
        results.append(_lower("newton_covariance_order", covariances.ordering_gap, 0.0, 1e-8))
    else:
        results.append(_not_applicable("newton_covariance_order", "2 Gamma - P is not positive definite"))
    return results


def sgd_stability_check(H_star: np.ndarray, scale: float) -> CheckResult:
    """Step matrix A = I / s stabilizes SGD when lambda_min(A H*) >= 1/2 on the complement of 1."""
    if H_star.shape[0] == 1:
        return _not_applicable("sgd_stability", "J = 1", required=False)
    return _lower("sgd_stability", lambda_min_perp(H_star) / scale, 0.5, required=False)


def self_concordance_checks(
    v: np.ndarray,
    truth: GroundTruth,
    source: DiscreteEmpirical,
    target: TargetMeasure,
    eps: float,
    kind: CostKind = CostKind.SQUARED,
    costs: Optional[np.ndarray] = None,
) -> List[CheckResult]:
    """
    Local strong convexity, gradient linearization, G-Lipschitz and quadratic
    upper bound at one point v, all measured against v*.

    The linearization bound (2 sqrt(2) / eps) |v - v*|^2 is required only for
    eps >= 1/4.
    """
    if costs is None:
        costs = cost_matrix(source.points, target, kind)
    v = project_zero_mean(v)
    u = v - truth.v_star
    distance = float(np.linalg.norm(u))
    objective = exact_objective(source, target, v, eps, costs=costs, hessian=False)

    delta = math.sqrt(2.0) / eps * distance
    factor = 1.0 if delta == 0 else -math.expm1(-delta) / delta
    curvature = float(u @ truth.H_star @ u)
    g_gap = float(np.linalg.norm(gradient_covariance(source, target, v, eps, costs=costs) - truth.G_star, 2))

    return [
        _lower("strong_convexity", float(objective.gradient @ u), factor * curvature),
        _upper(
            "gradient_linearization",
            float(np.linalg.norm(objective.gradient - truth.H_star @ u)),
            2.0 * math.sqrt(2.0) / eps * distance**2,
            required=eps >= 0.25,
        ),
        _upper("g_lipschitz", g_gap, 4.0 / eps * distance),
        _upper("quadratic_upper", objective.value + truth.W_eps, distance**2 / (2.0 * eps)),
    ]


def kl_constant(G_star: np.ndarray, eps: float) -> float:
    """m_eps = eps * lambda_min(G*) * min(1, eps / 4) on the complement of 1."""
    return eps * lambda_min_perp(G_star) * min(1.0, eps / 4.0)


def kl_check(
    v: np.ndarray,
    truth: GroundTruth,
    source: DiscreteEmpirical,
    target: TargetMeasure,
    eps: float,
    kind: CostKind = CostKind.SQUARED,
    costs: Optional[np.ndarray] = None,
) -> CheckResult:
    """
    m_eps <= |grad H~(u)|^2 + |grad H~(u)|^2 / H~(u) at u = G*^{1/2} v, where
    H~(u) = H(G*^{-1/2} u) - H(v*).
    """
    if costs is None:
        costs = cost_matrix(source.points, target, kind)
    v = project_zero_mean(v)
    root_inv = sqrt_pinv_psd(truth.G_star)
    point = root_inv @ (sqrt_psd(truth.G_star) @ v)
    objective = exact_objective(source, target, point, eps, costs=costs, hessian=False)
    excess = objective.value + truth.W_eps
    if excess < KL_FLOOR:
        return CheckResult(name="kl_inequality", status=CheckStatus.SKIPPED, required=False, detail="H~(u) below 1e-14")
    grad_sq = float(np.sum((root_inv @ objective.gradient) ** 2))
    return _lower("kl_inequality", grad_sq + grad_sq / excess, kl_constant(truth.G_star, eps), required=False)


class NormalityStats(BaseModel):
    count: int
    mean: float
    std: float
    ks_statistic: float
    bin_edges: List[float]
    counts: List[int]


def normality_stats(values: Sequence[float], bins: int = 20) -> NormalityStats:
    """
    Summary of replicated standardized values against N(0, 1).

    Args:
        values (Sequence[float]): e.g. sqrt(n) (W_n - W_eps) / sigma_n per replication.
        bins (int): Histogram bin count.

    Returns:
        NormalityStats: Mean, sample std, Kolmogorov-Smirnov distance and histogram.
    """
    data = np.asarray(values, dtype=float)
    finite = data[np.isfinite(data)]
    if finite.size < data.size:
        logger.warning("Dropped %d non-finite values", data.size - finite.size)
    if finite.size == 0:
        raise ValueError("normality_stats needs at least one finite value")
    if finite.size < 30:
        logger.warning("Only %d replications; normality summaries need at least 30", finite.size)

    mean = math.fsum(finite) / finite.size
    std = float(np.std(finite, ddof=1)) if finite.size > 1 else 0.0
    counts, edges = np.histogram(finite, bins=bins)
    return NormalityStats(
        count=int(finite.size),
        mean=mean,
        std=std,
        ks_statistic=float(stats.kstest(finite, "norm").statistic),
        bin_edges=edges.tolist(),
        counts=counts.tolist(),
    )


class FiniteDifference(NamedTuple):
    gradient: np.ndarray
    hessian: np.ndarray


def finite_difference_oracle(
    f: Callable[[np.ndarray], float],
    v: np.ndarray,
    step: float,
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> FiniteDifference:
    """
    Central differences along coordinate axes, projected to the zero-mean space.

    The Hessian differentiates `grad` when given, otherwise uses second
    differences of `f`.
    """
    if step <= 0:
        raise ValueError("finite difference step must be positive")
    v = np.asarray(v, dtype=float)
    size = v.size
    basis = np.eye(size) * step

    gradient = np.array([(f(v + e) - f(v - e)) / (2.0 * step) for e in basis])
    if grad is not None:
        columns = [(grad(v + e) - grad(v - e)) / (2.0 * step) for e in basis]
        hessian = np.column_stack(columns)
    else:
        hessian = np.empty((size, size))
        for i, ei in enumerate(basis):
            for j, ej in enumerate(basis):
                hessian[i, j] = (f(v + ei + ej) - f(v + ei - ej) - f(v - ei + ej) + f(v - ei - ej)) / (4.0 * step**2)
    hessian = symmetrize(hessian)
    projected = hessian - hessian.mean(axis=0, keepdims=True)
    projected = projected - projected.mean(axis=1, keepdims=True)
    return FiniteDifference(gradient=project_zero_mean(gradient), hessian=projected)


def random_points(v_star: np.ndarray, count: int, radius: float, seed: int) -> np.ndarray:
    """`count` zero-mean points with |v - v*| uniform in [0, radius]."""
    generator = SeededStream(seed, 0).generator
    directions = project_zero_mean(generator.standard_normal((count, v_star.size)))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = radius * generator.random((count, 1))
    return v_star[None, :] + directions / norms * radii


def _fold(name: str, results: List[CheckResult]) -> CheckResult:
    """Worst case of one check across evaluation points."""
    evaluated = [result for result in results if result.slack is not None]
    if not evaluated:
        return results[0] if results else CheckResult(name=name, status=CheckStatus.SKIPPED)
    worst = min(evaluated, key=lambda result: result.slack)
    failures = sum(result.status == CheckStatus.FAIL for result in evaluated)
    detail = f"worst of {len(evaluated)} points"
    if failures:
        detail += f", {failures} violations"
    return worst.model_copy(update={"detail": detail})


def run_diagnostics(
    source: DiscreteEmpirical,
    target: TargetMeasure,
    truth: GroundTruth,
    spec: Optional[CheckSpec] = None,
    kind: CostKind = CostKind.SQUARED,
    costs: Optional[np.ndarray] = None,
    sgd_scale: Optional[float] = None,
) -> DiagnosticReport:
    """The full check suite at one eps: limit-matrix identities plus point checks around v*."""
    spec = spec or CheckSpec()
    eps = truth.eps
    nu = target.weights
    if costs is None:
        costs = cost_matrix(source.points, target, kind)

    checks: List[CheckResult] = [g_identity_check(truth, nu)]
    checks.extend(hessian_bound_checks(truth, nu))
    checks.extend(keystone_check(truth.G_star, truth.H_star, nu, eps))
    checks.extend(covariance_checks(truth))
    checks.append(sgd_stability_check(truth.H_star, sgd_scale or eps / (2.0 * target.nu_min)))

    per_point: Dict[str, List[CheckResult]] = {}
    for v in random_points(truth.v_star, spec.points, spec.radius, spec.seed):
        objective = exact_objective(source, target, v, eps, costs=costs)
        point_checks = [
            _upper("gradient_norm", float(np.linalg.norm(objective.gradient)), 2.0),
            _upper("hessian_lambda_max_at_v", lambda_max_perp(objective.hessian) if nu.size > 1 else 0.0, 1.0 / eps),
        ]
        point_checks.extend(self_concordance_checks(v, truth, source, target, eps, costs=costs))
        point_checks.append(kl_check(v, truth, source, target, eps, costs=costs))
        for result in point_checks:
            per_point.setdefault(result.name, []).append(result)
    checks.extend(_fold(name, results) for name, results in per_point.items())

    report = DiagnosticReport(eps=eps, checks=checks)
    for result in report.failed:
        logger.warning("Check %s failed at eps=%g: value %s, bound %s", result.name, eps, result.value, result.bound)
    return report