"""
Ground truth (W_eps, v*, G*, H*, sigma2_eps) for an instance, with a JSON cache.

Discrete sources are solved directly by Sinkhorn. Continuous sources are replaced
by the empirical measure of a large seeded sample; v* then comes either from
Sinkhorn on that sample or from a long SN run on the continuous law itself.
"""
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from sdot.core.exceptions import ConfigError
from sdot.schemas.experiment import TruthMethod, TruthSpec
from sdot.schemas.measure import DiscreteEmpirical, MaterializedSource, TargetMeasure
from sdot.schemas.solver import Algorithm, AlgorithmConfig, CostKind
from sdot.services.measures import SeededStream, empirical_of_samples, sample_block
from sdot.services.objective import cost_matrix, exact_objective, gradient_covariance, sample_terms
from sdot.services.sinkhorn import sinkhorn_solve
from sdot.services.solvers import run

logger = logging.getLogger(__name__)

# Stream id reserved for the truth sample; replications use ids below it.
TRUTH_STREAM = 2**32


@dataclass
class GroundTruth:
    W_eps: float
    v_star: np.ndarray
    G_star: np.ndarray
    H_star: np.ndarray
    eps: float
    sigma2_eps: float
    residual: float
    converged: bool
    method: str = TruthMethod.SINKHORN.value

    def to_json(self) -> Dict[str, Any]:
        return {
            "W_eps": self.W_eps,
            "v_star": self.v_star.tolist(),
            "G_star": self.G_star.tolist(),
            "H_star": self.H_star.tolist(),
            "eps": self.eps,
            "sigma2_eps": self.sigma2_eps,
            "residual": self.residual,
            "converged": self.converged,
            "method": self.method,
        }

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "GroundTruth":
        return cls(
            W_eps=float(payload["W_eps"]),
            v_star=np.array(payload["v_star"], dtype=float),
            G_star=np.array(payload["G_star"], dtype=float),
            H_star=np.array(payload["H_star"], dtype=float),
            eps=float(payload["eps"]),
            sigma2_eps=float(payload["sigma2_eps"]),
            residual=float(payload["residual"]),
            converged=bool(payload["converged"]),
            method=payload.get("method", TruthMethod.SINKHORN.value),
        )


def h_variance(source: DiscreteEmpirical, target: TargetMeasure, v: np.ndarray, eps: float, costs: np.ndarray) -> float:
    """Var(h_eps(X, v)) under a discrete source; sigma2_eps at v = v*."""
    h = sample_terms(costs, v, eps, target).h
    mean_h = source.weights @ h
    return float(source.weights @ (h - mean_h) ** 2)


def truth_at(
    source: DiscreteEmpirical,
    target: TargetMeasure,
    v_star: np.ndarray,
    eps: float,
    costs: np.ndarray,
    residual: float,
    converged: bool,
    method: TruthMethod,
) -> GroundTruth:
    objective = exact_objective(source, target, v_star, eps, costs=costs)
    g_star = gradient_covariance(source, target, v_star, eps, costs=costs)
    variance = h_variance(source, target, v_star, eps, costs)
    return GroundTruth(
        W_eps=-objective.value,
        v_star=v_star,
        G_star=g_star,
        H_star=objective.hessian,
        eps=eps,
        sigma2_eps=variance,
        residual=residual,
        converged=converged,
        method=method.value,
    )


def evaluation_measure(source: MaterializedSource, spec: TruthSpec, seed: int) -> DiscreteEmpirical:
    """The discrete measure on which truth and diagnostics are evaluated."""
    if isinstance(source, DiscreteEmpirical):
        return source
    stream = SeededStream(spec.seed if spec.seed is not None else seed, TRUTH_STREAM)
    return empirical_of_samples(sample_block(source, stream, spec.empirical_size))


def ground_truth(
    source: MaterializedSource,
    target: TargetMeasure,
    eps: float,
    spec: Optional[TruthSpec] = None,
    kind: CostKind = CostKind.SQUARED,
    seed: int = 0,
) -> GroundTruth:
    """
    Compute the ground truth of one (source, target, eps) instance.

    Args:
        source (MaterializedSource): Discrete or continuous source.
        target (TargetMeasure): The discrete target.
        eps (float): Regularization parameter.
        spec (Optional[TruthSpec]): Tolerances, sample size and method for continuous sources.
        kind (CostKind): Cost kind.
        seed (int): Fallback seed for the truth sample.

    Returns:
        GroundTruth: Values evaluated on the source, or on its empirical stand-in.
    """
    spec = spec or TruthSpec()
    evaluation = evaluation_measure(source, spec, seed)
    costs = cost_matrix(evaluation.points, target, kind)

    if isinstance(source, DiscreteEmpirical) or spec.method == TruthMethod.SINKHORN:
        result = sinkhorn_solve(evaluation, target, eps, tol=spec.tol, max_iter=spec.max_iter, costs=costs)
        logger.info("Sinkhorn truth at eps=%g: W_eps=%.10g after %d sweeps", eps, result.W_eps, result.iterations)
        return truth_at(evaluation, target, result.v_star, eps, costs, result.residual, result.converged, TruthMethod.SINKHORN)

    config = AlgorithmConfig(algorithm=Algorithm.SN).bind(eps, spec.reference_steps, kind)
    stream = SeededStream(spec.seed if spec.seed is not None else seed, TRUTH_STREAM + 1)
    record = run(config, source, target, stream, record_wall_time=False)
    v_star = record.final_state.v
    gradient = exact_objective(evaluation, target, v_star, eps, costs=costs, hessian=False).gradient
    residual = float(np.abs(gradient).sum())
    logger.info("Reference SN truth at eps=%g after %d steps, empirical gradient l1 %.3e", eps, spec.reference_steps, residual)
    return truth_at(evaluation, target, v_star, eps, costs, residual, True, TruthMethod.REFERENCE_RUN)


def instance_key(source: Any, target: TargetMeasure, eps: float, kind: CostKind, spec: TruthSpec, seed: int) -> str:
    payload = {
        "source": source.model_dump(mode="json"),
        "target": target.model_dump(mode="json"),
        "eps": eps,
        "cost": kind.value,
        "truth": spec.model_dump(mode="json"),
        "seed": seed,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def load_cache(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        return {}
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"truth cache {path} is not valid JSON: line {exc.lineno}, column {exc.colno}") from exc


def cached_truth(path: Optional[Union[str, Path]], key: str) -> Optional[GroundTruth]:
    if path is None:
        return None
    entry = load_cache(path).get(key)
    if entry is None:
        return None
    logger.debug("Truth cache hit %s", key[:12])
    return GroundTruth.from_json(entry)


def store_truth(path: Union[str, Path], key: str, truth: GroundTruth) -> None:
    path = Path(path)
    cache = load_cache(path)
    cache[key] = truth.to_json()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cache, sort_keys=True, indent=1))


def resolve_truth(
    source: MaterializedSource,
    target: TargetMeasure,
    eps: float,
    spec: TruthSpec,
    kind: CostKind,
    seed: int,
    cache: Optional[Union[str, Path]] = None,
    key_source: Any = None,
) -> GroundTruth:
    """Cached `ground_truth`; `key_source` is the unmaterialized source spec used for hashing."""
    key = instance_key(key_source if key_source is not None else source, target, eps, kind, spec, seed)
    truth = cached_truth(cache, key)
    if truth is None:
        truth = ground_truth(source, target, eps, spec, kind, seed)
        if cache is not None:
            store_truth(cache, key, truth)
    return truth
