"""
Config-driven Monte-Carlo protocol.

Replication r of every algorithm at every eps draws from stream r of the base
seed, so algorithms see common random numbers. Workers return whole records;
the parent process sorts them by (algorithm, replication) and is the only writer.
"""
import hashlib
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd
import scipy
from pydantic import ValidationError

from sdot import __version__
from sdot.core.exceptions import ConfigError, ReplicationError, SdotError
from sdot.schemas.experiment import (
    RUN_COLUMNS,
    ExperimentConfig,
    Manifest,
    SnapshotRow,
    TargetSpec,
    TruthSummary,
    WeightsKind,
)
from sdot.schemas.measure import DiscreteEmpirical, MaterializedSource, TargetMeasure
from sdot.schemas.solver import AlgorithmConfig
from sdot.services.measures import RNG_ALGORITHM, SeededStream, materialize
from sdot.services.objective import cost_matrix
from sdot.services.preconditioner import write_sbar_snapshot
from sdot.services.solvers import RunRecord, run
from sdot.services.truth import GroundTruth, evaluation_measure, resolve_truth

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


@dataclass
class Instance:
    source: MaterializedSource
    target: TargetMeasure
    evaluation: DiscreteEmpirical
    costs: Optional[np.ndarray]


@dataclass
class MonteCarloResult:
    eps: float
    truth: Optional[GroundTruth]
    records: List[RunRecord]
    runs: pd.DataFrame
    aggregate: pd.DataFrame


@dataclass
class ExperimentOutcome:
    out_dir: Path
    results: List[MonteCarloResult]
    manifest: Manifest


def format_config_error(exc: ValidationError) -> str:
    lines = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"]) or "<root>"
        lines.append(f"{location}: {error['msg']}")
    return "; ".join(lines)


def parse_config(payload: dict) -> ExperimentConfig:
    """Accept a bare config or a manifest written by a previous run."""
    if isinstance(payload, dict) and "config" in payload and "config_hash" in payload:
        payload = payload["config"]
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment config: {format_config_error(exc)}") from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(payload)


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json", exclude={"output_dir"}), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def build_target(spec: TargetSpec) -> TargetMeasure:
    if spec.points is not None:
        return TargetMeasure(points=spec.points, weights=spec.weights)
    generator = SeededStream(spec.seed, 0).generator
    points = spec.low + (spec.high - spec.low) * generator.random((spec.size, spec.dim))
    if spec.weights_kind == WeightsKind.RANDOM:
        weights = 0.5 / spec.size + 0.5 * generator.dirichlet(np.ones(spec.size))
        weights /= weights.sum()
    else:
        weights = np.full(spec.size, 1.0 / spec.size)
    return TargetMeasure(points=points, weights=weights)


def build_instance(config: ExperimentConfig) -> Instance:
    source = materialize(config.source)
    target = build_target(config.target)
    if source.dim != target.dim:
        raise ConfigError("source and target dimensions differ", {"source": source.dim, "target": target.dim})
    evaluation = evaluation_measure(source, config.truth, config.seed)
    costs = cost_matrix(source.points, target, config.cost) if isinstance(source, DiscreteEmpirical) else None
    return Instance(source=source, target=target, evaluation=evaluation, costs=costs)


def instance_truth(config: ExperimentConfig, instance: Instance, eps: float, cache: Optional[Path] = None) -> GroundTruth:
    return resolve_truth(
        instance.source,
        instance.target,
        eps,
        config.truth,
        config.cost,
        config.seed,
        cache=cache,
        key_source=config.source,
    )


@dataclass
class ReplicationTask:
    algorithm: AlgorithmConfig
    replication: int
    eps: float
    config: ExperimentConfig
    instance: Instance
    truth: Optional[GroundTruth]


def run_replication(task: ReplicationTask) -> RunRecord:
    config = task.config
    solver = task.algorithm.bind(task.eps, config.n_max, config.cost)
    stream = SeededStream(config.seed, task.replication)
    try:
        return run(
            solver,
            task.instance.source,
            task.instance.target,
            stream,
            snapshots=config.snapshot_schedule,
            truth=task.truth,
            costs=task.instance.costs,
            record_wall_time=config.record_wall_time,
            keep_sbar=config.save_sbar,
        )
    except (SdotError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise ReplicationError(
            f"replication failed: {exc}", seed=config.seed, stream_id=task.replication, algorithm=solver.name
        ) from exc


def _map(tasks: List[ReplicationTask], threads: int) -> List[RunRecord]:
    if threads <= 1 or len(tasks) <= 1:
        return [run_replication(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(run_replication, tasks))


def records_frame(records: Iterable[RunRecord]) -> pd.DataFrame:
    rows = []
    for record in records:
        for snap in record.snapshots:
            row = SnapshotRow(
                replication=record.stream_id,
                algorithm=record.algorithm,
                n=snap.n,
                wall_time_s=snap.wall_time_s,
                w_hat=snap.w_hat,
                sigma2_hat=snap.sigma2_hat,
                v_err_sq=snap.v_err_sq,
                sbar_err_fro=snap.sbar_err_fro,
            )
            rows.append(row.model_dump())
    frame = pd.DataFrame(rows, columns=RUN_COLUMNS)
    numeric = {column: "float64" for column in RUN_COLUMNS[3:]}
    return frame.astype({"replication": "int64", "n": "int64", **numeric})


def _fsum_mean(values: pd.Series) -> float:
    finite = [value for value in values if value is not None and not math.isnan(value)]
    return math.fsum(finite) / len(finite) if finite else math.nan


def _fsum_std(values: pd.Series) -> float:
    finite = [value for value in values if value is not None and not math.isnan(value)]
    if len(finite) < 2:
        return 0.0 if finite else math.nan
    mean = math.fsum(finite) / len(finite)
    return math.sqrt(math.fsum((value - mean) ** 2 for value in finite) / (len(finite) - 1))


def aggregate(runs: pd.DataFrame, W_eps: Optional[float] = None) -> pd.DataFrame:
    """
    Per (algorithm, n) across replications, with compensated sums in replication order.

    Args:
        runs (pd.DataFrame): Rows with the RUN_COLUMNS schema.
        W_eps (Optional[float]): Ground truth value; enables `w_abs_err_mean`.

    Returns:
        pd.DataFrame: One row per (algorithm, n).
    """
    frame = runs.sort_values(["algorithm", "replication", "n"], kind="mergesort").copy()
    frame["w_abs_err"] = (frame["w_hat"] - W_eps).abs() if W_eps is not None else math.nan
    grouped = frame.groupby(["algorithm", "n"], sort=True)
    table = grouped.agg(
        replications=("replication", "count"),
        w_abs_err_mean=("w_abs_err", _fsum_mean),
        v_err_sq_mean=("v_err_sq", _fsum_mean),
        wall_time_s_mean=("wall_time_s", _fsum_mean),
        w_hat_mean=("w_hat", _fsum_mean),
        w_hat_std=("w_hat", _fsum_std),
        sigma2_hat_mean=("sigma2_hat", _fsum_mean),
        sbar_err_fro_mean=("sbar_err_fro", _fsum_mean),
    )
    return table.reset_index()


def monte_carlo(
    config: ExperimentConfig,
    eps: Optional[float] = None,
    truth: Optional[GroundTruth] = None,
    threads: int = 1,
    instance: Optional[Instance] = None,
) -> MonteCarloResult:
    """
    Run every algorithm for every replication at one eps and aggregate.

    Args:
        config (ExperimentConfig): Validated experiment.
        eps (Optional[float]): Defaults to the first configured eps.
        truth (Optional[GroundTruth]): Enables error columns; computed when omitted.
        threads (int): Worker processes; results do not depend on it.
        instance (Optional[Instance]): Prebuilt instance to share across eps values.

    Returns:
        MonteCarloResult: Sorted records plus per-snapshot and aggregated tables.
    """
    eps = config.eps[0] if eps is None else eps
    instance = instance or build_instance(config)
    if truth is None:
        truth = instance_truth(config, instance, eps)

    tasks = [
        ReplicationTask(algorithm, replication, eps, config, instance, truth)
        for algorithm in config.algorithms
        for replication in range(config.replications)
    ]
    logger.info("Running %d replications of %d algorithms at eps=%g", config.replications, len(config.algorithms), eps)
    records = sorted(_map(tasks, threads), key=lambda record: (record.algorithm, record.stream_id))
    runs = records_frame(records).sort_values(["replication", "algorithm", "n"], kind="mergesort").reset_index(drop=True)
    return MonteCarloResult(
        eps=eps,
        truth=truth,
        records=records,
        runs=runs,
        aggregate=aggregate(runs, truth.W_eps if truth is not None else None),
    )


def eps_tag(eps: float) -> str:
    return f"eps={eps:g}"


def write_result(out_dir: Path, result: MonteCarloResult, save_sbar: bool = False) -> List[str]:
    tag = eps_tag(result.eps)
    runs_name = f"runs_{tag}.csv"
    aggregate_name = f"aggregate_{tag}.csv"
    result.runs.to_csv(out_dir / runs_name, index=False, float_format=FLOAT_FORMAT, na_rep="")
    result.aggregate.to_csv(out_dir / aggregate_name, index=False, float_format=FLOAT_FORMAT, na_rep="")
    files = [runs_name, aggregate_name]
    if save_sbar:
        for record in result.records:
            for snap in record.snapshots:
                if snap.s_bar is None:
                    continue
                name = f"sbar/{tag}/{record.algorithm}_r{record.stream_id}_n{snap.n}.bin"
                write_sbar_snapshot(out_dir / name, snap.s_bar, snap.n)
                files.append(name)
    return files


def versions() -> Dict[str, str]:
    return {
        "sdot": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "python": platform.python_version(),
    }


def run_experiment(
    config: ExperimentConfig,
    out_dir: Union[str, Path],
    threads: int = 1,
    truth_cache: Optional[Union[str, Path]] = None,
) -> ExperimentOutcome:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    instance = build_instance(config)

    results: List[MonteCarloResult] = []
    files: List[str] = []
    summaries: List[TruthSummary] = []
    for eps in config.eps:
        truth = instance_truth(config, instance, eps, Path(truth_cache) if truth_cache else None)
        summaries.append(
            TruthSummary(
                eps=eps,
                W_eps=truth.W_eps,
                sigma2_eps=truth.sigma2_eps,
                residual=truth.residual,
                converged=truth.converged,
                method=truth.method,
            )
        )
        result = monte_carlo(config, eps, truth, threads, instance)
        files.extend(write_result(out_dir, result, config.save_sbar))
        results.append(result)

    manifest = Manifest(
        name=config.name,
        config=config,
        config_hash=config_hash(config),
        seed=config.seed,
        rng=RNG_ALGORITHM,
        versions=versions(),
        truth=summaries,
        files=files,
    )
    (out_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2))
    logger.info("Wrote %d files to %s", len(files) + 1, out_dir)
    return ExperimentOutcome(out_dir=out_dir, results=results, manifest=manifest)


def read_manifest(run_dir: Union[str, Path]) -> Manifest:
    path = Path(run_dir) / "manifest.json"
    try:
        return Manifest.model_validate_json(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except ValidationError as exc:
        raise ConfigError(f"invalid manifest {path}: {format_config_error(exc)}") from exc
