"""
SGD, ADAM, SGN and SN as single-step state machines, plus the snapshot driver.

Step k (1-based) evaluates h and pi at V_{k-1}, feeds h to the estimators, moves
V with the pre-conditioner built from samples 1..k-1, and only then folds the
new sample into the pre-conditioner.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Dict, Iterable, Iterator, List, Optional, Sequence

import numpy as np

from sdot.core.exceptions import NonFiniteError, SdotError
from sdot.schemas.measure import DiscreteEmpirical, MaterializedSource, TargetMeasure
from sdot.schemas.solver import Algorithm, SolverConfig
from sdot.services.estimators import RunningEstimators, sigma2_hat, update_w_hat
from sdot.services.measures import SAMPLE_BLOCK, SeededStream, sample_block, sample_indices
from sdot.services.objective import CostFunction, cost_matrix, cost_row, h_and_pi, project_zero_mean
from sdot.services.preconditioner import (
    PreconditionerState,
    SgnInverseState,
    SnPinvState,
    apply_inverse,
    sgn_update,
    sn_update,
)

if TYPE_CHECKING:
    from sdot.services.truth import GroundTruth

logger = logging.getLogger(__name__)


@dataclass
class AdamMoments:
    m: np.ndarray
    s: np.ndarray


@dataclass
class SolverState:
    v: np.ndarray
    n: int = 0
    preconditioner: Optional[PreconditionerState] = None
    adam: Optional[AdamMoments] = None
    estimators: RunningEstimators = field(default_factory=RunningEstimators)


@dataclass
class Snapshot:
    n: int
    wall_time_s: Optional[float]
    v: np.ndarray
    w_hat: Optional[float]
    sigma2_hat: Optional[float]
    v_err_sq: Optional[float] = None
    sbar_err_fro: Optional[float] = None
    s_bar: Optional[np.ndarray] = None


@dataclass
class RunRecord:
    algorithm: str
    stream_id: int
    snapshots: List[Snapshot]
    final_state: SolverState


SnapshotSink = Callable[[Snapshot], None]


def init_state(config: SolverConfig, target: TargetMeasure, v0: Optional[np.ndarray] = None) -> SolverState:
    size = target.size
    v = np.zeros(size) if v0 is None else project_zero_mean(np.array(v0, dtype=float))
    state = SolverState(v=v)
    if config.algorithm == Algorithm.SGN:
        state.preconditioner = SgnInverseState.identity(size, config.gamma, config.beta)
    elif config.algorithm == Algorithm.SN:
        state.preconditioner = SnPinvState.identity(size)
    elif config.algorithm == Algorithm.ADAM:
        state.adam = AdamMoments(m=np.zeros(size), s=np.zeros(size))
    return state


def _sgd_update(state: SolverState, phi: np.ndarray, pi: np.ndarray, k: int, target: TargetMeasure, config: SolverConfig) -> None:
    scale = config.resolved_sgd_scale(target.nu_min)
    state.v = project_zero_mean(state.v - scale * k ** (config.alpha - 1.0) * phi)


def _adam_update(state: SolverState, phi: np.ndarray, pi: np.ndarray, k: int, target: TargetMeasure, config: SolverConfig) -> None:
    moments = state.adam
    moments.m = config.adam_beta1 * moments.m + (1.0 - config.adam_beta1) * phi
    moments.s = config.adam_beta2 * moments.s + (1.0 - config.adam_beta2) * phi**2
    m_hat = moments.m / (1.0 - config.adam_beta1**k)
    s_hat = moments.s / (1.0 - config.adam_beta2**k)
    state.v = project_zero_mean(state.v - config.adam_lr * m_hat / (np.sqrt(s_hat) + config.adam_eps))


def _sgn_update(state: SolverState, phi: np.ndarray, pi: np.ndarray, k: int, target: TargetMeasure, config: SolverConfig) -> None:
    direction = apply_inverse(state.preconditioner, phi)
    state.v = project_zero_mean(state.v - k**config.alpha * direction)
    sgn_update(state.preconditioner, phi, target.weights)


def _sn_update(state: SolverState, phi: np.ndarray, pi: np.ndarray, k: int, target: TargetMeasure, config: SolverConfig) -> None:
    direction = apply_inverse(state.preconditioner, phi)
    state.v = project_zero_mean(state.v - k**config.alpha * direction)
    sn_update(state.preconditioner, pi, config.eps)


UPDATE_RULES: Dict[Algorithm, Callable[..., None]] = {
    Algorithm.SGD: _sgd_update,
    Algorithm.ADAM: _adam_update,
    Algorithm.SGN: _sgn_update,
    Algorithm.SN: _sn_update,
}


def step_with_cost(state: SolverState, c_x: np.ndarray, target: TargetMeasure, config: SolverConfig) -> SolverState:
    k = state.n + 1
    h, pi = h_and_pi(c_x, state.v, config.eps, target.weights, target.log_weights)
    if not np.isfinite(h):
        raise NonFiniteError("h_eps is not finite", {"n": k, "algorithm": config.name})
    update_w_hat(state.estimators, h)

    phi = pi - target.weights
    UPDATE_RULES[config.algorithm](state, phi, pi, k, target, config)
    if not np.all(np.isfinite(state.v)):
        raise NonFiniteError("dual potential left the finite range", {"n": k, "algorithm": config.name})
    state.n = k
    return state


def step(state: SolverState, x: np.ndarray, target: TargetMeasure, config: SolverConfig) -> SolverState:
    """One stochastic update at sample x; the state is mutated and returned."""
    return step_with_cost(state, cost_row(x, target, config.cost), target, config)


def cost_stream(
    source: MaterializedSource,
    target: TargetMeasure,
    stream: SeededStream,
    config: SolverConfig,
    costs: Optional[np.ndarray] = None,
    cost_fn: Optional[CostFunction] = None,
) -> Iterator[np.ndarray]:
    """Endless cost rows c(X_k, .), drawn SAMPLE_BLOCK at a time."""
    if isinstance(source, DiscreteEmpirical) and cost_fn is None:
        if costs is None:
            costs = cost_matrix(source.points, target, config.cost)
        while True:
            yield from costs[sample_indices(source, stream, SAMPLE_BLOCK)]
    while True:
        yield from cost_matrix(sample_block(source, stream, SAMPLE_BLOCK), target, config.cost, cost_fn)


def _snapshot(
    state: SolverState,
    elapsed: Optional[float],
    truth: Optional["GroundTruth"],
    keep_sbar: bool,
) -> Snapshot:
    estimators = state.estimators
    snap = Snapshot(
        n=state.n,
        wall_time_s=elapsed,
        v=state.v.copy(),
        w_hat=estimators.w_hat if estimators.n else None,
        sigma2_hat=sigma2_hat(estimators) if estimators.n else None,
    )
    if truth is not None:
        snap.v_err_sq = float(np.sum((state.v - truth.v_star) ** 2))
    preconditioner = state.preconditioner
    if isinstance(preconditioner, SgnInverseState) and state.n > 0:
        s_bar = preconditioner.s_bar()
        if truth is not None:
            snap.sbar_err_fro = float(np.linalg.norm(s_bar - truth.G_star, "fro"))
        if keep_sbar:
            snap.s_bar = s_bar.copy()
    return snap


def run(
    config: SolverConfig,
    source: MaterializedSource,
    target: TargetMeasure,
    stream: SeededStream,
    snapshots: Sequence[int] = (),
    sinks: Iterable[SnapshotSink] = (),
    truth: Optional["GroundTruth"] = None,
    costs: Optional[np.ndarray] = None,
    cost_fn: Optional[CostFunction] = None,
    record_wall_time: bool = True,
    keep_sbar: bool = False,
    v0: Optional[np.ndarray] = None,
) -> RunRecord:
    """
    Execute n_max steps and record the requested snapshots.

    Args:
        config (SolverConfig): Algorithm, eps, budget and cost kind.
        source (MaterializedSource): Law of the samples X_k.
        target (TargetMeasure): The discrete target.
        stream (SeededStream): Random stream owned by this run.
        snapshots (Sequence[int]): Strictly increasing iteration counts <= n_max.
        sinks (Iterable[SnapshotSink]): Callbacks receiving every snapshot, init row included.
        truth (Optional[GroundTruth]): Enables v_err_sq and sbar_err_fro.
        costs (Optional[np.ndarray]): Precomputed cost matrix of a discrete source.
        cost_fn (Optional[CostFunction]): Custom cost callback.
        record_wall_time (bool): Leave wall_time_s empty when False, so outputs are byte-reproducible.
        keep_sbar (bool): Attach a copy of S_n / n to SGN snapshots.
        v0 (Optional[np.ndarray]): Initial potential, zero by default.

    Returns:
        RunRecord: The initialization snapshot followed by one snapshot per requested n.
    """
    schedule = list(snapshots)
    if any(later <= earlier for earlier, later in zip(schedule, schedule[1:])):
        raise SdotError("snapshot schedule must be strictly increasing", {"snapshots": schedule})
    if schedule and (schedule[0] < 1 or schedule[-1] > config.n_max):
        raise SdotError("snapshots must lie in [1, n_max]", {"n_max": config.n_max})

    sinks = list(sinks)
    state = init_state(config, target, v0)
    started = time.perf_counter()
    clock = (lambda: time.perf_counter() - started) if record_wall_time else (lambda: None)

    records = [_snapshot(state, 0.0 if record_wall_time else None, truth, keep_sbar)]
    for sink in sinks:
        sink(records[0])

    pending = iter(schedule)
    next_snapshot = next(pending, None)
    rows = cost_stream(source, target, stream, config, costs, cost_fn)
    for _ in range(config.n_max):
        step_with_cost(state, next(rows), target, config)
        if state.n == next_snapshot:
            snap = _snapshot(state, clock(), truth, keep_sbar)
            records.append(snap)
            for sink in sinks:
                sink(snap)
            next_snapshot = next(pending, None)

    logger.debug("%s finished %d steps on stream %d", config.name, state.n, stream.stream_id)
    return RunRecord(algorithm=config.name, stream_id=stream.stream_id, snapshots=records, final_state=state)
