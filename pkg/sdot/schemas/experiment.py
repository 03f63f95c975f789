from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator

from sdot.schemas.measure import FloatArray, PointArray, SourceMeasure
from sdot.schemas.solver import AlgorithmConfig, CostKind

SCHEMA_VERSION = 1
SEED_LIMIT = 2**64

RUN_COLUMNS = [
    "replication",
    "algorithm",
    "n",
    "wall_time_s",
    "w_hat",
    "sigma2_hat",
    "v_err_sq",
    "sbar_err_fro",
]


class TruthMethod(str, Enum):
    SINKHORN = "sinkhorn"
    REFERENCE_RUN = "reference_run"


class WeightsKind(str, Enum):
    UNIFORM = "uniform"
    RANDOM = "random"


class TargetSpec(BaseModel):
    """Explicit target atoms, or `size` atoms drawn uniformly in [low, high]^dim."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    points: Optional[PointArray] = None
    weights: Optional[FloatArray] = None
    size: Optional[int] = Field(default=None, ge=1)
    dim: Optional[int] = Field(default=None, ge=1)
    low: float = 0.0
    high: float = 1.0
    weights_kind: WeightsKind = WeightsKind.UNIFORM
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)

    @model_validator(mode="after")
    def explicit_or_generated(self) -> "TargetSpec":
        if self.points is None and (self.size is None or self.dim is None):
            raise ValueError("target needs either points or both size and dim")
        if self.points is not None and self.size is not None:
            raise ValueError("target takes points or size, not both")
        if self.high <= self.low:
            raise ValueError("target box needs high > low")
        return self


class TruthSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tol: PositiveFloat = 1e-9
    max_iter: int = Field(default=10000, ge=1)
    method: TruthMethod = TruthMethod.SINKHORN
    empirical_size: int = Field(default=2000, ge=1)
    reference_steps: int = Field(default=100000, ge=1)
    seed: Optional[int] = Field(default=None, ge=0, lt=SEED_LIMIT)


class CheckSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    points: int = Field(default=100, ge=1)
    radius: PositiveFloat = 1.0
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "experiment"
    source: SourceMeasure
    target: TargetSpec
    eps: List[PositiveFloat] = Field(min_length=1)
    cost: CostKind = CostKind.SQUARED
    algorithms: List[AlgorithmConfig] = Field(min_length=1)
    n_max: int = Field(ge=0)
    replications: int = Field(default=1, ge=1)
    snapshots: Optional[List[int]] = None
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    record_wall_time: bool = True
    save_sbar: bool = False
    truth: TruthSpec = TruthSpec()
    check: CheckSpec = CheckSpec()
    output_dir: Optional[Path] = None

    @model_validator(mode="after")
    def validate_schedule(self) -> "ExperimentConfig":
        schedule = self.snapshot_schedule
        if any(later <= earlier for earlier, later in zip(schedule, schedule[1:])):
            raise ValueError("snapshots must be strictly increasing")
        if schedule and (schedule[0] < 1 or schedule[-1] > self.n_max):
            raise ValueError(f"snapshots must lie in [1, n_max={self.n_max}]")
        names = [algorithm.name for algorithm in self.algorithms]
        if len(set(names)) != len(names):
            raise ValueError("algorithm labels must be unique; set `label` to run one algorithm twice")
        return self

    @property
    def snapshot_schedule(self) -> List[int]:
        if self.snapshots is not None:
            return list(self.snapshots)
        return [self.n_max] if self.n_max > 0 else []


class SnapshotRow(BaseModel):
    replication: int
    algorithm: str
    n: int
    wall_time_s: Optional[float] = None
    w_hat: Optional[float] = None
    sigma2_hat: Optional[float] = None
    v_err_sq: Optional[float] = None
    sbar_err_fro: Optional[float] = None


class TruthSummary(BaseModel):
    eps: float
    W_eps: float
    sigma2_eps: float
    residual: float
    converged: bool
    method: TruthMethod


class Manifest(BaseModel):
    schema_version: int = SCHEMA_VERSION
    name: str
    config: ExperimentConfig
    config_hash: str
    seed: int
    rng: str
    versions: Dict[str, str]
    truth: List[TruthSummary]
    files: List[str]
