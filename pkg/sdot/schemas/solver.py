from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator


class Algorithm(str, Enum):
    SGD = "sgd"
    ADAM = "adam"
    SGN = "sgn"
    SN = "sn"


class CostKind(str, Enum):
    SQUARED = "squared"
    NORMALIZED = "normalized"


DEFAULT_ALPHA = {
    Algorithm.SGD: 0.5,
    Algorithm.ADAM: 0.0,
    Algorithm.SGN: 0.0,
    Algorithm.SN: 0.0,
}


class AlgorithmConfig(BaseModel):
    """
    Hyper-parameters of one stochastic algorithm.

    `alpha` is the step exponent in n^alpha (SGD uses n^(alpha - 1)). `sgd_scale`
    defaults to eps / (2 min nu) once the target is known. ADAM keeps the usual
    moment parameters with a smaller step size. `gamma` and `beta` drive the SGN
    regularizer gamma (1 + floor(k/J))^(-beta) nu_l e_l e_l^T.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    algorithm: Algorithm
    label: Optional[str] = None
    alpha: float
    sgd_scale: Optional[PositiveFloat] = None
    adam_lr: PositiveFloat = 0.005
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: PositiveFloat = 1e-8
    gamma: float = Field(default=1e-3, ge=0.0)
    beta: float = 0.49

    @model_validator(mode="before")
    @classmethod
    def default_alpha(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("alpha") is None and "algorithm" in data:
            data = {**data, "alpha": DEFAULT_ALPHA[Algorithm(data["algorithm"])]}
        return data

    @model_validator(mode="after")
    def validate_exponents(self) -> "AlgorithmConfig":
        if self.algorithm == Algorithm.SGD:
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError("sgd alpha must lie in [0, 1]")
        elif not 0.0 <= self.alpha < 0.5:
            raise ValueError(f"{self.algorithm.value} alpha must lie in [0, 1/2)")
        if self.algorithm == Algorithm.SGN:
            if not 0.0 <= self.beta < 0.5:
                raise ValueError("sgn beta must lie in [0, 1/2)")
            if self.alpha + self.beta >= 0.5:
                raise ValueError("sgn requires alpha + beta < 1/2")
        return self

    @property
    def name(self) -> str:
        return self.label or self.algorithm.value

    def bind(self, eps: float, n_max: int, cost: CostKind = CostKind.SQUARED) -> "SolverConfig":
        return SolverConfig(**self.model_dump(), eps=eps, n_max=n_max, cost=cost)


class SolverConfig(AlgorithmConfig):
    eps: PositiveFloat
    n_max: int = Field(ge=0)
    cost: CostKind = CostKind.SQUARED

    def resolved_sgd_scale(self, nu_min: float) -> float:
        if self.sgd_scale is not None:
            return self.sgd_scale
        return self.eps / (2.0 * nu_min)
