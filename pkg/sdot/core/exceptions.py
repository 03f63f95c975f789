from typing import Any, Dict, Optional


class SdotError(Exception):
    """Base error; `exit_code` is the process status the CLI returns for it."""

    exit_code: int = 1

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context = context or {}

    def __reduce__(self):
        return (self.__class__, (self.detail, self.context))

    def __str__(self) -> str:
        if not self.context:
            return self.detail
        extras = ", ".join(f"{key}={value}" for key, value in self.context.items())
        return f"{self.detail} ({extras})"


class ConfigError(SdotError):
    exit_code = 2


class DimensionMismatchError(SdotError):
    pass


class CostError(SdotError):
    pass


class NonFiniteError(SdotError):
    pass


class UnderflowError(SdotError):
    pass


class SingularMatrixError(SdotError):
    pass


class RankDeficiencyError(SdotError):
    pass


class CheckFailedError(SdotError):
    exit_code = 1


class ReplicationError(SdotError):
    def __init__(self, detail: str, seed: int, stream_id: int, algorithm: Optional[str] = None):
        super().__init__(detail, {"seed": seed, "stream": stream_id, "algorithm": algorithm})
        self.seed = seed
        self.stream_id = stream_id
        self.algorithm = algorithm

    def __reduce__(self):
        return (self.__class__, (self.detail, self.seed, self.stream_id, self.algorithm))
