from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, computed_field


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_APPLICABLE = "not_applicable"
    SKIPPED = "skipped"


class CheckResult(BaseModel):
    """
    One evaluated inequality: `value` compared against `bound`; `slack` is positive when it holds.

    Checks with `required=False` are reported but never fail a `check` run; they
    are bounds that hold only in part of the parameter space.
    """

    name: str
    value: Optional[float] = None
    bound: Optional[float] = None
    status: CheckStatus
    required: bool = True
    slack: Optional[float] = None
    detail: Optional[str] = None

    @computed_field
    @property
    def passed(self) -> bool:
        return self.status != CheckStatus.FAIL


class DiagnosticReport(BaseModel):
    eps: float
    checks: List[CheckResult]

    @property
    def failed(self) -> List[CheckResult]:
        return [check for check in self.checks if check.required and check.status == CheckStatus.FAIL]

    @property
    def ok(self) -> bool:
        return not self.failed
