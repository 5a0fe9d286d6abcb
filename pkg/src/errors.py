from __future__ import annotations

import math
from typing import Optional

# 부동소수점 반올림만 흡수하는 상대 오차. 이론상 정확한 부등식에만 쓴다.
RTOL = 1e-9


class InputError(ValueError):
    """사용자 입력(행렬, 파라미터, 질의)이 잘못된 경우."""


class AsymmetricInput(InputError):
    pass


class NegativeDistance(InputError):
    pass


class CoincidentPoints(InputError):
    pass


class TriangleViolation(InputError):
    pass


class DisconnectedGraph(InputError):
    pass


class EmptySubspace(InputError):
    pass


class KOutOfRange(InputError):
    pass


class UnknownFixture(InputError):
    pass


class InvalidParameters(InputError):
    pass


class DeltaOutOfRange(InputError):
    pass


class EmptyCore(InputError):
    pass


class InvalidDelta(InputError):
    pass


class InvalidFraction(InputError):
    pass


class InvalidSchedule(InputError):
    pass


class InvalidNorm(InputError):
    pass


class ForeignLeaf(InputError):
    pass


class UnknownPoint(InputError):
    pass


class EmptyPath(InputError):
    pass


class NotNonExpansive(InputError):
    pass


class ZeroDistancePair(InputError):
    pass


class GuaranteeViolation(AssertionError):
    """증명된 부등식이 깨졌을 때. 규칙 이름과 양변을 함께 보관한다."""

    def __init__(self, rule: str, lhs: float, rhs: float, detail: str = "") -> None:
        self.rule = rule
        self.lhs = lhs
        self.rhs = rhs
        self.detail = detail
        message = f"{rule}: {lhs!r} vs {rhs!r}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)

    def to_dict(self) -> dict:
        return {"rule": self.rule, "lhs": _jsonable(self.lhs), "rhs": _jsonable(self.rhs), "detail": self.detail}


def _jsonable(value: float) -> Optional[float]:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return None
    return float(value)


def leq(lhs: float, rhs: float, rtol: float = RTOL) -> bool:
    if math.isinf(rhs) and rhs > 0:
        return True
    return lhs <= rhs + rtol * max(abs(lhs), abs(rhs))


def ensure_leq(lhs: float, rhs: float, rule: str, detail: str = "", rtol: float = RTOL) -> None:
    if not leq(lhs, rhs, rtol):
        raise GuaranteeViolation(rule, lhs, rhs, detail)
