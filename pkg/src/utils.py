from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime, tzinfo
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pytz

DEFAULT_TZ = "Asia/Seoul"


@dataclass
class TimeConfig:
    tz: tzinfo

    @classmethod
    def from_name(cls, name: str) -> "TimeConfig":
        return cls(pytz.timezone(name))

    def now(self) -> datetime:
        return datetime.now(self.tz)


def ensure_dir(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)


def iso_ts(dt: datetime, tz_name: str = DEFAULT_TZ) -> str:
    tz = pytz.timezone(tz_name)
    if dt.tzinfo is None:
        dt = tz.localize(dt)
    else:
        dt = dt.astimezone(tz)
    return dt.isoformat()


def to_builtin(payload: Any) -> Any:
    """numpy 스칼라/배열과 튜플을 json.dump가 받는 기본형으로 바꾼다."""

    if isinstance(payload, dict):
        return {str(key): to_builtin(value) for key, value in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [to_builtin(item) for item in payload]
    if isinstance(payload, np.ndarray):
        return [to_builtin(item) for item in payload.tolist()]
    if isinstance(payload, (np.integer,)):
        return int(payload)
    if isinstance(payload, (np.floating, float)):
        # 라벨/거리는 반올림하지 않는다(repr 은 왕복 정확).
        number = float(payload)
        return number if math.isfinite(number) else None
    if isinstance(payload, np.bool_):
        return bool(payload)
    return payload


def dumps(payload: Any) -> str:
    return json.dumps(to_builtin(payload), ensure_ascii=False, indent=2, sort_keys=True)


def write_json(path: Path, payload: Any) -> None:
    ensure_dir(path.parent)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(dumps(payload))
        fh.write("\n")


def read_json(path: Path) -> Any:
    with path.open("r", encoding="utf-8") as fh:
        return json.load(fh)


def load_yaml(path: Path) -> Dict[str, Any]:
    import yaml

    with path.open("r", encoding="utf-8") as fh:
        return yaml.safe_load(fh) or {}


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def ceil_slack(value: float, slack: float = 1e-9) -> int:
    """n**psi 같은 하한을 정수로 올린다. 4**0.5 == 2.0000000000000004 같은 잡음을 흡수."""

    return int(math.ceil(value - slack * max(1.0, abs(value))))


def log_base(value: float, base: float) -> float:
    return math.log(value) / math.log(base)


@dataclass
class Step:
    """unfold 의 한 단계: value 로 끝나거나 children 으로 갈라진 뒤 combine 으로 합쳐진다."""

    value: Any = None
    children: Optional[List[Any]] = None
    combine: Optional[Callable[[List[Any]], Any]] = None


def unfold(root: Any, expand: Callable[[Any], Step]) -> Any:
    """명시적 스택으로 돌리는 재귀. expand 호출 순서는 재귀의 전위 순서와 같다."""

    output: List[Any] = []
    stack: List[Tuple[bool, Any]] = [(True, root)]
    while stack:
        visit, payload = stack.pop()
        if visit:
            step = expand(payload)
            if step.children is None:
                output.append(step.value)
                continue
            stack.append((False, (step.combine, len(step.children))))
            for child in reversed(step.children):
                stack.append((True, child))
        else:
            combine, count = payload
            values = output[len(output) - count:] if count else []
            del output[len(output) - count:]
            output.append(combine(values))
    return output[0]
