"""결정적 테스트 픽스처 생성기.

지원 종류
- ``uniform`` U_n: 모든 거리 1
- ``path`` L_n: d(i,j) = |i-j|
- ``clusters`` C_{k×m,s}: 클러스터 내부 1, 클러스터 간 s
- ``planar``: 단위 정사각형의 난수 점(유클리드)
- ``graph``: 난수 연결 그래프의 최단경로 거리

난수 계열은 ``numpy.random.default_rng(seed)`` 하나만 쓴다. 같은 (kind, 파라미터, seed)는
항상 같은 행렬을 낸다.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .errors import InvalidParameters, UnknownFixture
from .metric import MetricSpace, metric_from_edges, metric_from_matrix, metric_from_points

logger = logging.getLogger(__name__)

KINDS = ("uniform", "path", "clusters", "planar", "graph")
ALIASES = {"u": "uniform", "l": "path", "c": "clusters", "p": "planar", "g": "graph"}
GRAPH_MAX_WEIGHT = 10


@dataclass(frozen=True)
class FixtureSpec:
    kind: str
    n: int = 0
    k: int = 0
    m: int = 0
    s: float = 0.0
    seed: Optional[int] = None
    extra: Dict[str, Any] = field(default_factory=dict, compare=False)

    def describe(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"kind": self.kind}
        if self.kind == "clusters":
            record.update({"k": self.k, "m": self.m, "s": self.s})
        else:
            record["n"] = self.n
        if self.seed is not None:
            record["seed"] = self.seed
        return record

    def slug(self) -> str:
        """파일 이름용: ``clusters_4_4_10``, ``planar_64_1``."""

        return "_".join(f"{v:g}" if isinstance(v, float) else str(v) for v in self.describe().values())


def _kind(name: str) -> str:
    key = str(name).strip().lower()
    key = ALIASES.get(key, key)
    if key not in KINDS:
        raise UnknownFixture(f"unknown fixture {name!r}; expected one of {', '.join(KINDS)}")
    return key


def parse_fixture(tokens: Sequence[str]) -> FixtureSpec:
    """CLI 토큰(예: ``C 2 2 10``, ``L 8``, ``planar 64 7``)을 FixtureSpec 으로."""

    if not tokens:
        raise UnknownFixture("empty fixture descriptor")
    kind = _kind(tokens[0])
    args = list(tokens[1:])
    try:
        if kind in ("uniform", "path"):
            (n,) = args
            return FixtureSpec(kind, n=int(n))
        if kind == "clusters":
            k, m, s = args
            return FixtureSpec(kind, k=int(k), m=int(m), s=float(s))
        n, seed = args
        return FixtureSpec(kind, n=int(n), seed=int(seed))
    except ValueError as exc:
        raise InvalidParameters(f"bad arguments for fixture {kind}: {args}") from exc


def fixture_from_dict(entry: Dict[str, Any]) -> FixtureSpec:
    kind = _kind(entry.get("kind", ""))
    seed = entry.get("seed")
    return FixtureSpec(
        kind,
        n=int(entry.get("n", 0)),
        k=int(entry.get("k", 0)),
        m=int(entry.get("m", 0)),
        s=float(entry.get("s", 0.0)),
        seed=None if seed is None else int(seed),
    )


def _uniform(n: int) -> np.ndarray:
    return np.ones((n, n)) - np.eye(n)


def _path(n: int) -> np.ndarray:
    idx = np.arange(n, dtype=np.float64)
    return np.abs(idx[:, None] - idx[None, :])


def _clusters(k: int, m: int, s: float) -> np.ndarray:
    labels = np.repeat(np.arange(k), m)
    same = labels[:, None] == labels[None, :]
    matrix = np.where(same, 1.0, s)
    np.fill_diagonal(matrix, 0.0)
    return matrix


def _graph_edges(n: int, rng: np.random.Generator) -> List[tuple]:
    # 난수 트리(연결 보장) + n개의 추가 간선. 가중치는 1..GRAPH_MAX_WEIGHT 정수.
    edges = []
    for child in range(1, n):
        parent = int(rng.integers(0, child))
        edges.append((parent, child, int(rng.integers(1, GRAPH_MAX_WEIGHT + 1))))
    for _ in range(n):
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        weight = int(rng.integers(1, GRAPH_MAX_WEIGHT + 1))
        if u != v:
            edges.append((u, v, weight))
    return edges


def generate(spec: FixtureSpec) -> MetricSpace:
    kind = _kind(spec.kind)
    if kind == "clusters":
        if spec.k < 1 or spec.m < 1:
            raise InvalidParameters(f"clusters need k >= 1 and m >= 1, got k={spec.k} m={spec.m}")
        # 삼각부등식: 같은 클러스터 두 점 거리 1 <= s + s
        if spec.k > 1 and not spec.s >= 0.5:
            raise InvalidParameters(f"inter-cluster distance must be >= 0.5, got {spec.s}")
    elif spec.n < 1:
        raise InvalidParameters(f"fixture {kind} needs n >= 1, got {spec.n}")
    if kind in ("planar", "graph") and spec.seed is None:
        raise InvalidParameters(f"fixture {kind} requires a seed")

    provenance = {"kind": "fixture", "fixture": spec.describe()}
    if kind == "uniform":
        space = metric_from_matrix(_uniform(spec.n), provenance)
    elif kind == "path":
        space = metric_from_matrix(_path(spec.n), provenance)
    elif kind == "clusters":
        space = metric_from_matrix(_clusters(spec.k, spec.m, spec.s), provenance)
    elif kind == "planar":
        rng = np.random.default_rng(spec.seed)
        space = metric_from_points(rng.random((spec.n, 2)), 2.0)
        space.provenance.update(provenance)
    else:
        rng = np.random.default_rng(spec.seed)
        space = metric_from_edges(_graph_edges(spec.n, rng), n=spec.n)
        space.provenance.update(provenance)
    logger.debug("fixtures::generate :: %s n=%d", spec.describe(), space.n)
    return space


def random_weights(n: int, seed: int, low: int = 1, high: int = 16) -> np.ndarray:
    """정수 가중치 [low, high] (양 끝 포함)."""

    rng = np.random.default_rng(seed)
    return rng.integers(low, high + 1, size=n).astype(np.float64)
