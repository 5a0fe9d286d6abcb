"""유한 거리공간 표현과 기본 연산(공, 지름, 반경, 구면 가중치).

모든 점은 0..n-1 정수 id로 다루고, 부분공간은 오름차순 튜플로 고정한다.
하위 구성 단계의 동률 처리는 전부 "가장 작은 id"이므로 입력 순서가 곧 정규 순서다.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from .errors import (
    AsymmetricInput,
    CoincidentPoints,
    DisconnectedGraph,
    EmptySubspace,
    InvalidParameters,
    KOutOfRange,
    NegativeDistance,
    TriangleViolation,
)

logger = logging.getLogger(__name__)

Subspace = Tuple[int, ...]

GRAPH_SUFFIXES = {".txt", ".edges", ".graph", ".el"}


def as_subspace(ids: Iterable[int], n: Optional[int] = None) -> Subspace:
    """중복 제거 + 정렬. n이 주어지면 범위도 확인한다."""

    result = tuple(sorted({int(i) for i in ids}))
    if n is not None and result and (result[0] < 0 or result[-1] >= n):
        raise InvalidParameters(f"point id out of range 0..{n - 1}: {result}")
    return result


@dataclass(eq=False)
class MetricSpace:
    matrix: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64, copy=True)
        matrix.setflags(write=False)
        self.matrix = matrix

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    def dist(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])

    def points(self) -> Subspace:
        return tuple(range(self.n))

    def submatrix(self, points: Sequence[int]) -> np.ndarray:
        idx = np.asarray(points, dtype=np.intp)
        return self.matrix[np.ix_(idx, idx)]

    def check_ids(self, ids: Iterable[int]) -> None:
        for i in ids:
            if not 0 <= int(i) < self.n:
                raise InvalidParameters(f"point id {i} out of range 0..{self.n - 1}")


@dataclass(eq=False)
class WeightFunction:
    """점별 양의 가중치. 기본은 상수 1."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 1 or not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise InvalidParameters("weights must be a finite positive vector")
        values.setflags(write=False)
        self.values = values

    @classmethod
    def unit(cls, n: int) -> "WeightFunction":
        return cls(np.ones(n))

    @property
    def is_unit(self) -> bool:
        return bool(np.all(self.values == 1.0))

    def of(self, ids: Sequence[int]) -> float:
        if len(ids) == 0:
            return 0.0
        return float(self.values[np.asarray(ids, dtype=np.intp)].sum())

    def power_sum(self, ids: Sequence[int], psi: float) -> float:
        if len(ids) == 0:
            return 0.0
        return float(np.power(self.values[np.asarray(ids, dtype=np.intp)], psi).sum())

    @property
    def total(self) -> float:
        return float(self.values.sum())


def resolve_weights(space: MetricSpace, weights: Optional[WeightFunction]) -> WeightFunction:
    if weights is None:
        return WeightFunction.unit(space.n)
    if weights.values.shape[0] != space.n:
        raise InvalidParameters(f"weights length {weights.values.shape[0]} != n={space.n}")
    return weights


# ---------------------------------------------------------------------------
# 생성/로딩
# ---------------------------------------------------------------------------

def validate_matrix(matrix: np.ndarray) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidParameters(f"distance matrix must be square, got shape {matrix.shape}")
    if matrix.shape[0] == 0:
        raise EmptySubspace("metric must have at least one point")
    if not np.all(np.isfinite(matrix)):
        raise InvalidParameters("distance matrix contains non-finite entries")
    if np.any(matrix < 0):
        i, j = (int(v) for v in np.argwhere(matrix < 0)[0])
        raise NegativeDistance(f"d({i},{j}) = {matrix[i, j]} < 0")
    if not np.array_equal(matrix, matrix.T):
        i, j = (int(v) for v in np.argwhere(matrix != matrix.T)[0])
        raise AsymmetricInput(f"d({i},{j}) = {matrix[i, j]} but d({j},{i}) = {matrix[j, i]}")
    if np.any(np.diag(matrix) != 0):
        i = int(np.flatnonzero(np.diag(matrix))[0])
        raise InvalidParameters(f"d({i},{i}) = {matrix[i, i]} must be 0")
    off = matrix + np.eye(matrix.shape[0])
    if np.any(off == 0):
        i, j = (int(v) for v in np.argwhere(off == 0)[0])
        raise CoincidentPoints(f"d({i},{j}) = 0 for distinct points")


def validate_triangle(space: MetricSpace, limit: int = 10) -> List[Tuple[int, int, int]]:
    """d(i,k) > d(i,j) + d(j,k) 인 (i,j,k)를 최대 limit개까지 찾는다. O(n^3)."""

    matrix = space.matrix
    found: List[Tuple[int, int, int]] = []
    for j in range(space.n):
        via = matrix[:, j][:, None] + matrix[j, :][None, :]
        bad = np.argwhere(matrix > via)
        for i, k in bad:
            found.append((int(i), j, int(k)))
            if len(found) >= limit:
                return found
    return found


def metric_from_matrix(
    matrix: Any,
    provenance: Optional[Dict[str, Any]] = None,
    *,
    strict: bool = False,
) -> MetricSpace:
    array = np.asarray(matrix, dtype=np.float64)
    validate_matrix(array)
    space = MetricSpace(array, dict(provenance or {"kind": "matrix"}))
    if strict:
        violations = validate_triangle(space, limit=1)
        if violations:
            i, j, k = violations[0]
            raise TriangleViolation(
                f"d({i},{k}) = {space.dist(i, k)} > d({i},{j}) + d({j},{k}) = {space.dist(i, j) + space.dist(j, k)}"
            )
    return space


def metric_from_points(points: Any, p: float = 2.0, *, strict: bool = False) -> MetricSpace:
    coords = np.asarray(points, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[0] == 0:
        raise InvalidParameters("point cloud must be a non-empty 2-d array")
    p = float(p)
    if not p >= 1:
        raise InvalidParameters(f"norm parameter p must be >= 1, got {p}")
    diff = np.abs(coords[:, None, :] - coords[None, :, :])
    if math.isinf(p):
        matrix = diff.max(axis=2)
    else:
        matrix = np.power(np.power(diff, p).sum(axis=2), 1.0 / p)
    provenance = {"kind": "points", "p": "inf" if math.isinf(p) else p, "dim": int(coords.shape[1])}
    return metric_from_matrix(matrix, provenance, strict=strict)


def metric_from_edges(
    edges: Iterable[Tuple[int, int, float]],
    n: Optional[int] = None,
    *,
    strict: bool = False,
) -> MetricSpace:
    """무방향 가중 그래프의 최단경로 폐포."""

    graph = nx.Graph()
    max_id = -1
    for u, v, w in edges:
        u, v, w = int(u), int(v), float(w)
        if u < 0 or v < 0:
            raise InvalidParameters(f"negative vertex id in edge ({u},{v})")
        if w < 0:
            raise NegativeDistance(f"edge ({u},{v}) has weight {w}")
        if w == 0 and u != v:
            raise CoincidentPoints(f"edge ({u},{v}) has zero weight")
        max_id = max(max_id, u, v)
        if u == v:
            continue
        if graph.has_edge(u, v):
            w = min(w, graph[u][v]["weight"])
        graph.add_edge(u, v, weight=w)
    count = max_id + 1 if n is None else int(n)
    if count <= 0:
        raise EmptySubspace("graph has no vertices")
    graph.add_nodes_from(range(count))
    if not nx.is_connected(graph):
        components = nx.number_connected_components(graph)
        raise DisconnectedGraph(f"graph has {components} connected components")
    matrix = nx.floyd_warshall_numpy(graph, nodelist=list(range(count)), weight="weight")
    matrix = np.minimum(matrix, matrix.T)
    logger.debug("metric::metric_from_edges :: n=%d edges=%d", count, graph.number_of_edges())
    return metric_from_matrix(matrix, {"kind": "graph", "edges": graph.number_of_edges()}, strict=strict)


def load_metric(path: Path, *, strict: bool = False, p: float = 2.0) -> MetricSpace:
    """확장자로 형식을 고른다.

    ``*.points.csv`` / ``*.json`` 은 점군(ℓ_p), ``*.edges.csv`` 와 GRAPH_SUFFIXES 는 간선 목록,
    그 밖의 ``*.csv`` 는 대칭 거리행렬이다.
    """

    path = Path(path)
    name = path.name.lower()
    suffix = path.suffix.lower()
    if name.endswith(".points.csv"):
        frame = pd.read_csv(path, header=None, comment="#")
        space = metric_from_points(frame.to_numpy(dtype=np.float64), p, strict=strict)
    elif suffix == ".json":
        with path.open("r", encoding="utf-8") as fh:
            payload = json.load(fh)
        norm = payload.get("p", p)
        space = metric_from_points(payload["points"], float("inf") if norm == "inf" else norm, strict=strict)
    elif name.endswith(".edges.csv"):
        frame = pd.read_csv(path, header=None, comment="#", names=["u", "v", "w"])
        space = metric_from_edges(frame.itertuples(index=False, name=None), strict=strict)
    elif suffix in GRAPH_SUFFIXES:
        frame = pd.read_csv(path, sep=r"\s+", header=None, comment="#", names=["u", "v", "w"])
        space = metric_from_edges(frame.itertuples(index=False, name=None), strict=strict)
    else:
        frame = pd.read_csv(path, header=None)
        space = metric_from_matrix(frame.to_numpy(dtype=np.float64), {"kind": "matrix"}, strict=strict)
    space.provenance["source"] = path.name
    logger.debug("metric::load_metric :: %s -> n=%d", path, space.n)
    return space


def save_metric(space: MetricSpace, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(space.matrix)
    frame.to_csv(path, header=False, index=False, float_format="%.17g")
    return path


# ---------------------------------------------------------------------------
# 공, 지름, 반경
# ---------------------------------------------------------------------------

def _members(space: MetricSpace, points: Optional[Sequence[int]]) -> np.ndarray:
    if points is None:
        return np.arange(space.n, dtype=np.intp)
    members = np.asarray(as_subspace(points, space.n), dtype=np.intp)
    if members.size == 0:
        raise EmptySubspace("subspace is empty")
    return members


def ball(space: MetricSpace, v: int, r: float, points: Optional[Sequence[int]] = None) -> Subspace:
    """닫힌 공 {u : d(u,v) <= r}. points가 주어지면 그 안에서만 센다."""

    space.check_ids([v])
    if r < 0:
        raise InvalidParameters(f"radius must be >= 0, got {r}")
    members = _members(space, points)
    hits = members[space.matrix[v, members] <= r]
    return tuple(int(i) for i in hits)


def diameter(space: MetricSpace, points: Optional[Sequence[int]] = None) -> float:
    members = _members(space, points)
    if members.size == 1:
        return 0.0
    return float(space.matrix[np.ix_(members, members)].max())


def aspect_ratio(space: MetricSpace) -> float:
    if space.n < 2:
        return 1.0
    off = space.matrix[~np.eye(space.n, dtype=bool)]
    return float(off.max() / off.min())


def knn_radius(space: MetricSpace, x: int, k: int, points: Optional[Sequence[int]] = None) -> float:
    """|B(x,r)| >= k 인 최소 r. 자기 자신(거리 0)을 첫 번째로 센다."""

    space.check_ids([x])
    members = _members(space, points)
    if not 1 <= k <= members.size:
        raise KOutOfRange(f"k={k} outside 1..{members.size}")
    ordered = np.sort(space.matrix[x, members])
    return float(ordered[k - 1])


def weight_radius(
    space: MetricSpace,
    u: int,
    eps: float,
    weights: Optional[WeightFunction] = None,
    points: Optional[Sequence[int]] = None,
) -> float:
    """w(B(u,r)) >= eps * w(X) 인 최소 r (실현된 거리 값)."""

    if not 0 < eps <= 1:
        raise InvalidParameters(f"eps must lie in (0,1], got {eps}")
    space.check_ids([u])
    weights = resolve_weights(space, weights)
    members = _members(space, points)
    row = space.matrix[u, members]
    order = np.argsort(row, kind="stable")
    cumulative = np.cumsum(weights.values[members][order])
    target = eps * float(weights.values[members].sum())
    idx = int(np.searchsorted(cumulative >= target, True))
    # 같은 거리의 점들은 한 번에 공에 들어오므로 실현값은 그 거리 자체다.
    return float(row[order][min(idx, len(order) - 1)])


def ball_weights(sub: np.ndarray, radius: float, wvec: np.ndarray) -> np.ndarray:
    """부분행렬의 각 행(중심)에 대해 반경 radius 닫힌 공의 가중치 합."""

    return (sub <= radius) @ wvec


def spherical_weight(
    space: MetricSpace,
    points: Sequence[int],
    weights: Optional[WeightFunction] = None,
    restrict: Optional[Sequence[int]] = None,
) -> float:
    """bsize(Z) = max_z w(B(z, diam(Z)/4)), 공은 Z 안에서.

    restrict 가 있으면 그 점들의 가중치만 세고 중심도 그 점들 중에서만 고른다(w_C 변형).
    """

    weights = resolve_weights(space, weights)
    members = _members(space, points)
    sub = space.matrix[np.ix_(members, members)]
    diam = float(sub.max()) if members.size > 1 else 0.0
    wvec = weights.values[members].copy()
    if restrict is None:
        return float(ball_weights(sub, diam / 4.0, wvec).max())
    mask = np.isin(members, np.asarray(list(restrict), dtype=np.intp))
    if not mask.any():
        return 0.0
    return float(ball_weights(sub[mask], diam / 4.0, wvec * mask).max())
