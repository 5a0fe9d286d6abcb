"""라벨 트리(HST)로 표현한 초거리(ultrametric)와 O(1) LCA 질의.

노드 id 는 전위(preorder) 순서로 고정되므로 같은 구성은 같은 바이트로 직렬화된다.
잎(leaf)은 점 id 를 하나 가지며, 다중 임베딩 트리에서는 한 점이 여러 잎을 가질 수 있다.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ForeignLeaf, InvalidParameters, UnknownPoint
from .utils import read_json, write_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HstViolation:
    node: int
    rule: str
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"node": self.node, "rule": self.rule, "detail": self.detail}


class LcaIndex:
    """Euler tour + sparse table. 질의당 표 접근 횟수는 n 과 무관한 상수다."""

    __slots__ = ("euler", "depths", "first", "log", "table", "probes", "queries")

    def __init__(self, children: Sequence[Sequence[int]], depth: Sequence[int], root: int = 0) -> None:
        euler: List[int] = []
        first = np.full(len(children), -1, dtype=np.int64)
        stack: List[Tuple[int, int]] = [(root, 0)]
        while stack:
            node, pos = stack.pop()
            if pos == 0:
                first[node] = len(euler)
            euler.append(node)
            if pos < len(children[node]):
                stack.append((node, pos + 1))
                stack.append((children[node][pos], 0))

        self.euler = np.asarray(euler, dtype=np.int64)
        self.first = first
        self.depths = np.asarray(depth, dtype=np.int64)[self.euler]
        m = len(euler)
        self.log = np.zeros(m + 1, dtype=np.int64)
        if m > 1:
            self.log[2:] = np.floor(np.log2(np.arange(2, m + 1))).astype(np.int64)
        table = [np.arange(m, dtype=np.int64)]
        level = 1
        while (1 << level) <= m:
            span = 1 << level
            half = span >> 1
            prev = table[level - 1]
            left = prev[: m - span + 1]
            right = prev[half : half + m - span + 1]
            table.append(np.where(self.depths[left] <= self.depths[right], left, right))
            level += 1
        self.table = table
        self.probes = 0
        self.queries = 0

    def lca(self, a: int, b: int) -> int:
        lo = int(self.first[a])
        hi = int(self.first[b])
        self.probes += 2
        if lo > hi:
            lo, hi = hi, lo
        j = int(self.log[hi - lo + 1])
        left = int(self.table[j][lo])
        right = int(self.table[j][hi - (1 << j) + 1])
        self.probes += 3
        pick = left if self.depths[left] <= self.depths[right] else right
        self.probes += 1
        self.queries += 1
        return int(self.euler[pick])

    @property
    def probes_per_query(self) -> float:
        return self.probes / self.queries if self.queries else 0.0


@dataclass(eq=False)
class HstTree:
    labels: List[float]
    children: List[Tuple[int, ...]]
    leaf_point: List[Optional[int]]
    k: float = 1.0
    root: int = 0
    parent: List[int] = field(init=False)
    depth: List[int] = field(init=False)
    leaves_of: Dict[int, Tuple[int, ...]] = field(init=False)
    order: List[int] = field(init=False, repr=False)
    _index: Optional[LcaIndex] = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        size = len(self.labels)
        self.parent = [-1] * size
        self.depth = [0] * size
        order = [self.root]
        for node in order:
            for child in self.children[node]:
                self.parent[child] = node
                self.depth[child] = self.depth[node] + 1
                order.append(child)
        self.order = order
        registry: Dict[int, List[int]] = {}
        for node, point in enumerate(self.leaf_point):
            if point is not None:
                registry.setdefault(point, []).append(node)
        self.leaves_of = {point: tuple(handles) for point, handles in sorted(registry.items())}

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def points(self) -> Tuple[int, ...]:
        return tuple(self.leaves_of)

    @property
    def leaves(self) -> Tuple[int, ...]:
        return tuple(node for node, point in enumerate(self.leaf_point) if point is not None)

    @property
    def leaf_count(self) -> int:
        return sum(1 for point in self.leaf_point if point is not None)

    @property
    def root_label(self) -> float:
        return float(self.labels[self.root])

    @property
    def lca_index(self) -> LcaIndex:
        if self._index is None:
            self._index = LcaIndex(self.children, self.depth, self.root)
        return self._index

    def is_leaf(self, node: int) -> bool:
        return 0 <= node < self.size and self.leaf_point[node] is not None

    def leaf_of(self, point: int) -> int:
        handles = self.leaves_of.get(int(point))
        if not handles:
            raise UnknownPoint(f"point {point} has no leaf in this tree")
        return handles[0]

    def is_single_image(self) -> bool:
        return all(len(handles) == 1 for handles in self.leaves_of.values())

    def point_distance(self, x: int, y: int) -> float:
        if x == y:
            return 0.0
        return um_distance(self, self.leaf_of(x), self.leaf_of(y))


class TreeBuilder:
    """재귀(명시적 스택) 구성 중에 노드를 모았다가 전위 순서로 번호를 다시 매긴다."""

    def __init__(self, k: float = 1.0) -> None:
        self.k = k
        self._labels: List[float] = []
        self._children: List[Tuple[int, ...]] = []
        self._points: List[Optional[int]] = []

    def leaf(self, point: int) -> int:
        self._labels.append(0.0)
        self._children.append(())
        self._points.append(int(point))
        return len(self._labels) - 1

    def join(self, label: float, children: Sequence[int]) -> Optional[int]:
        """단항 노드는 만들지 않는다. 자식이 없으면 None."""

        kids = tuple(c for c in children if c is not None)
        if not kids:
            return None
        if len(kids) == 1:
            return kids[0]
        self._labels.append(float(label))
        self._children.append(kids)
        self._points.append(None)
        return len(self._labels) - 1

    def star(self, label: float, points: Sequence[int]) -> Optional[int]:
        return self.join(label, [self.leaf(p) for p in points])

    def build(self, root: int) -> HstTree:
        order: List[int] = []
        stack = [root]
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(reversed(self._children[node]))
        renumber = {old: new for new, old in enumerate(order)}
        return HstTree(
            labels=[self._labels[old] for old in order],
            children=[tuple(renumber[c] for c in self._children[old]) for old in order],
            leaf_point=[self._points[old] for old in order],
            k=self.k,
            root=0,
        )


def um_distance(tree: HstTree, a: int, b: int) -> float:
    """잎 핸들 a, b 의 트리 거리 Λ(lca(a,b))."""

    if not tree.is_leaf(a):
        raise ForeignLeaf(f"node {a} is not a leaf of this tree")
    if not tree.is_leaf(b):
        raise ForeignLeaf(f"node {b} is not a leaf of this tree")
    if a == b:
        return 0.0
    return float(tree.labels[tree.lca_index.lca(a, b)])


def naive_um_distance(tree: HstTree, a: int, b: int) -> float:
    """루트까지 걸어 올라가는 참조 구현."""

    if not tree.is_leaf(a) or not tree.is_leaf(b):
        raise ForeignLeaf(f"({a},{b}) are not both leaves of this tree")
    if a == b:
        return 0.0
    ancestors = set()
    node = a
    while node != -1:
        ancestors.add(node)
        node = tree.parent[node]
    node = b
    while node not in ancestors:
        node = tree.parent[node]
    return float(tree.labels[node])


def path_max_label(tree: HstTree, a: int, b: int) -> float:
    """두 잎 사이 트리 경로 위 노드 라벨의 최댓값."""

    best = 0.0
    x, y = a, b
    while x != y:
        if tree.depth[x] >= tree.depth[y]:
            best = max(best, tree.labels[x])
            x = tree.parent[x]
        else:
            best = max(best, tree.labels[y])
            y = tree.parent[y]
    return max(best, float(tree.labels[x])) if a != b else 0.0


def leaf_distance_matrix(tree: HstTree) -> Tuple[np.ndarray, np.ndarray]:
    """(잎 핸들 배열, 잎×잎 거리 행렬). 자식 쌍마다 블록을 한 번 채우므로 O(L^2)."""

    leaves = np.asarray(tree.leaves, dtype=np.int64)
    slot = {int(node): i for i, node in enumerate(leaves)}
    matrix = np.zeros((leaves.size, leaves.size))
    under: Dict[int, np.ndarray] = {}
    for node in reversed(tree.order):
        if tree.leaf_point[node] is not None:
            under[node] = np.asarray([slot[node]], dtype=np.int64)
            continue
        groups = [under.pop(child) for child in tree.children[node]]
        for left, right in itertools.combinations(groups, 2):
            matrix[np.ix_(left, right)] = tree.labels[node]
            matrix[np.ix_(right, left)] = tree.labels[node]
        under[node] = np.concatenate(groups) if groups else np.zeros(0, dtype=np.int64)
    return leaves, matrix


def ultrametric_matrix(tree: HstTree, n: int) -> np.ndarray:
    """점 id 기준 n×n 거리 행렬. 트리에 없는 점의 행/열은 NaN."""

    if not tree.is_single_image():
        raise InvalidParameters("ultrametric_matrix needs a tree with one leaf per point")
    leaves, leaf_matrix = leaf_distance_matrix(tree)
    ids = np.asarray([tree.leaf_point[int(node)] for node in leaves], dtype=np.int64)
    matrix = np.full((n, n), np.nan)
    matrix[np.ix_(ids, ids)] = leaf_matrix
    return matrix


def validate_hst(
    tree: HstTree,
    k: Optional[float] = None,
    *,
    exhaustive_limit: int = 64,
    samples: int = 20000,
    seed: int = 0,
) -> List[HstViolation]:
    """구조 규칙과 강삼각부등식 검사. 빈 리스트면 정상."""

    k = tree.k if k is None else float(k)
    found: List[HstViolation] = []
    for node in range(tree.size):
        label = tree.labels[node]
        kids = tree.children[node]
        if tree.leaf_point[node] is not None:
            if label != 0:
                found.append(HstViolation(node, "leaf-label", f"leaf label {label} != 0"))
            if kids:
                found.append(HstViolation(node, "leaf-children", f"leaf has {len(kids)} children"))
            continue
        if not label > 0:
            found.append(HstViolation(node, "internal-label", f"internal label {label} must be > 0"))
        if len(kids) == 0:
            found.append(HstViolation(node, "dangling", "internal node without children"))
        elif len(kids) == 1:
            found.append(HstViolation(node, "unary", "internal node with exactly one child"))
        for child in kids:
            if not tree.labels[child] <= label / k:
                found.append(
                    HstViolation(child, "label-decay", f"child label {tree.labels[child]} > parent label {label} / k={k}")
                )
    if found:
        return found

    leaves = tree.leaves
    if len(leaves) < 3:
        return found
    if len(leaves) <= exhaustive_limit:
        _, matrix = leaf_distance_matrix(tree)
        for mid in range(len(leaves)):
            bound = np.maximum(matrix[:, mid][:, None], matrix[mid, :][None, :])
            bad = np.argwhere(matrix > bound)
            if bad.size:
                i, j = (int(v) for v in bad[0])
                found.append(
                    HstViolation(
                        leaves[i],
                        "strong-triangle",
                        f"d({leaves[i]},{leaves[j]}) > max via {leaves[mid]}",
                    )
                )
                break
        return found

    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(leaves), size=(samples, 3))
    for i, j, m in picks:
        x, y, z = leaves[int(i)], leaves[int(j)], leaves[int(m)]
        if um_distance(tree, x, z) > max(um_distance(tree, x, y), um_distance(tree, y, z)):
            found.append(HstViolation(x, "strong-triangle", f"d({x},{z}) > max via {y}"))
            break
    return found


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def tree_to_dict(tree: HstTree) -> Dict[str, Any]:
    nodes = []
    for node in range(tree.size):
        record: Dict[str, Any] = {"id": node, "label": float(tree.labels[node])}
        if tree.leaf_point[node] is not None:
            record["leaf"] = int(tree.leaf_point[node])
        else:
            record["children"] = list(tree.children[node])
        nodes.append(record)
    k = tree.k
    return {"k": int(k) if float(k).is_integer() else k, "nodes": nodes, "root": tree.root}


def tree_from_dict(payload: Dict[str, Any]) -> HstTree:
    """직렬화된 트리를 그대로 복원한다(검증은 validate_hst 가 따로 한다)."""

    nodes = sorted(payload["nodes"], key=lambda item: int(item["id"]))
    ids = [int(item["id"]) for item in nodes]
    if ids != list(range(len(nodes))):
        raise InvalidParameters("tree node ids must be 0..N-1")
    labels = [float(item.get("label", 0.0)) for item in nodes]
    children = [tuple(int(c) for c in item.get("children", ())) for item in nodes]
    leaf_point = [None if item.get("leaf") is None else int(item["leaf"]) for item in nodes]
    seen = set()
    for kids in children:
        for child in kids:
            if not 0 <= child < len(nodes) or child in seen:
                raise InvalidParameters(f"tree child reference {child} is invalid or repeated")
            seen.add(child)
    root = int(payload.get("root", 0))
    if root in seen:
        raise InvalidParameters("root appears as a child")
    return HstTree(labels, children, leaf_point, k=float(payload.get("k", 1)), root=root)


def save_tree(tree: HstTree, path: Path) -> Path:
    write_json(path, tree_to_dict(tree))
    return path


def load_tree(path: Path) -> HstTree:
    return tree_from_dict(read_json(path))


def subtree_points(tree: HstTree, node: int) -> List[int]:
    points: List[int] = []
    stack = [node]
    while stack:
        current = stack.pop()
        point = tree.leaf_point[current]
        if point is not None:
            points.append(point)
        stack.extend(tree.children[current])
    return sorted(points)
