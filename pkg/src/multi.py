"""점 하나를 여러 잎으로 보내는 multi-embedding.

각 분할에서 decompose_half 로 (Q, P) 를 얻고 Q 와 Z∖P 로 내려간다. Q∖P 의 점은 양쪽 가지에 모두
들어가므로 잎이 중복된다. 경로 길이는 상(image) 집합 위의 DP 로 잰다.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .decomposition import decompose_half, min_distance
from .errors import RTOL, EmptyPath, InvalidFraction, UnknownPoint, leq
from .metric import MetricSpace, Subspace, WeightFunction, aspect_ratio, diameter, resolve_weights
from .ultrametric import HstTree, TreeBuilder, tree_to_dict, um_distance
from .utils import Step, ceil_slack, unfold

logger = logging.getLogger(__name__)


@dataclass
class SplitRecord:
    size: int
    q_size: int
    p_size: int
    lam: float
    q_diameter: float
    gap: float
    eps: float

    @property
    def half_ok(self) -> bool:
        return 2 * self.q_size <= self.size

    @property
    def diameter_ok(self) -> bool:
        return leq(self.q_diameter, self.lam / 4)

    @property
    def gap_ok(self) -> bool:
        return leq(self.eps / 64 * self.lam, self.gap)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "size": self.size,
            "q_size": self.q_size,
            "p_size": self.p_size,
            "lambda": self.lam,
            "q_diameter": self.q_diameter,
            "gap": self.gap,
        }


@dataclass
class MultiEmbedding:
    tree: HstTree
    eps: float
    t: int
    n: int
    splits: List[SplitRecord] = field(default_factory=list)

    def images(self, x: int) -> tuple:
        handles = self.tree.leaves_of.get(int(x))
        if not handles:
            raise UnknownPoint(f"point {x} has no image")
        return handles

    @property
    def leaf_bound(self) -> int:
        return ceil_slack(self.n ** (1.0 + 1.0 / self.t))

    def audit(self) -> Dict[str, Any]:
        return {
            "leaves": self.tree.leaf_count,
            "leaf_bound": self.leaf_bound,
            "leaf_ok": self.tree.leaf_count <= self.leaf_bound,
            "splits": len(self.splits),
            "half_failures": sum(not s.half_ok for s in self.splits),
            "diameter_failures": sum(not s.diameter_ok for s in self.splits),
            "gap_failures": sum(not s.gap_ok for s in self.splits),
        }

    def to_dict(self) -> Dict[str, Any]:
        payload = tree_to_dict(self.tree)
        payload.update(
            {
                "artifact": "multi",
                "epsilon": self.eps,
                "t": self.t,
                "n": self.n,
                "images": {str(x): list(h) for x, h in self.tree.leaves_of.items()},
                "splits": [split.to_dict() for split in self.splits],
                "audit": self.audit(),
            }
        )
        return payload


def build_multi_embedding(
    space: MetricSpace,
    eps: float,
    weights: Optional[WeightFunction] = None,
    *,
    rtol: float = RTOL,
) -> MultiEmbedding:
    if not 0 < eps <= 1:
        raise InvalidFraction(f"epsilon must lie in (0,1], got {eps}")
    weights = resolve_weights(space, weights)
    t = max(2, ceil_slack(1.0 / eps))
    builder = TreeBuilder()
    splits: List[SplitRecord] = []

    def expand(zone: Subspace) -> Step:
        if len(zone) == 1:
            return Step(value=builder.leaf(zone[0]))
        lam = diameter(space, zone)
        part = decompose_half(space, zone, lam / 4, t, weights, rtol=rtol)
        p_set = set(part.P)
        rest = tuple(x for x in zone if x not in p_set)
        splits.append(
            SplitRecord(
                size=len(zone),
                q_size=len(part.Q),
                p_size=len(part.P),
                lam=lam,
                q_diameter=diameter(space, part.Q),
                gap=min_distance(space, part.P, part.Qbar),
                eps=eps,
            )
        )
        return Step(children=[part.Q, rest], combine=lambda handles: builder.join(lam, handles))

    root = unfold(space.points(), expand)
    result = MultiEmbedding(tree=builder.build(root), eps=float(eps), t=t, n=space.n, splits=splits)
    logger.debug("multi::build_multi_embedding :: n=%d t=%d leaves=%d", space.n, t, result.tree.leaf_count)
    return result


def min_image_path_length(me: MultiEmbedding, path: Sequence[int]) -> float:
    """경로의 각 점을 상 중 하나로 골랐을 때 트리 위 길이의 최소값."""

    if len(path) < 2:
        raise EmptyPath("a path needs at least two points")
    tree = me.tree
    previous = me.images(path[0])
    cost = np.zeros(len(previous))
    for point in path[1:]:
        current = me.images(point)
        step = np.empty((len(previous), len(current)))
        for i, a in enumerate(previous):
            for j, b in enumerate(current):
                step[i, j] = 0.0 if a == b else um_distance(tree, a, b)
        cost = (cost[:, None] + step).min(axis=0)
        previous = current
    return float(cost.min())


def sample_paths(n: int, count: int, max_len: int, seed: int) -> List[List[int]]:
    """연속 중복 없는 난수 경로. 길이는 2..max_len."""

    if n < 2:
        return []
    rng = np.random.default_rng(seed)
    paths: List[List[int]] = []
    for _ in range(count):
        length = int(rng.integers(2, max(2, max_len) + 1))
        path = [int(rng.integers(0, n))]
        for _ in range(length - 1):
            nxt = int(rng.integers(0, n - 1))
            path.append(nxt + 1 if nxt >= path[-1] else nxt)
        paths.append(path)
    return paths


def path_length(space: MetricSpace, path: Sequence[int]) -> float:
    ids = np.asarray(path, dtype=np.intp)
    return float(space.matrix[ids[:-1], ids[1:]].sum())


def path_guardrail(space: MetricSpace, eps: float) -> float:
    scale = min(math.log2(max(space.n, 2)), math.log2(aspect_ratio(space)))
    return 256.0 * max(scale, 1.0) / eps


def path_distortion_report(
    me: MultiEmbedding,
    space: MetricSpace,
    *,
    count: int = 100,
    max_len: int = 5,
    seed: int = 1,
    rtol: float = RTOL,
) -> Dict[str, Any]:
    ratios = []
    for path in sample_paths(space.n, count, max_len, seed):
        ratios.append(min_image_path_length(me, path) / path_length(space, path))
    values = np.asarray(ratios, dtype=np.float64)
    guardrail = path_guardrail(space, me.eps)
    report: Dict[str, Any] = {
        "paths": int(values.size),
        "seed": seed,
        "max_len": max_len,
        "guardrail": guardrail,
        "audit": me.audit(),
    }
    if values.size:
        report.update(
            {
                "max": float(values.max()),
                "mean": float(values.mean()),
                "quantiles": {str(q): float(np.quantile(values, q)) for q in (0.5, 0.9, 0.99)},
                "non_contracting": bool((values >= 1.0 - rtol).all()),
                "within_guardrail": bool((values <= guardrail).all()),
            }
        )
    return report
