"""전체 공간 X 위의 초거리 + 코어(core) 부분공간. 코어 점과 임의 점 사이의 왜곡이 유계다.

상태 (Z, C(Z)) 에서 C(Z) 로 가중치를 제한해 분해하고
R = {x ∈ Z : d(x,P) <= η·Δ/2} (η = 1/(4t)) 를 떼어
(R, P) 와 (Z∖R, Q̄ ∩ C) 로 내려간다. 루트 라벨은 diam(Z).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .decomposition import decompose
from .errors import RTOL, InvalidParameters, ensure_leq, leq
from .metric import MetricSpace, Subspace, WeightFunction, diameter, resolve_weights, spherical_weight
from .ramsey import (
    NodeRecord,
    ScalingSchedule,
    achieved_psi,
    check_fraction,
    partial_bound,
    partial_t,
    scaling_level,
    scaling_t_at,
    star_pair_fraction,
)
from .ultrametric import HstTree, TreeBuilder, tree_to_dict, ultrametric_matrix
from .utils import Step, ceil_slack, unfold

logger = logging.getLogger(__name__)


@dataclass
class RamseyEmbedding:
    kind: str
    tree: HstTree
    core: Subspace
    params: Dict[str, Any]
    n: int
    psi: float = 0.0
    per_node: List[NodeRecord] = field(default_factory=list)
    stars: List[Subspace] = field(default_factory=list)
    checks: Dict[str, Any] = field(default_factory=dict)

    @property
    def bound(self) -> float:
        return float(self.checks.get("distortion_bound", math.inf))

    def to_dict(self) -> Dict[str, Any]:
        payload = tree_to_dict(self.tree)
        payload.update(
            {
                "artifact": "embedding",
                "kind": self.kind,
                "n": self.n,
                "core": list(self.core),
                "psi": self.psi,
                "params": self.params,
                "per_node": [record.to_dict() for record in self.per_node],
                "stars": [list(star) for star in self.stars],
                "checks": self.checks,
            }
        )
        return payload


@dataclass
class _Built:
    handle: Optional[int]
    core: Subspace


def _separation(space: MetricSpace, left: Sequence[int], right: Sequence[int]) -> float:
    if len(left) == 0 or len(right) == 0:
        return math.inf
    return float(space.matrix[np.ix_(np.asarray(left), np.asarray(right))].min())


def _embed(
    space: MetricSpace,
    weights: WeightFunction,
    choose_t: Callable[[Subspace, Subspace], Tuple[int, Optional[float]]],
    freeze: Callable[[Subspace], bool],
    per_node_psi: Optional[float],
    points: Optional[Subspace],
    rtol: float,
) -> Tuple[HstTree, Subspace, List[NodeRecord], List[Subspace]]:
    builder = TreeBuilder()
    records: List[NodeRecord] = []
    stars: List[Subspace] = []
    ground = space.points() if points is None else points

    def expand(state: Tuple[Subspace, Subspace]) -> Step:
        zone, core = state
        if not zone:
            return Step(value=_Built(None, ()))
        diam = diameter(space, zone)
        if not core:
            # 코어가 없는 구역: 보장할 쌍이 없으므로 비축소 별(star)로 충분하다.
            records.append(NodeRecord(size=len(zone), star=True, delta=diam / 2))
            return Step(value=_Built(builder.star(diam, zone), ()))
        if len(zone) == 1:
            records.append(NodeRecord(size=1, selected=1))
            return Step(value=_Built(builder.leaf(zone[0]), core))
        if freeze(zone):
            stars.append(zone)
            records.append(NodeRecord(size=len(zone), star=True, selected=len(core), delta=diam / 2))
            return Step(value=_Built(builder.star(diam, zone), core))

        delta = diam / 2
        t, level = choose_t(zone, core)
        part = decompose(space, zone, delta, t, weights, core=core, rtol=rtol)
        eta = 1.0 / (4 * t)
        reach = eta * delta / 2
        members = np.asarray(zone, dtype=np.intp)
        near = space.matrix[np.ix_(members, np.asarray(part.P, dtype=np.intp))].min(axis=1) <= reach
        inner = tuple(int(x) for x in members[near])
        outer = tuple(int(x) for x in members[~near])
        stray = set(inner) - set(part.Q)
        ensure_leq(len(stray), 0, "ring-inside-Q", "R must lie inside Q", rtol)

        core_set = set(core)
        inner_core = part.P
        outer_core = tuple(x for x in part.Qbar if x in core_set)
        ensure_leq(reach, _separation(space, inner_core, outer), "separation-inner", f"|Z|={len(zone)}", rtol)
        ensure_leq(reach, _separation(space, outer_core, inner), "separation-outer", f"|Z|={len(zone)}", rtol)

        record = NodeRecord(
            size=len(zone),
            t=t,
            delta=delta,
            padding=part.realized_padding,
            center=part.center,
            level=level,
            eta=eta,
            mass=weights.of(core),
        )
        records.append(record)

        def combine(values: List[_Built]) -> _Built:
            left, right = values
            merged = tuple(sorted(left.core + right.core))
            record.selected = len(merged)
            record.selected_mass = weights.of(merged)
            worst = min(_separation(space, left.core, outer), _separation(space, right.core, inner))
            if math.isfinite(worst):
                ensure_leq(diam, 16 * t * worst, "distortion", f"core-vs-all split of {len(zone)} points, t={t}", rtol)
            if per_node_psi is not None:
                bsize = spherical_weight(space, zone, weights, restrict=core)
                rhs = weights.of(core) * bsize ** (per_node_psi - 1.0)
                ensure_leq(rhs, weights.power_sum(merged, per_node_psi), "size-induction", f"|Z|={len(zone)}", rtol)
            return _Built(builder.join(diam, [left.handle, right.handle]), merged)

        return Step(children=[(inner, inner_core), (outer, outer_core)], combine=combine)

    root = unfold((ground, ground), expand)
    return builder.build(root.handle), root.core, records, stars


def ramsey_embed(
    space: MetricSpace,
    t: int,
    weights: Optional[WeightFunction] = None,
    *,
    points: Optional[Sequence[int]] = None,
    rtol: float = RTOL,
) -> RamseyEmbedding:
    """코어 x 와 모든 y 에 대해 d <= d_U <= 16t·d. 코어 크기 >= n^{1-1/t} (단위 가중치)."""

    t = int(t)
    if t < 2:
        raise InvalidParameters(f"t must be an integer >= 2, got {t}")
    weights = resolve_weights(space, weights)
    ground = space.points() if points is None else tuple(sorted(points))
    psi = 1.0 - 1.0 / t
    tree, core, records, stars = _embed(
        space,
        weights,
        choose_t=lambda zone, core: (t, None),
        freeze=lambda zone: False,
        per_node_psi=psi,
        points=ground,
        rtol=rtol,
    )
    lhs = weights.power_sum(core, psi)
    rhs = weights.of(ground) ** psi
    ensure_leq(rhs, lhs, "certificate", "sum w^psi over core >= w(X)^psi", rtol)
    logger.debug("embedding::ramsey_embed :: n=%d t=%d |core|=%d", len(ground), t, len(core))
    return RamseyEmbedding(
        kind="basic",
        tree=tree,
        core=core,
        params={"t": t},
        n=len(ground),
        psi=psi,
        per_node=records,
        stars=stars,
        checks={
            "certificate": {"ok": True, "lhs": lhs, "rhs": rhs, "psi": psi},
            "distortion_bound": 16 * t,
            "size_bound": ceil_slack(len(ground) ** psi) if weights.is_unit else None,
        },
    )


def partial_ramsey_embed(
    space: MetricSpace,
    delta: float,
    eps: float,
    weights: Optional[WeightFunction] = None,
    *,
    points: Optional[Sequence[int]] = None,
    rtol: float = RTOL,
) -> RamseyEmbedding:
    t_p = partial_t(delta, eps)
    weights = resolve_weights(space, weights)
    ground = space.points() if points is None else tuple(sorted(points))
    cutoff = eps * weights.of(ground)
    tree, core, records, stars = _embed(
        space,
        weights,
        choose_t=lambda zone, core: (t_p, None),
        freeze=lambda zone: weights.of(zone) <= cutoff,
        per_node_psi=None,
        points=ground,
        rtol=rtol,
    )
    fraction = star_pair_fraction(stars, len(ground))
    if weights.is_unit:
        ensure_leq(fraction, eps, "star-fraction", f"{len(stars)} stars over n={len(ground)}", rtol)
    size_target = delta * weights.of(ground)
    return RamseyEmbedding(
        kind="partial",
        tree=tree,
        core=core,
        params={"delta": delta, "epsilon": eps, "t_p": t_p},
        n=len(ground),
        psi=achieved_psi(core, weights, total=weights.of(ground)),
        per_node=records,
        stars=stars,
        checks={
            "distortion_bound": partial_bound(delta, eps, embedding=True),
            "star_pair_fraction": fraction,
            "star_pair_fraction_ok": leq(fraction, eps, rtol),
            "size": weights.of(core),
            "size_target": size_target,
            "size_ok": leq(size_target, weights.of(core), rtol),
        },
    )


def scaling_ramsey_embed(
    space: MetricSpace,
    delta: float,
    schedule: ScalingSchedule,
    weights: Optional[WeightFunction] = None,
    *,
    points: Optional[Sequence[int]] = None,
    rtol: float = RTOL,
) -> RamseyEmbedding:
    delta = check_fraction(delta, "delta")
    weights = resolve_weights(space, weights)
    ground = space.points() if points is None else tuple(sorted(points))
    total = weights.of(ground)

    def choose(zone: Subspace, core: Subspace) -> Tuple[int, float]:
        level = scaling_level(total, spherical_weight(space, zone, weights, restrict=core), delta)
        return scaling_t_at(schedule, level), level

    tree, core, records, stars = _embed(
        space, weights, choose_t=choose, freeze=lambda zone: False, per_node_psi=None, points=ground, rtol=rtol
    )
    size_target = delta * total
    return RamseyEmbedding(
        kind="scaling",
        tree=tree,
        core=core,
        params={"delta": delta, "schedule": schedule.describe()},
        n=len(ground),
        psi=achieved_psi(core, weights, total=weights.of(ground)),
        per_node=records,
        stars=stars,
        checks={
            "size": weights.of(core),
            "size_target": size_target,
            "size_ok": leq(size_target, weights.of(core), rtol),
        },
    )


def core_distortions(space: MetricSpace, embedding: RamseyEmbedding) -> np.ndarray:
    """코어 x, 트리의 다른 모든 y 에 대한 d_U(x,y)/d(x,y) (중복 쌍은 한 번씩)."""

    points = np.asarray(embedding.tree.points, dtype=np.intp)
    um = ultrametric_matrix(embedding.tree, space.n)[np.ix_(points, points)]
    base = space.matrix[np.ix_(points, points)]
    in_core = np.isin(points, np.asarray(embedding.core, dtype=np.intp))
    rows, cols = np.triu_indices(points.size, k=1)
    keep = in_core[rows] | in_core[cols]
    return um[rows[keep], cols[keep]] / base[rows[keep], cols[keep]]
