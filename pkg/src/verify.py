"""직렬화된 산출물만 보고 보장을 다시 확인한다.

구성 내부 상태에 접근하지 않는다. 입력은 artifact JSON(dict) 과 원래 거리공간뿐이다.
반환값은 위반 목록이며 비어 있으면 통과다.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .errors import RTOL, InputError, InvalidParameters, leq
from .metric import MetricSpace, WeightFunction, diameter
from .ramsey import partial_bound
from .ultrametric import HstTree, tree_from_dict, ultrametric_matrix, um_distance, validate_hst
from .utils import ceil_slack

logger = logging.getLogger(__name__)


@dataclass
class Violation:
    rule: str
    detail: str

    def to_dict(self) -> Dict[str, str]:
        return {"rule": self.rule, "detail": self.detail}


def _weights(payload: Dict[str, Any], n: int) -> WeightFunction:
    values = payload.get("weights")
    if values is None:
        return WeightFunction.unit(n)
    return WeightFunction(np.asarray(values, dtype=np.float64))


def _tree(payload: Dict[str, Any], found: List[Violation], exhaustive_limit: int, samples: int) -> Optional[HstTree]:
    try:
        tree = tree_from_dict(payload)
    except (InputError, KeyError, TypeError, ValueError) as exc:
        found.append(Violation("tree-format", str(exc)))
        return None
    for problem in validate_hst(tree, exhaustive_limit=exhaustive_limit, samples=samples):
        found.append(Violation(problem.rule, f"node {problem.node}: {problem.detail}"))
    return tree


def _pairs_within(groups: Iterable[Sequence[int]]) -> Set[Tuple[int, int]]:
    inside: Set[Tuple[int, int]] = set()
    for group in groups:
        members = sorted(group)
        for i, x in enumerate(members):
            for y in members[i + 1 :]:
                inside.add((x, y))
    return inside


def _max_node_t(payload: Dict[str, Any]) -> int:
    return max((int(record["t"]) for record in payload.get("per_node", []) if "t" in record), default=2)


def _check_ratios(
    space: MetricSpace,
    tree: HstTree,
    pairs: Sequence[Tuple[int, int]],
    bound: Optional[float],
    found: List[Violation],
    rtol: float,
) -> None:
    if not pairs:
        return
    um = ultrametric_matrix(tree, space.n)
    rows = np.asarray([p[0] for p in pairs], dtype=np.intp)
    cols = np.asarray([p[1] for p in pairs], dtype=np.intp)
    ratios = um[rows, cols] / space.matrix[rows, cols]
    if np.isnan(ratios).any():
        found.append(Violation("coverage", "a checked pair has a point missing from the tree"))
        return
    low = int(np.argmin(ratios))
    if not leq(1.0, float(ratios[low]), rtol):
        found.append(Violation("non-contraction", f"pair {pairs[low]} ratio {ratios[low]}"))
    high = int(np.argmax(ratios))
    if bound is not None and not leq(float(ratios[high]), bound, rtol):
        found.append(Violation("distortion", f"pair {pairs[high]} ratio {ratios[high]} > {bound}"))


def _verify_ramsey(payload: Dict[str, Any], space: MetricSpace, tree: HstTree, found: List[Violation], rtol: float) -> None:
    subspace = [int(x) for x in payload.get("subspace", [])]
    if sorted(tree.points) != sorted(subspace):
        found.append(Violation("subspace", "tree leaves differ from the recorded subspace"))
        return
    kind = payload.get("kind", "basic")
    pairs = [(x, y) for i, x in enumerate(sorted(subspace)) for y in sorted(subspace)[i + 1 :]]
    if kind == "basic":
        t = int(payload["params"]["t"])
        _check_ratios(space, tree, pairs, 8.0 * t, found, rtol)
        _check_certificate(payload, space, subspace, 1.0 - 1.0 / t, found, rtol)
    elif kind == "partial":
        t_p = int(payload["params"]["t_p"])
        starred = _pairs_within(payload.get("stars", []))
        _check_ratios(space, tree, [p for p in pairs if p not in starred], 8.0 * t_p, found, rtol)
        _check_ratios(space, tree, [p for p in pairs if p in starred], None, found, rtol)
    else:
        _check_ratios(space, tree, pairs, 8.0 * _max_node_t(payload), found, rtol)


def _check_certificate(
    payload: Dict[str, Any],
    space: MetricSpace,
    selected: Sequence[int],
    psi: float,
    found: List[Violation],
    rtol: float,
    ground: Optional[Sequence[int]] = None,
) -> None:
    weights = _weights(payload, space.n)
    ground = list(range(space.n)) if ground is None else list(ground)
    lhs = weights.power_sum(list(selected), psi)
    rhs = weights.of(ground) ** psi
    if not selected or not leq(rhs, lhs, rtol):
        found.append(Violation("certificate", f"sum w^psi = {lhs} < w(X)^psi = {rhs}"))
    if weights.is_unit and len(selected) < ceil_slack(len(ground) ** psi):
        found.append(Violation("size", f"|S|={len(selected)} < ceil(n^psi)"))


def _verify_embedding(payload: Dict[str, Any], space: MetricSpace, tree: HstTree, found: List[Violation], rtol: float) -> None:
    core = sorted(int(x) for x in payload.get("core", []))
    points = sorted(tree.points)
    if not set(core) <= set(points):
        found.append(Violation("core", "core contains points that are not leaves"))
        return
    core_set = set(core)
    pairs = [(x, y) for i, x in enumerate(points) for y in points[i + 1 :] if x in core_set or y in core_set]
    kind = payload.get("kind", "basic")
    if kind == "basic":
        t = int(payload["params"]["t"])
        _check_ratios(space, tree, pairs, 16.0 * t, found, rtol)
        _check_certificate(payload, space, core, 1.0 - 1.0 / t, found, rtol, ground=points)
    elif kind == "partial":
        starred = _pairs_within(payload.get("stars", []))
        bound = 16.0 * int(payload["params"]["t_p"])
        _check_ratios(space, tree, [p for p in pairs if p not in starred], bound, found, rtol)
        _check_ratios(space, tree, [p for p in pairs if p in starred], None, found, rtol)
    else:
        _check_ratios(space, tree, pairs, 16.0 * _max_node_t(payload), found, rtol)
    others = [(x, y) for i, x in enumerate(points) for y in points[i + 1 :] if x not in core_set and y not in core_set]
    _check_ratios(space, tree, others, None, found, rtol)


def _verify_multi(payload: Dict[str, Any], space: MetricSpace, tree: HstTree, found: List[Violation], rtol: float) -> None:
    missing = [x for x in range(space.n) if x not in tree.leaves_of]
    if missing:
        found.append(Violation("coverage", f"points without image: {missing[:10]}"))
        return
    t = int(payload.get("t", 2))
    bound = ceil_slack(space.n ** (1.0 + 1.0 / t))
    if tree.leaf_count > bound:
        found.append(Violation("leaf-count", f"{tree.leaf_count} leaves > {bound}"))
    for x in range(space.n):
        for y in range(x + 1, space.n):
            d = space.dist(x, y)
            for a in tree.leaves_of[x]:
                for b in tree.leaves_of[y]:
                    if not leq(d, um_distance(tree, a, b), rtol):
                        found.append(Violation("non-contraction", f"images ({a},{b}) of ({x},{y})"))
                        return
    for split in payload.get("splits", []):
        if 2 * int(split["q_size"]) > int(split["size"]):
            found.append(Violation("half-size", f"|Q|={split['q_size']} > |Z|/2, |Z|={split['size']}"))
        if not leq(float(split["q_diameter"]), float(split["lambda"]) / 4, rtol):
            found.append(Violation("split-diameter", f"diam(Q)={split['q_diameter']} > lambda/4"))


def _verify_bundle(payload: Dict[str, Any], space: MetricSpace, found: List[Violation], rtol: float) -> None:
    delta_hat = float(payload["delta_hat"])
    ground = {int(x) for x in payload.get("points") or range(space.n)}
    alive = set(ground)
    padded: Set[int] = set()
    for r, clusters in enumerate(payload.get("rounds", [])):
        seen: List[int] = []
        for cluster in clusters:
            members = [int(x) for x in cluster["members"]]
            seen.extend(members)
            if not leq(diameter(space, members), delta_hat, rtol):
                found.append(Violation("cluster-diameter", f"round {r}: diam > {delta_hat}"))
            others = np.asarray(sorted(ground - set(members)), dtype=np.intp)
            for x in cluster["core"]:
                gap = float(space.matrix[int(x), others].min()) if others.size else math.inf
                if not leq(float(cluster["eta"]) * delta_hat, gap, rtol):
                    found.append(Violation("padding", f"round {r}: point {x} gap {gap}"))
                if int(x) not in alive:
                    found.append(Violation("core-reuse", f"round {r}: point {x} was already padded"))
                padded.add(int(x))
        if len(seen) != len(ground) or set(seen) != ground:
            found.append(Violation("round-partition", f"round {r} does not partition the ground set"))
        alive -= {int(x) for cluster in clusters for x in cluster["core"]}
    if padded != ground:
        found.append(Violation("unpadded", f"{len(ground - padded)} points never padded"))


def _verify_cover(
    payload: Dict[str, Any],
    space: MetricSpace,
    found: List[Violation],
    rtol: float,
    exhaustive_limit: int,
    samples: int,
) -> None:
    builder = payload.get("builder", {})
    kind = builder.get("kind", "basic")
    layers = payload.get("layers", [])
    home = [int(h) for h in payload.get("home", [])]
    if len(home) != space.n:
        found.append(Violation("home", f"home table has {len(home)} entries for {space.n} points"))
        return
    expected = list(range(space.n))
    for i, layer in enumerate(layers):
        points = sorted(int(x) for x in layer.get("points", []))
        core = sorted(int(x) for x in layer.get("core", []))
        if points != expected:
            found.append(Violation("layer-nesting", f"layer {i} is not X_(i-1) minus the previous core"))
        if not core or not set(core) <= set(points):
            found.append(Violation("core", f"layer {i}: core empty or outside the layer"))
        if any(home[x] != i for x in core if 0 <= x < space.n):
            found.append(Violation("home", f"layer {i}: a core point has a different home layer"))
        tree = _tree(layer, found, exhaustive_limit, samples)
        if tree is None:
            continue
        if sorted(tree.points) != points:
            found.append(Violation("coverage", f"layer {i}: tree leaves differ from the layer points"))
            continue
        core_set = set(core)
        pairs = [(x, y) for j, x in enumerate(points) for y in points[j + 1 :] if x in core_set or y in core_set]
        if kind == "basic":
            _check_ratios(space, tree, pairs, 16.0 * int(builder.get("t", 2)), found, rtol)
        elif kind == "partial":
            starred = _pairs_within(layer.get("stars", []))
            bound = partial_bound(float(builder["delta"]), float(builder["epsilon"]), embedding=True)
            _check_ratios(space, tree, [p for p in pairs if p not in starred], bound, found, rtol)
            _check_ratios(space, tree, [p for p in pairs if p in starred], None, found, rtol)
        else:
            _check_ratios(space, tree, pairs, None, found, rtol)
        expected = [x for x in points if x not in core_set]
    if expected:
        found.append(Violation("home", f"{len(expected)} points never reach a core"))
    total = sum(len(layer.get("points", [])) for layer in layers)
    if int(payload.get("space", total)) != total:
        found.append(Violation("space", f"recorded space {payload.get('space')} != {total}"))
    if kind == "basic" and _weights(payload, space.n).is_unit:
        bound = space.n ** (1.0 + 1.0 / int(builder.get("t", 2)))
        if not leq(total, bound, rtol):
            found.append(Violation("cover-space", f"sum |X_i| = {total} > n^(1+1/t) = {bound:.3f}"))


def _verify_lpembed(payload: Dict[str, Any], space: MetricSpace, coords: Optional[np.ndarray], found: List[Violation], rtol: float) -> None:
    blocks = payload.get("blocks", [])
    dimension = int(payload.get("dimension", 0))
    if sum(int(block["width"]) for block in blocks) != dimension:
        found.append(Violation("dimension", "block widths do not add up to the dimension"))
    bits = int(math.ceil(math.log2(space.n))) if space.n > 1 else 0
    rounds = max((int(block["rounds"]) for block in blocks), default=0)
    if dimension > len(blocks) * rounds * bits:
        found.append(Violation("dimension", f"D={dimension} > scales*rounds*ceil(log2 n) = {len(blocks) * rounds * bits}"))
    if coords is None:
        return
    if coords.shape != (space.n, dimension):
        found.append(Violation("coordinates", f"shape {coords.shape} != ({space.n}, {dimension})"))
        return
    if not np.isfinite(coords).all():
        found.append(Violation("coordinates", "non-finite coordinate"))
        return
    p = math.inf if payload.get("p") == "inf" else float(payload.get("p", 2.0))
    bound = 2.0 if math.isinf(p) else 2.0 * max(len(blocks), 1) ** (1.0 / p)
    rows, cols = np.triu_indices(space.n, k=1)
    if rows.size == 0 or dimension == 0:
        return
    mapped = np.linalg.norm(coords[rows] - coords[cols], ord=p, axis=1)
    ratios = mapped / space.matrix[rows, cols]
    worst = int(np.argmax(ratios))
    if not leq(float(ratios[worst]), bound, rtol):
        found.append(Violation("expansion", f"pair ({rows[worst]},{cols[worst]}) ratio {ratios[worst]} > {bound}"))


def verify_artifact(
    payload: Dict[str, Any],
    space: MetricSpace,
    *,
    rtol: float = RTOL,
    exhaustive_limit: int = 64,
    samples: int = 20000,
    coords: Optional[np.ndarray] = None,
) -> List[Violation]:
    """coords 는 lpembed 보고서와 짝을 이루는 좌표 행렬(없으면 차원만 확인)."""

    artifact = payload.get("artifact")
    found: List[Violation] = []
    if artifact == "bundle":
        _verify_bundle(payload, space, found, rtol)
        return found
    if artifact == "cover":
        _verify_cover(payload, space, found, rtol, exhaustive_limit, samples)
        return found
    if artifact == "lpembed":
        _verify_lpembed(payload, space, coords, found, rtol)
        return found
    if artifact not in ("ramsey", "embedding", "multi"):
        raise InvalidParameters(f"cannot verify artifact type {artifact!r}")
    tree = _tree(payload, found, exhaustive_limit, samples)
    if tree is None or found:
        return found
    bad = [x for x in tree.points if not 0 <= x < space.n]
    if bad:
        found.append(Violation("foreign-point", f"leaves name points outside the metric: {bad[:10]}"))
        return found
    if artifact == "ramsey":
        _verify_ramsey(payload, space, tree, found, rtol)
    elif artifact == "embedding":
        _verify_embedding(payload, space, tree, found, rtol)
    else:
        _verify_multi(payload, space, tree, found, rtol)
    logger.debug("verify::verify_artifact :: artifact=%s violations=%d", artifact, len(found))
    return found
