"""왜곡 측정: 최악/평균/ℓ_q, partial, scaling 곡선, k-local, 그리고 분해의 전수 재구현."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .decomposition import RamseyDecomposition, decompose
from .errors import RTOL, GuaranteeViolation, InvalidFraction, KOutOfRange, NotNonExpansive, ZeroDistancePair, ensure_leq, leq
from .metric import MetricSpace, WeightFunction, knn_radius, resolve_weights

logger = logging.getLogger(__name__)

Accessor = Callable[[int, int], float]
Pair = Tuple[int, int]


def all_pairs(n: int) -> List[Pair]:
    return [(x, y) for x in range(n) for y in range(x + 1, n)]


@dataclass
class DistortionReport:
    max_ratio: float
    min_ratio: float
    worst: float
    average: float
    lq: Dict[str, float]
    pairs: int
    mode: str = "general"
    universe: str = "all"
    worst_pair: Optional[Pair] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "max_ratio": self.max_ratio,
            "min_ratio": self.min_ratio,
            "worst": self.worst,
            "average": self.average,
            "lq": self.lq,
            "pairs": self.pairs,
            "mode": self.mode,
            "universe": self.universe,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
        }


def pair_ratios(space: MetricSpace, accessor: Accessor, pairs: Optional[Sequence[Pair]] = None) -> Tuple[List[Pair], np.ndarray]:
    pairs = list(pairs) if pairs is not None else all_pairs(space.n)
    ratios = np.empty(len(pairs))
    for i, (x, y) in enumerate(pairs):
        d = space.dist(x, y)
        if d <= 0:
            raise ZeroDistancePair(f"pair ({x},{y}) has zero distance")
        ratios[i] = accessor(x, y) / d
    return pairs, ratios


def report_from_ratios(
    ratios: Sequence[float],
    q_list: Iterable[float] = (1, 2),
    *,
    non_contractive: bool = False,
    universe: str = "all",
    pairs: Optional[Sequence[Pair]] = None,
    rtol: float = RTOL,
) -> DistortionReport:
    """비율 r 에서 쌍별 왜곡은 max(r, 1/r) (일반) 또는 r (비축소 모드)."""

    values = np.asarray(ratios, dtype=np.float64)
    if values.size == 0:
        return DistortionReport(1.0, 1.0, 1.0, 1.0, {str(q): 1.0 for q in q_list}, 0, universe=universe)
    if non_contractive:
        dist = values
    else:
        with np.errstate(divide="ignore"):
            dist = np.maximum(values, np.where(values > 0, 1.0 / values, math.inf))
    lq: Dict[str, float] = {}
    previous = 0.0
    for q in sorted(float(q) for q in q_list):
        value = float(dist.max()) if math.isinf(q) else float(np.mean(dist**q) ** (1.0 / q))
        # 거듭제곱 평균은 q 에 대해 단조
        ensure_leq(previous, value, "lq-monotone", f"q={q}", rtol)
        previous = value
        lq[_q_key(q)] = value
    max_ratio = float(values.max())
    min_ratio = float(values.min())
    worst = max_ratio if non_contractive else (max_ratio / min_ratio if min_ratio > 0 else math.inf)
    worst_at = int(np.argmax(dist))
    return DistortionReport(
        max_ratio=max_ratio,
        min_ratio=min_ratio,
        worst=worst,
        average=float(dist.mean()),
        lq=lq,
        pairs=int(values.size),
        mode="non-contractive" if non_contractive else "general",
        universe=universe,
        worst_pair=tuple(pairs[worst_at]) if pairs is not None else None,
    )


def _q_key(q: float) -> str:
    if math.isinf(q):
        return "inf"
    return str(int(q)) if float(q).is_integer() else repr(q)


def distortion_report(
    space: MetricSpace,
    accessor: Accessor,
    q_list: Iterable[float] = (1, 2),
    *,
    non_contractive: bool = False,
    pairs: Optional[Sequence[Pair]] = None,
    universe: str = "all",
    rtol: float = RTOL,
) -> DistortionReport:
    pairs, ratios = pair_ratios(space, accessor, pairs)
    report = report_from_ratios(ratios, q_list, non_contractive=non_contractive, universe=universe, pairs=pairs, rtol=rtol)
    logger.debug("analysis::distortion_report :: pairs=%d worst=%s", report.pairs, report.worst)
    return report


def core_pairs(n: int, core: Sequence[int]) -> List[Pair]:
    """(core × X) 쌍 universe. 두 끝이 모두 코어인 쌍은 한 번만."""

    core_set = set(core)
    return [(x, y) for x, y in all_pairs(n) if x in core_set or y in core_set]


def subspace_pairs(subspace: Sequence[int]) -> List[Pair]:
    members = sorted(subspace)
    return [(x, y) for i, x in enumerate(members) for y in members[i + 1 :]]


# ---------------------------------------------------------------------------
# partial
# ---------------------------------------------------------------------------

def partial_from_values(values: Sequence[float], eps: float) -> Dict[str, Any]:
    """정렬된 쌍별 왜곡의 ⌈(1−ε)m⌉ 번째 값."""

    if not 0 < eps < 1:
        raise InvalidFraction(f"eps must lie in (0,1), got {eps}")
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    m = int(ordered.size)
    if m == 0:
        return {"bound": 1.0, "excluded": 0, "pairs": 0, "epsilon": eps}
    k = max(1, int(math.ceil((1.0 - eps) * m - 1e-9)))
    return {"bound": float(ordered[k - 1]), "excluded": m - k, "pairs": m, "epsilon": eps}


def partial_report(
    space: MetricSpace,
    accessor: Accessor,
    eps: float,
    *,
    non_contractive: bool = True,
    pairs: Optional[Sequence[Pair]] = None,
) -> Dict[str, Any]:
    _, ratios = pair_ratios(space, accessor, pairs)
    if non_contractive:
        values = ratios
    else:
        values = np.maximum(ratios, 1.0 / ratios)
    return partial_from_values(values, eps)


# ---------------------------------------------------------------------------
# scaling curve
# ---------------------------------------------------------------------------

@dataclass
class ScalingCurve:
    """쌍마다 τ(u,v) = min(w(B(u,d)), w(B(v,d)))/w(X) 와 실현 왜곡. G_ε = {τ >= ε/2}."""

    pairs: List[Pair] = field(default_factory=list)
    tau: np.ndarray = field(default_factory=lambda: np.zeros(0))
    distortion: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def threshold(self, index: int) -> float:
        """이 쌍이 G_ε 에 들어가는 가장 큰 ε."""

        return min(1.0, 2.0 * float(self.tau[index]))

    def members(self, eps: float) -> np.ndarray:
        return np.asarray([leq(eps / 2.0, float(t)) for t in self.tau], dtype=bool)

    def at(self, eps: float) -> Optional[float]:
        mask = self.members(eps)
        if not mask.any():
            return None
        return float(self.distortion[mask].max())

    def steps(self) -> List[Tuple[float, float]]:
        """(ε 문턱, 그 ε 에서의 곡선 값) 을 ε 내림차순으로."""

        order = np.argsort(-self.tau, kind="stable")
        out: List[Tuple[float, float]] = []
        running = 0.0
        for i in order:
            running = max(running, float(self.distortion[i]))
            eps = self.threshold(int(i))
            if out and out[-1][0] == eps:
                out[-1] = (eps, running)
            else:
                out.append((eps, running))
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pairs": [list(p) for p in self.pairs],
            "tau": self.tau.tolist(),
            "distortion": self.distortion.tolist(),
            "steps": [list(step) for step in self.steps()],
        }


def scaling_curve(
    space: MetricSpace,
    accessor: Accessor,
    weights: Optional[WeightFunction] = None,
    *,
    pairs: Optional[Sequence[Pair]] = None,
) -> ScalingCurve:
    weights = resolve_weights(space, weights)
    pairs, ratios = pair_ratios(space, accessor, pairs)
    total = weights.of(space.points())
    tau = np.empty(len(pairs))
    for i, (x, y) in enumerate(pairs):
        d = space.dist(x, y)
        wx = float(weights.values[space.matrix[x] <= d].sum())
        wy = float(weights.values[space.matrix[y] <= d].sum())
        tau[i] = min(wx, wy) / total
    return ScalingCurve(pairs=pairs, tau=tau, distortion=ratios)


# ---------------------------------------------------------------------------
# k-local
# ---------------------------------------------------------------------------

def local_distortion(
    space: MetricSpace,
    accessor: Accessor,
    core: Sequence[int],
    k: int,
    *,
    rtol: float = RTOL,
) -> float:
    """mapped(x,y) >= min(d(x,y), r_k(x))/α 를 만족하는 최소 α (x ∈ core, y ∈ X)."""

    if not 1 <= k <= space.n:
        raise KOutOfRange(f"k={k} outside 1..{space.n}")
    alpha = 1.0
    for x, y in all_pairs(space.n):
        if not leq(accessor(x, y), space.dist(x, y), rtol):
            raise NotNonExpansive(f"pair ({x},{y}) is stretched")
    for x in sorted(set(core)):
        radius = knn_radius(space, x, k)
        for y in range(space.n):
            if y == x:
                continue
            need = min(space.dist(x, y), radius)
            if need <= 0:
                continue
            mapped = accessor(x, y)
            if mapped <= 0:
                return math.inf
            alpha = max(alpha, need / mapped)
    return alpha


# ---------------------------------------------------------------------------
# brute force
# ---------------------------------------------------------------------------

@dataclass
class BruteForceResult:
    ok: bool
    mismatches: List[str] = field(default_factory=list)
    expected: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"ok": self.ok, "mismatches": self.mismatches, "expected": self.expected}


def _ball_mass(space: MetricSpace, v: int, r: float, members: Sequence[int], mass: Dict[int, float]) -> float:
    total = 0.0
    for y in members:
        if space.dist(v, y) <= r:
            total += mass[y]
    return total


def _bsize(space: MetricSpace, members: Sequence[int], mass: Dict[int, float], centers: Sequence[int]) -> float:
    diam = max((space.dist(a, b) for a in members for b in members), default=0.0)
    return max((_ball_mass(space, c, diam / 4, members, mass) for c in centers), default=0.0)


def brute_force_check(
    space: MetricSpace,
    delta: float,
    t: int,
    weights: Optional[WeightFunction] = None,
    core: Optional[Sequence[int]] = None,
    *,
    points: Optional[Sequence[int]] = None,
    rtol: float = RTOL,
) -> BruteForceResult:
    """분해를 반복문만으로 다시 계산해 decompose 결과와 비교하고 부등식을 전수로 확인한다."""

    weights = resolve_weights(space, weights)
    ground = sorted(points) if points is not None else list(range(space.n))
    core_list = sorted(core) if core is not None else list(ground)
    core_set = set(core_list)
    mass = {x: (float(weights.values[x]) if x in core_set else 0.0) for x in ground}
    result = BruteForceResult(ok=True)

    best_v, best_ratio = None, math.inf
    for v in core_list:
        ratio = _ball_mass(space, v, delta / 2, ground, mass) / _ball_mass(space, v, delta / 4, ground, mass)
        if ratio < best_ratio:
            best_v, best_ratio = v, ratio
    radii = [(1 + i / t) * delta / 4 for i in range(t + 1)]
    shells = [_ball_mass(space, best_v, r, ground, mass) for r in radii]
    best_i, best_step = None, math.inf
    for i in range(1, t + 1):
        step = shells[i] / shells[i - 1]
        if step < best_step:
            best_i, best_step = i, step
    Q = tuple(y for y in ground if space.dist(best_v, y) <= radii[best_i])
    P = tuple(y for y in Q if y in core_set and space.dist(best_v, y) <= radii[best_i - 1])
    Qbar = tuple(y for y in ground if y not in Q)
    result.expected = {"center": best_v, "index": best_i, "Q": list(Q), "P": list(P), "Qbar": list(Qbar)}

    try:
        actual: RamseyDecomposition = decompose(space, ground, delta, t, weights, core=core, check=True, rtol=rtol)
    except GuaranteeViolation as exc:
        result.ok = False
        result.mismatches.append(f"decompose raised {exc.rule}")
        return result
    for name, want, got in (
        ("center", best_v, actual.center),
        ("index", best_i, actual.index),
        ("Q", Q, actual.Q),
        ("P", P, actual.P),
        ("Qbar", Qbar, actual.Qbar),
    ):
        if want != got:
            result.mismatches.append(f"{name}: expected {want}, got {got}")

    def expect(rule: str, lhs: float, rhs: float) -> None:
        if not leq(lhs, rhs, rtol):
            result.mismatches.append(f"{rule}: {lhs} > {rhs}")

    expect("selection-ratio", best_step, (shells[-1] / shells[0]) ** (1.0 / t))
    padding = min((space.dist(a, b) for a in P for b in Qbar), default=math.inf)
    expect("padding", delta / (4 * t), padding)
    expect("diameter", max((space.dist(a, b) for a in Q for b in Q), default=0.0), delta)
    centers_x = core_list
    centers_q = [y for y in Q if y in core_set]
    bsize_x = _bsize(space, ground, mass, centers_x)
    bsize_q = _bsize(space, list(Q), mass, centers_q)
    w_q = sum(mass[y] for y in Q)
    w_p = sum(mass[y] for y in P)
    expect("weight", w_q * (bsize_x / bsize_q) ** (-1.0 / t), w_p)
    result.ok = not result.mismatches
    return result
