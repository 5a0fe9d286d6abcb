"""초거리로 임베딩되는 큰 부분공간 S 의 재귀 구성(기본 / 부분 / 스케일링).

재귀는 utils.unfold 의 명시적 스택으로 돌린다. 각 분할 노드에서
- 왼쪽 P, 오른쪽 Q̄ 로 내려가고
- 돌아오면서 S(Z) = S(P) ∪ S(Q̄), 루트 라벨 diam(S(Z)) 로 묶는다.
교차 쌍의 왜곡 상한(8t)은 분할마다 확인한다.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .decomposition import decompose
from .errors import RTOL, InvalidFraction, InvalidParameters, InvalidSchedule, ensure_leq, leq
from .metric import MetricSpace, Subspace, WeightFunction, diameter, resolve_weights, spherical_weight
from .ultrametric import HstTree, TreeBuilder, tree_to_dict, ultrametric_matrix
from .utils import Step, ceil_slack, log_base, unfold

logger = logging.getLogger(__name__)

SCHEDULE_TOLERANCE = 1e-6


# ---------------------------------------------------------------------------
# ϑ 스케줄
# ---------------------------------------------------------------------------

@dataclass
class ScalingSchedule:
    """성장 함수 ϑ. 적분 ∫_1^∞ dx/ϑ(x) 는 치환 변수 u 에서 scipy quad 로 계산한다.

    초심자 팁: log-square 처럼 꼬리가 1/ln 으로 느리게 줄어드는 경우 x 그대로 적분하면
    부동소수 범위 안에서 수렴하지 않으므로 각 계열이 자기 치환(to_var, kernel)을 갖는다.
    """

    name: str
    theta: Callable[[float], float]
    to_var: Callable[[float], float]
    kernel: Callable[[float], float]
    params: Dict[str, Any] = field(default_factory=dict)
    integral: float = field(init=False)

    def __post_init__(self) -> None:
        self.integral = self.tail(1.0)
        if not abs(self.integral - 1.0) <= SCHEDULE_TOLERANCE:
            raise InvalidSchedule(f"schedule {self.name}: integral of 1/theta over [1,inf) is {self.integral}, not 1")

    def __call__(self, x: float) -> float:
        return float(self.theta(x))

    def tail(self, lower: float) -> float:
        """∫_lower^∞ dx/ϑ(x)."""

        value, _ = integrate.quad(self.kernel, self.to_var(max(lower, 1.0)), math.inf, limit=200)
        return float(value)

    def describe(self) -> Dict[str, Any]:
        return {"name": self.name, **self.params, "integral": self.integral}

    @classmethod
    def power(cls, p: float, name: Optional[str] = None) -> "ScalingSchedule":
        p = float(p)
        if not p > 1:
            raise InvalidSchedule(f"power schedule needs p > 1, got {p}")
        # x = e^s 치환: dx/ϑ = (p-1) e^{(1-p)s} ds
        return cls(
            name=name or f"power:{p:g}",
            theta=lambda x: x**p / (p - 1.0),
            to_var=math.log,
            kernel=lambda s: (p - 1.0) * math.exp((1.0 - p) * s),
            params={"p": p},
        )

    @classmethod
    def square(cls) -> "ScalingSchedule":
        return cls.power(2.0, name="square")

    @classmethod
    def log_square(cls) -> "ScalingSchedule":
        shift = math.e - 1.0
        # u = ln(x + e - 1): dx/ϑ = du/u^2
        return cls(
            name="log-square",
            theta=lambda x: (x + shift) * math.log(x + shift) ** 2,
            to_var=lambda x: math.log(x + shift),
            kernel=lambda u: 1.0 / (u * u),
        )

    @classmethod
    def from_name(cls, name: str, p: Optional[float] = None) -> "ScalingSchedule":
        key = str(name).strip().lower().replace("_", "-")
        if key in ("square", "x2", "x^2"):
            return cls.square()
        if key in ("log-square", "logsquare", "log2"):
            return cls.log_square()
        match = re.fullmatch(r"power(?:[:(\s]\s*([0-9.eE+-]+)\)?)?", key)
        if match:
            value = match.group(1)
            if value is None and p is None:
                raise InvalidSchedule("power schedule needs an exponent, e.g. power:3")
            try:
                return cls.power(float(value) if value is not None else float(p))
            except ValueError as exc:
                raise InvalidSchedule(f"bad power exponent in {name!r}") from exc
        raise InvalidSchedule(f"unknown schedule {name!r}; expected square, log-square or power:P")


# ---------------------------------------------------------------------------
# 파라미터 / 상한
# ---------------------------------------------------------------------------

def check_fraction(value: float, name: str) -> float:
    value = float(value)
    if not 0 < value < 1:
        raise InvalidFraction(f"{name} must lie in (0,1), got {value}")
    return value


def partial_t(delta: float, eps: float) -> int:
    """t_p = max(2, ⌈log_{1/δ}(1/ε)⌉)."""

    delta = check_fraction(delta, "delta")
    eps = check_fraction(eps, "epsilon")
    return max(2, ceil_slack(log_base(1.0 / eps, 1.0 / delta)))


def partial_bound(delta: float, eps: float, embedding: bool = False) -> float:
    return (16 if embedding else 8) * partial_t(delta, eps)


def scaling_level(total: float, bsize: float, delta: float) -> float:
    """ℓ(Z) = max(log_{1/δ}(w(X)/bsize(Z)), 1)."""

    return max(log_base(total / bsize, 1.0 / delta), 1.0)


def scaling_t_at(schedule: ScalingSchedule, level: float) -> int:
    return max(2, ceil_slack(schedule(level)))


def scaling_t(schedule: ScalingSchedule, delta: float, eps: float) -> int:
    delta = check_fraction(delta, "delta")
    if not 0 < eps <= 1:
        raise InvalidFraction(f"epsilon must lie in (0,1], got {eps}")
    return scaling_t_at(schedule, max(1.0, log_base(2.0 / eps, 1.0 / delta)))


def scaling_bound(schedule: ScalingSchedule, delta: float, eps: float, embedding: bool = False) -> float:
    return max(4.0, (16 if embedding else 8) * scaling_t(schedule, delta, eps))


def lq_bound(schedule: ScalingSchedule, delta: float, q: float) -> int:
    """ℓ_q 왜곡의 점근 형태 ⌈ϑ(log_{1/δ} q)⌉ (상수 생략, 보고용)."""

    level = max(1.0, log_base(max(q, 1.0 / delta), 1.0 / delta))
    return int(math.ceil(schedule(level)))


# ---------------------------------------------------------------------------
# 결과 타입
# ---------------------------------------------------------------------------

@dataclass
class NodeRecord:
    size: int
    t: Optional[int] = None
    delta: Optional[float] = None
    padding: Optional[float] = None
    star: bool = False
    center: Optional[int] = None
    level: Optional[float] = None
    eta: Optional[float] = None
    selected: int = 0
    mass: Optional[float] = None
    selected_mass: Optional[float] = None
    invariant_ok: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"size": self.size, "star": self.star, "selected": self.selected}
        for key in ("t", "delta", "padding", "center", "level", "eta", "mass", "selected_mass", "invariant_ok"):
            value = getattr(self, key)
            if value is not None:
                record[key] = value
        return record


@dataclass
class RamseyResult:
    kind: str
    subspace: Subspace
    tree: HstTree
    psi: float
    params: Dict[str, Any]
    n: int
    per_node: List[NodeRecord] = field(default_factory=list)
    stars: List[Subspace] = field(default_factory=list)
    checks: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        payload = tree_to_dict(self.tree)
        payload.update(
            {
                "artifact": "ramsey",
                "kind": self.kind,
                "n": self.n,
                "subspace": list(self.subspace),
                "psi": self.psi,
                "params": self.params,
                "per_node": [record.to_dict() for record in self.per_node],
                "stars": [list(star) for star in self.stars],
                "checks": self.checks,
            }
        )
        return payload


@dataclass
class CertificateCheck:
    ok: bool
    lhs: float
    rhs: float
    psi: float
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"ok": self.ok, "lhs": self.lhs, "rhs": self.rhs, "psi": self.psi, "detail": self.detail}


def verify_weighted_certificate(
    subspace: Sequence[int],
    weights: WeightFunction,
    psi: float,
    rtol: float = RTOL,
    total: Optional[float] = None,
) -> CertificateCheck:
    """Σ_{y∈S} w(y)^ψ >= (Σ_x w(x))^ψ. 예외를 던지지 않고 결과만 돌려준다."""

    lhs = weights.power_sum(list(subspace), psi)
    rhs = (weights.total if total is None else total) ** psi
    ok = leq(rhs, lhs, rtol) and len(subspace) > 0
    detail = "" if ok else f"sum w^psi over S = {lhs} < w(X)^psi = {rhs}"
    return CertificateCheck(ok=ok, lhs=lhs, rhs=rhs, psi=psi, detail=detail)


def achieved_psi(subspace: Sequence[int], weights: WeightFunction, iterations: int = 60, total: Optional[float] = None) -> float:
    """인증서가 성립하는 가장 큰 ψ ∈ [0,1] (이분 탐색)."""

    if not subspace:
        return 0.0
    if verify_weighted_certificate(subspace, weights, 1.0, rtol=0.0, total=total).ok:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if verify_weighted_certificate(subspace, weights, mid, rtol=0.0, total=total).ok:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# 공통 재귀
# ---------------------------------------------------------------------------

@dataclass
class _Built:
    handle: Optional[int]
    selected: Subspace
    diam: float


def _merge(space: MetricSpace, left: _Built, right: _Built) -> Tuple[Subspace, float, float]:
    """(합친 S, diam(S), 교차 최소거리)."""

    merged = tuple(sorted(left.selected + right.selected))
    if not left.selected or not right.selected:
        return merged, max(left.diam, right.diam), math.inf
    block = space.matrix[np.ix_(np.asarray(left.selected), np.asarray(right.selected))]
    return merged, max(left.diam, right.diam, float(block.max())), float(block.min())


def _construct(
    space: MetricSpace,
    weights: WeightFunction,
    choose_t: Callable[[Subspace], Tuple[int, Optional[float]]],
    freeze: Callable[[Subspace], bool],
    per_node_psi: Optional[float],
    rtol: float,
) -> Tuple[HstTree, Subspace, List[NodeRecord], List[Subspace]]:
    builder = TreeBuilder()
    records: List[NodeRecord] = []
    stars: List[Subspace] = []

    def expand(points: Subspace) -> Step:
        if not points:
            return Step(value=_Built(None, (), 0.0))
        if len(points) == 1:
            records.append(NodeRecord(size=1, selected=1))
            return Step(value=_Built(builder.leaf(points[0]), points, 0.0))
        if freeze(points):
            diam = diameter(space, points)
            stars.append(points)
            records.append(NodeRecord(size=len(points), star=True, selected=len(points)))
            return Step(value=_Built(builder.star(diam, points), points, diam))

        t, level = choose_t(points)
        delta = diameter(space, points) / 2
        part = decompose(space, points, delta, t, weights, rtol=rtol)
        record = NodeRecord(
            size=len(points),
            t=t,
            delta=delta,
            padding=part.realized_padding,
            center=part.center,
            level=level,
            mass=weights.of(points),
        )
        records.append(record)

        def combine(values: List[_Built]) -> _Built:
            left, right = values
            merged, diam, cross = _merge(space, left, right)
            if math.isfinite(cross):
                ensure_leq(diam, 8 * t * cross, "distortion", f"split of {len(points)} points, t={t}", rtol)
            record.selected = len(merged)
            record.selected_mass = weights.of(merged)
            if per_node_psi is not None:
                bsize = spherical_weight(space, points, weights)
                lhs = weights.power_sum(merged, per_node_psi)
                ensure_leq(weights.of(points) * bsize ** (per_node_psi - 1.0), lhs, "size-induction", f"|Z|={len(points)}", rtol)
            return _Built(builder.join(diam, [left.handle, right.handle]), merged, diam)

        return Step(children=[part.P, part.Qbar], combine=combine)

    root = unfold(space.points(), expand)
    tree = builder.build(root.handle)
    return tree, root.selected, records, stars


# ---------------------------------------------------------------------------
# 공개 연산
# ---------------------------------------------------------------------------

def ramsey_subspace(
    space: MetricSpace,
    t: int,
    weights: Optional[WeightFunction] = None,
    *,
    rtol: float = RTOL,
) -> RamseyResult:
    """모든 쌍 왜곡 <= 8t 인 부분공간. Σ w^{1-1/t}(S) >= w(X)^{1-1/t} 를 보장한다."""

    t = int(t)
    if t < 2:
        raise InvalidParameters(f"t must be an integer >= 2, got {t}")
    weights = resolve_weights(space, weights)
    psi = 1.0 - 1.0 / t
    tree, selected, records, stars = _construct(
        space,
        weights,
        choose_t=lambda points: (t, None),
        freeze=lambda points: False,
        per_node_psi=psi,
        rtol=rtol,
    )
    certificate = verify_weighted_certificate(selected, weights, psi, rtol)
    if not certificate.ok:
        ensure_leq(certificate.rhs, certificate.lhs, "certificate", certificate.detail, rtol)
    logger.debug("ramsey::ramsey_subspace :: n=%d t=%d |S|=%d", space.n, t, len(selected))
    return RamseyResult(
        kind="basic",
        subspace=selected,
        tree=tree,
        psi=psi,
        params={"t": t},
        n=space.n,
        per_node=records,
        stars=stars,
        checks={
            "certificate": certificate.to_dict(),
            "distortion_bound": 8 * t,
            "size_bound": ceil_slack(space.n**psi) if weights.is_unit else None,
        },
    )


def star_pair_fraction(stars: Sequence[Subspace], n: int) -> float:
    pairs = n * (n - 1) / 2
    inside = sum(len(star) * (len(star) - 1) / 2 for star in stars)
    return inside / pairs if pairs else 0.0


def partial_ramsey(
    space: MetricSpace,
    delta: float,
    eps: float,
    weights: Optional[WeightFunction] = None,
    *,
    rtol: float = RTOL,
) -> RamseyResult:
    """w(Z) <= ε·w(X) 인 재귀 노드는 별(star)로 얼린다. 별 밖의 쌍만 8·t_p 왜곡 보장."""

    t_p = partial_t(delta, eps)
    weights = resolve_weights(space, weights)
    cutoff = eps * weights.total
    tree, selected, records, stars = _construct(
        space,
        weights,
        choose_t=lambda points: (t_p, None),
        freeze=lambda points: weights.of(points) <= cutoff,
        per_node_psi=None,
        rtol=rtol,
    )
    fraction = star_pair_fraction(stars, space.n)
    if weights.is_unit:
        ensure_leq(fraction, eps, "star-fraction", f"{len(stars)} stars over n={space.n}", rtol)
    size_target = delta * weights.total
    logger.debug("ramsey::partial_ramsey :: n=%d t_p=%d |S|=%d stars=%d", space.n, t_p, len(selected), len(stars))
    return RamseyResult(
        kind="partial",
        subspace=selected,
        tree=tree,
        psi=achieved_psi(selected, weights),
        params={"delta": delta, "epsilon": eps, "t_p": t_p},
        n=space.n,
        per_node=records,
        stars=stars,
        checks={
            "distortion_bound": partial_bound(delta, eps),
            "star_pair_fraction": fraction,
            "star_pair_fraction_ok": leq(fraction, eps, rtol),
            "size": weights.of(selected),
            "size_target": size_target,
            "size_ok": leq(size_target, weights.of(selected), rtol),
        },
    )


def scaling_ramsey(
    space: MetricSpace,
    delta: float,
    schedule: ScalingSchedule,
    weights: Optional[WeightFunction] = None,
    *,
    rtol: float = RTOL,
) -> RamseyResult:
    """노드마다 t_Z = max(2, ⌈ϑ(ℓ(Z))⌉) 로 분해하는 스케일링 구성."""

    delta = check_fraction(delta, "delta")
    weights = resolve_weights(space, weights)
    total = weights.total

    def choose(points: Subspace) -> Tuple[int, float]:
        level = scaling_level(total, spherical_weight(space, points, weights), delta)
        return scaling_t_at(schedule, level), level

    tree, selected, records, stars = _construct(
        space, weights, choose_t=choose, freeze=lambda points: False, per_node_psi=None, rtol=rtol
    )
    failures = _scaling_node_audit(space, weights, records, schedule, delta, rtol)
    size_target = delta * total
    logger.debug("ramsey::scaling_ramsey :: n=%d schedule=%s |S|=%d", space.n, schedule.name, len(selected))
    return RamseyResult(
        kind="scaling",
        subspace=selected,
        tree=tree,
        psi=achieved_psi(selected, weights),
        params={"delta": delta, "schedule": schedule.describe()},
        n=space.n,
        per_node=records,
        stars=stars,
        checks={
            "size": weights.of(selected),
            "size_target": size_target,
            "size_ok": leq(size_target, weights.of(selected), rtol),
            "node_invariant_failures": failures,
        },
    )


def _scaling_node_audit(
    space: MetricSpace,
    weights: WeightFunction,
    records: List[NodeRecord],
    schedule: ScalingSchedule,
    delta: float,
    rtol: float,
) -> int:
    """분할 노드마다 w(S(Z)) >= w(Z)·δ^{∫_{ℓ(Z)}^∞ dx/ϑ} 를 확인하고 실패 수를 센다(보고만)."""

    failures = 0
    for record in records:
        if record.level is None or record.selected_mass is None:
            continue
        bound = record.mass * delta ** schedule.tail(record.level)
        record.invariant_ok = leq(bound, record.selected_mass, rtol)
        failures += 0 if record.invariant_ok else 1
    return failures


def pair_distortions(space: MetricSpace, tree: HstTree, points: Sequence[int]) -> np.ndarray:
    """points 의 모든 쌍에 대한 d_U / d (상삼각, id 순)."""

    idx = np.asarray(points, dtype=np.intp)
    um = ultrametric_matrix(tree, space.n)[np.ix_(idx, idx)]
    base = space.matrix[np.ix_(idx, idx)]
    upper = np.triu_indices(idx.size, k=1)
    return um[upper] / base[upper]
