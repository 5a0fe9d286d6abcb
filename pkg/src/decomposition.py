"""결정적 Ramsey 분해와 그 변형들.

decompose 는 중심 v* 와 껍질(shell) 번호 i* 를 모두 argmin 규칙으로 고른다(동률은 작은 id / 작은 번호).
증명된 부등식(선택 비율, 패딩, 지름, 가중치)은 호출마다 확인하고 깨지면 GuaranteeViolation 을 던진다.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DeltaOutOfRange,
    EmptyCore,
    EmptySubspace,
    InvalidDelta,
    InvalidParameters,
    RTOL,
    ensure_leq,
    leq,
)
from .metric import (
    MetricSpace,
    Subspace,
    WeightFunction,
    as_subspace,
    ball_weights,
    diameter,
    resolve_weights,
    spherical_weight,
)

logger = logging.getLogger(__name__)


@dataclass
class RamseyDecomposition:
    center: int
    index: int
    Q: Subspace
    Qbar: Subspace
    P: Subspace
    delta: float
    t: int
    realized_padding: float
    ground: Subspace
    core: Subspace
    radii: Tuple[float, ...] = ()
    shell_weights: Tuple[float, ...] = ()
    # decompose_half 에서만: 실제로 분해를 돌린 부분집합 X′ 와 그 안에서의 패딩
    window: Optional[Subspace] = None
    window_padding: Optional[float] = None

    @property
    def padding_bound(self) -> float:
        return self.delta / (4 * self.t)

    def to_dict(self) -> Dict[str, Any]:
        record = {
            "center": self.center,
            "index": self.index,
            "Q": list(self.Q),
            "Qbar": list(self.Qbar),
            "P": list(self.P),
            "delta": self.delta,
            "t": self.t,
            "realized_padding": self.realized_padding,
            "radii": list(self.radii),
            "shell_weights": list(self.shell_weights),
        }
        if self.window is not None:
            record["window"] = list(self.window)
            record["window_padding"] = self.window_padding
        return record


def min_distance(space: MetricSpace, left: Sequence[int], right: Sequence[int]) -> float:
    """d(A, B). 한쪽이 비면 +inf."""

    if len(left) == 0 or len(right) == 0:
        return math.inf
    block = space.matrix[np.ix_(np.asarray(left, dtype=np.intp), np.asarray(right, dtype=np.intp))]
    return float(block.min())


def shell_radii(delta: float, t: int) -> Tuple[float, ...]:
    return tuple((1.0 + i / t) * delta / 4.0 for i in range(t + 1))


def center_ratios(sub: np.ndarray, wc: np.ndarray, centers: np.ndarray, delta: float) -> np.ndarray:
    """후보 중심별 w_C(B(v,Δ/2)) / w_C(B(v,Δ/4))."""

    rows = sub[centers]
    outer = ball_weights(rows, delta / 2.0, wc)
    inner = ball_weights(rows, delta / 4.0, wc)
    if np.any(inner <= 0):
        raise EmptyCore("a candidate center carries no core weight")
    return outer / inner


def _argmin_center(sub: np.ndarray, wc: np.ndarray, centers: np.ndarray, delta: float) -> int:
    ratios = center_ratios(sub, wc, centers, delta)
    return int(centers[int(np.argmin(ratios))])


def select_center(
    space: MetricSpace,
    points: Sequence[int],
    delta: float,
    weights: Optional[WeightFunction] = None,
    core: Optional[Sequence[int]] = None,
) -> int:
    """decompose 와 같은 규칙으로 중심 v* 만 고른다(t 와 무관)."""

    weights = resolve_weights(space, weights)
    members = np.asarray(as_subspace(points, space.n), dtype=np.intp)
    sub = space.matrix[np.ix_(members, members)]
    if core is None:
        return int(members[_argmin_center(sub, weights.values[members], np.arange(members.size), delta)])
    in_core = np.isin(members, np.asarray(core, dtype=np.intp))
    pick = _argmin_center(sub, weights.values[members] * in_core, np.flatnonzero(in_core), delta)
    return int(members[pick])


def decompose(
    space: MetricSpace,
    points: Optional[Sequence[int]],
    delta: float,
    t: int,
    weights: Optional[WeightFunction] = None,
    core: Optional[Sequence[int]] = None,
    *,
    check: bool = True,
    rtol: float = RTOL,
) -> RamseyDecomposition:
    """points 위에서 (Q, Q̄, P) 를 만든다. core 가 주어지면 가중치는 core 에서만 센다."""

    ground = space.points() if points is None else as_subspace(points, space.n)
    if not ground:
        raise EmptySubspace("cannot decompose an empty subspace")
    t = int(t)
    if t < 2:
        raise InvalidParameters(f"t must be an integer >= 2, got {t}")
    diam = diameter(space, ground)
    if not (0 < delta <= diam / 2):
        raise DeltaOutOfRange(f"delta={delta} outside (0, diam/2={diam / 2}]")
    weights = resolve_weights(space, weights)
    if core is None:
        core_set = ground
    else:
        core_set = as_subspace(core, space.n)
        if not core_set:
            raise EmptyCore("core set is empty")
        if not set(core_set) <= set(ground):
            raise InvalidParameters("core must be a subset of the decomposed points")

    members = np.asarray(ground, dtype=np.intp)
    sub = space.matrix[np.ix_(members, members)]
    in_core = np.isin(members, np.asarray(core_set, dtype=np.intp))
    wc = weights.values[members] * in_core
    centers = np.flatnonzero(in_core)

    pick = _argmin_center(sub, wc, centers, delta)
    center = int(members[pick])

    radii = shell_radii(delta, t)
    row = sub[pick]
    shells = np.asarray([float(wc[row <= r].sum()) for r in radii])
    steps = shells[1:] / shells[:-1]
    index = int(np.argmin(steps)) + 1

    Q = tuple(int(x) for x in members[row <= radii[index]])
    inner = row <= radii[index - 1]
    P = tuple(int(x) for x in members[inner & in_core])
    Qbar = tuple(int(x) for x in members[row > radii[index]])
    padding = min_distance(space, P, Qbar)

    result = RamseyDecomposition(
        center=center,
        index=index,
        Q=Q,
        Qbar=Qbar,
        P=P,
        delta=float(delta),
        t=t,
        realized_padding=padding,
        ground=ground,
        core=core_set,
        radii=radii,
        shell_weights=tuple(float(w) for w in shells),
    )
    logger.debug(
        "decomposition::decompose :: n=%d center=%d index=%d |Q|=%d |P|=%d pad=%s",
        len(ground), center, index, len(Q), len(P), padding,
    )
    if check:
        _check_decomposition(space, result, weights, rtol)
    return result


def _check_decomposition(space: MetricSpace, result: RamseyDecomposition, weights: WeightFunction, rtol: float) -> None:
    shells = result.shell_weights
    t = result.t
    chosen = shells[result.index] / shells[result.index - 1]
    ensure_leq(chosen, (shells[-1] / shells[0]) ** (1.0 / t), "selection-ratio", f"index={result.index}", rtol)
    ensure_leq(result.padding_bound, result.realized_padding, "padding", "d(P,Qbar) >= delta/(4t)", rtol)
    ensure_leq(diameter(space, result.Q), result.delta, "diameter", "diam(Q) <= delta", rtol)

    restrict = None if result.core == result.ground else result.core
    bsize_x = spherical_weight(space, result.ground, weights, restrict=restrict)
    bsize_q = spherical_weight(space, result.Q, weights, restrict=restrict)
    core_set = set(result.core)
    w_q = weights.of([x for x in result.Q if x in core_set])
    w_p = weights.of(result.P)
    ensure_leq(w_q * (bsize_x / bsize_q) ** (-1.0 / t), w_p, "weight", "w(P) >= w(Q)(bsize(X)/bsize(Q))^(-1/t)", rtol)


def decompose_half(
    space: MetricSpace,
    points: Optional[Sequence[int]],
    delta: float,
    t: int,
    weights: Optional[WeightFunction] = None,
    *,
    check: bool = True,
    rtol: float = RTOL,
) -> RamseyDecomposition:
    """|Q| <= |X|/2 을 보장하는 변형. 지름 쌍의 한쪽 끝 열린 공 + 최근접 이웃 위에서 분해한다."""

    ground = space.points() if points is None else as_subspace(points, space.n)
    if len(ground) < 2:
        raise DeltaOutOfRange("half decomposition needs at least two points")
    members = np.asarray(ground, dtype=np.intp)
    sub = space.matrix[np.ix_(members, members)]
    diam = float(sub.max())
    if not (0 < delta <= diam / 4):
        raise DeltaOutOfRange(f"delta={delta} outside (0, diam/4={diam / 4}]")

    u_pos, v_pos = (int(i) for i in np.argwhere(sub == diam)[0])
    for end in (u_pos, v_pos):
        inside = sub[end] < diam / 2
        if inside.sum() * 2 <= len(ground):
            break
    outside = np.flatnonzero(~inside)
    nearest = int(outside[int(np.argmin(sub[end, outside]))])
    window = tuple(sorted(int(x) for x in np.append(members[inside], members[nearest])))

    local = decompose(space, window, delta, t, weights, check=check, rtol=rtol)
    q_set = set(local.Q)
    Qbar = tuple(x for x in ground if x not in q_set)
    result = RamseyDecomposition(
        center=local.center,
        index=local.index,
        Q=local.Q,
        Qbar=Qbar,
        P=local.P,
        delta=local.delta,
        t=local.t,
        realized_padding=min_distance(space, local.P, Qbar),
        ground=ground,
        core=ground,
        radii=local.radii,
        shell_weights=local.shell_weights,
        window=window,
        window_padding=local.realized_padding,
    )
    if check:
        ensure_leq(2 * len(result.Q), len(ground), "half-size", "|Q| <= |X|/2", rtol)
    logger.debug(
        "decomposition::decompose_half :: n=%d end=%d window=%d |Q|=%d",
        len(ground), int(members[end]), len(window), len(result.Q),
    )
    return result


# ---------------------------------------------------------------------------
# padded partition bundle
# ---------------------------------------------------------------------------

@dataclass
class Cluster:
    members: Subspace
    core: Subspace
    eta: float
    delta: float
    t: Optional[int] = None
    center: Optional[int] = None
    padding: float = math.inf

    def to_dict(self) -> Dict[str, Any]:
        return {
            "members": list(self.members),
            "core": list(self.core),
            "eta": self.eta,
            "delta": self.delta,
            "t": self.t,
            "center": self.center,
            "padding": self.padding,
        }


@dataclass
class PartitionBundle:
    delta_hat: float
    delta: float
    rounds: List[List[Cluster]] = field(default_factory=list)
    n: int = 0
    points: Subspace = ()

    @property
    def round_bound(self) -> int:
        return int(math.ceil(2 * math.log(max(self.n, 1)) / self.delta)) + 1

    def padded_home(self) -> Dict[int, Tuple[int, int]]:
        """점 -> 처음으로 코어에 들어간 (round, cluster)."""

        home: Dict[int, Tuple[int, int]] = {}
        for r, clusters in enumerate(self.rounds):
            for c, cluster in enumerate(clusters):
                for x in cluster.core:
                    home.setdefault(x, (r, c))
        return home

    def to_dict(self) -> Dict[str, Any]:
        return {
            "delta_hat": self.delta_hat,
            "delta": self.delta,
            "n": self.n,
            "round_bound": self.round_bound,
            "points": list(self.points),
            "rounds": [[cluster.to_dict() for cluster in clusters] for clusters in self.rounds],
        }


def bundle_eta(space: MetricSpace, alive: Sequence[int], center: int, delta_hat: float, delta: float, weights: WeightFunction) -> float:
    """η = min(log2(1/δ) / max(log2 R, 1), 1/8), R 은 중심의 Δ̂/2, Δ̂/4 공 가중치 비."""

    members = np.asarray(alive, dtype=np.intp)
    row = space.matrix[center, members]
    wvec = weights.values[members]
    ratio = float(wvec[row <= delta_hat / 2].sum() / wvec[row <= delta_hat / 4].sum())
    return min(math.log2(1.0 / delta) / max(math.log2(ratio), 1.0), 0.125)


def build_partition_bundle(
    space: MetricSpace,
    delta_hat: float,
    delta: float,
    weights: Optional[WeightFunction] = None,
    points: Optional[Sequence[int]] = None,
    *,
    rtol: float = RTOL,
) -> PartitionBundle:
    if not 0 < delta < 1:
        raise InvalidDelta(f"delta must lie in (0,1), got {delta}")
    if not delta_hat > 0:
        raise InvalidDelta(f"scale must be positive, got {delta_hat}")
    weights = resolve_weights(space, weights)
    ground = space.points() if points is None else as_subspace(points, space.n)
    alive = ground
    bundle = PartitionBundle(delta_hat=float(delta_hat), delta=float(delta), n=len(ground), points=ground)

    while alive:
        alive_set = set(alive)
        clusters: List[Cluster] = []
        remainder = ground
        while remainder:
            diam = diameter(space, remainder)
            if leq(diam, delta_hat, rtol):
                clusters.append(Cluster(members=remainder, core=(), eta=0.125, delta=float(delta_hat)))
                break
            step = min(delta_hat, diam / 2)
            live = tuple(x for x in remainder if x in alive_set) or None
            center = select_center(space, remainder, step, weights, core=live)
            eta = bundle_eta(space, remainder, center, delta_hat, delta, weights)
            t = max(2, int(math.ceil(1.0 / (4 * eta))))
            carved = decompose(space, remainder, step, t, weights, core=live, rtol=rtol)
            clusters.append(
                Cluster(
                    members=carved.Q,
                    core=(),
                    eta=step / (4 * t * delta_hat),
                    delta=step,
                    t=t,
                    center=carved.center,
                )
            )
            remainder = carved.Qbar

        removed = set()
        for cluster in clusters:
            inside = set(cluster.members)
            others = [x for x in ground if x not in inside]
            members = np.asarray(cluster.members, dtype=np.intp)
            if others:
                gaps = space.matrix[np.ix_(members, np.asarray(others, dtype=np.intp))].min(axis=1)
            else:
                gaps = np.full(members.size, math.inf)
            need = cluster.eta * delta_hat
            cluster.core = tuple(
                int(x) for x, gap in zip(members, gaps) if int(x) in alive_set and leq(need, float(gap), rtol)
            )
            cluster.padding = float(gaps[np.isin(members, cluster.core)].min()) if cluster.core else 0.0
            ensure_leq(diameter(space, cluster.members), delta_hat, "cluster-diameter", f"|C|={len(members)}", rtol)
            removed.update(cluster.core)
        if not removed:
            raise EmptyCore("bundle round removed no point")
        bundle.rounds.append(clusters)
        alive = tuple(x for x in alive if x not in removed)
        logger.debug(
            "decomposition::build_partition_bundle :: round=%d clusters=%d removed=%d alive=%d",
            len(bundle.rounds), len(clusters), len(removed), len(alive),
        )
    return bundle


def bundle_report(space: MetricSpace, bundle: PartitionBundle) -> Dict[str, Any]:
    """padding / 지름 / 라운드 수를 다시 센다(라운드 수는 보고만)."""

    home = bundle.padded_home()
    missing = [x for x in (bundle.points or space.points()) if x not in home]
    worst_diam = max(
        (diameter(space, cluster.members) for clusters in bundle.rounds for cluster in clusters),
        default=0.0,
    )
    return {
        "rounds": len(bundle.rounds),
        "round_bound": bundle.round_bound,
        "rounds_ok": len(bundle.rounds) <= bundle.round_bound,
        "max_cluster_diameter": worst_diam,
        "unpadded_points": missing,
        "clusters": sum(len(clusters) for clusters in bundle.rounds),
    }
