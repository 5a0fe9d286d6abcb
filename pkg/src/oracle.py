"""Ramsey cover 와 O(1) 질의 거리 오라클.

X_0 = X 에서 시작해 임베딩 빌더를 반복 적용하고 코어 Z_i 를 떼어 X_{i+1} = X_i ∖ Z_i 로 줄인다.
점 x 의 home(x) 는 x 가 코어에 처음 들어간 층이다. 질의 (x, y) 는 층 min(home(x), home(y)) 에서
두 잎의 LCA 라벨을 읽는다.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .embedding import RamseyEmbedding, partial_ramsey_embed, ramsey_embed, scaling_ramsey_embed
from .errors import RTOL, EmptyCore, InvalidParameters, UnknownPoint, ensure_leq
from .metric import MetricSpace, Subspace, WeightFunction, resolve_weights
from .ramsey import ScalingSchedule, partial_bound, scaling_bound
from .ultrametric import HstTree, naive_um_distance, tree_from_dict, tree_to_dict
from .utils import ensure_dir, read_json, write_json

logger = logging.getLogger(__name__)

TABLE_DTYPE = np.dtype("<u4")


@dataclass(frozen=True)
class BuilderSpec:
    """cover 가 층마다 돌릴 임베딩 빌더."""

    kind: str = "basic"
    t: int = 2
    delta: float = 0.5
    epsilon: float = 0.1
    schedule: str = "square"

    def __post_init__(self) -> None:
        if self.kind not in ("basic", "partial", "scaling"):
            raise InvalidParameters(f"unknown builder {self.kind!r}")

    def embed(self, space: MetricSpace, weights: WeightFunction, points: Sequence[int], rtol: float = RTOL) -> RamseyEmbedding:
        if self.kind == "basic":
            return ramsey_embed(space, self.t, weights, points=points, rtol=rtol)
        if self.kind == "partial":
            return partial_ramsey_embed(space, self.delta, self.epsilon, weights, points=points, rtol=rtol)
        return scaling_ramsey_embed(space, self.delta, ScalingSchedule.from_name(self.schedule), weights, points=points, rtol=rtol)

    @property
    def alpha(self) -> Optional[float]:
        """모든 (코어, 임의) 쌍에 걸리는 상한. scaling 은 ε 마다 다르므로 None."""

        if self.kind == "basic":
            return float(16 * self.t)
        if self.kind == "partial":
            return float(partial_bound(self.delta, self.epsilon, embedding=True))
        return None

    def average_guardrail(self) -> Optional[float]:
        if self.kind != "scaling":
            return None
        # log_{1/δ}(2/ε) <= 2 구간의 상한 8·⌈ϑ(2)⌉
        return float(8 * math.ceil(ScalingSchedule.from_name(self.schedule)(2.0)))

    def to_dict(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"kind": self.kind}
        if self.kind == "basic":
            record["t"] = self.t
        elif self.kind == "partial":
            record.update({"delta": self.delta, "epsilon": self.epsilon})
        else:
            record.update({"delta": self.delta, "schedule": self.schedule})
        return record

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "BuilderSpec":
        return cls(
            kind=payload.get("kind", "basic"),
            t=int(payload.get("t", 2)),
            delta=float(payload.get("delta", 0.5)),
            epsilon=float(payload.get("epsilon", 0.1)),
            schedule=str(payload.get("schedule", "square")),
        )


@dataclass
class CoverLayer:
    points: Subspace
    core: Subspace
    tree: HstTree
    stars: List[Subspace] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        payload = tree_to_dict(self.tree)
        payload.update({"points": list(self.points), "core": list(self.core), "stars": [list(star) for star in self.stars]})
        return payload


@dataclass
class RamseyCover:
    layers: List[CoverLayer]
    home: np.ndarray
    builder: BuilderSpec
    n: int

    @property
    def space(self) -> int:
        return int(sum(len(layer.points) for layer in self.layers))

    def mass(self, s: float) -> float:
        """Σ_i |Z_i|^s."""

        return float(sum(len(layer.core) ** s for layer in self.layers))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "artifact": "cover",
            "builder": self.builder.to_dict(),
            "n": self.n,
            "space": self.space,
            "home": self.home.tolist(),
            "layers": [layer.to_dict() for layer in self.layers],
        }


def build_cover(
    space: MetricSpace,
    builder: BuilderSpec,
    weights: Optional[WeightFunction] = None,
    *,
    rtol: float = RTOL,
) -> RamseyCover:
    weights = resolve_weights(space, weights)
    remaining: Subspace = space.points()
    home = np.full(space.n, -1, dtype=np.int64)
    layers: List[CoverLayer] = []
    while remaining:
        embedding = builder.embed(space, weights, remaining, rtol)
        if not embedding.core:
            raise EmptyCore(f"layer {len(layers)} produced an empty core")
        home[np.asarray(embedding.core, dtype=np.intp)] = len(layers)
        layers.append(CoverLayer(points=remaining, core=embedding.core, tree=embedding.tree, stars=list(embedding.stars)))
        core = set(embedding.core)
        remaining = tuple(x for x in remaining if x not in core)
        logger.debug("oracle::build_cover :: layer=%d |X_i|=%d |Z_i|=%d", len(layers) - 1, len(layers[-1].points), len(core))
    cover = RamseyCover(layers=layers, home=home, builder=builder, n=space.n)
    if builder.kind == "basic" and weights.is_unit:
        bound = space.n ** (1.0 + 1.0 / builder.t)
        ensure_leq(cover.space, bound, "cover-space", f"sum |X_i| <= n^(1+1/t), n={space.n}", rtol)
    return cover


class DistanceOracle:
    """층별 트리 + 점별 잎 핸들 표. 질의 비용은 n 과 무관한 상수 번의 표 접근이다."""

    def __init__(
        self,
        trees: List[HstTree],
        home: np.ndarray,
        offsets: np.ndarray,
        handles: np.ndarray,
        builder: BuilderSpec,
        layer_points: Optional[List[Subspace]] = None,
        layer_cores: Optional[List[Subspace]] = None,
        layer_stars: Optional[List[List[Subspace]]] = None,
    ) -> None:
        self.trees = trees
        self.home = np.asarray(home, dtype=np.int64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.handles = np.asarray(handles, dtype=np.int64)
        self.builder = builder
        self.layer_points = layer_points or [tree.points for tree in trees]
        self.layer_cores = layer_cores or []
        self.layer_stars = layer_stars or [[] for _ in trees]
        self._star_of = [{x: s for s, star in enumerate(stars) for x in star} for stars in self.layer_stars]
        self.n = int(self.home.size)
        self.probes = 0
        self.queries = 0
        self.same_point_queries = 0
        self.build_seconds = 0.0

    @property
    def alpha(self) -> Optional[float]:
        return self.builder.alpha

    @property
    def space(self) -> int:
        return int(self.handles.size)

    @property
    def layers(self) -> int:
        return len(self.trees)

    @property
    def probes_per_query(self) -> float:
        lca = sum(tree.lca_index.probes for tree in self.trees if tree._index is not None)
        return (self.probes + lca) / self.queries if self.queries else 0.0

    def _check(self, x: int) -> int:
        x = int(x)
        if not 0 <= x < self.n:
            raise UnknownPoint(f"point {x} outside 0..{self.n - 1}")
        return x

    def layer_of(self, x: int, y: int) -> int:
        return int(min(self.home[x], self.home[y]))

    def shares_star(self, x: int, y: int) -> bool:
        """질의 층에서 x, y 가 같은 얼린 별 안에 있으면 True (α 보장 밖의 쌍)."""

        stars = self._star_of[self.layer_of(x, y)]
        return x in stars and stars.get(x) == stars.get(y)

    def query(self, x: int, y: int) -> float:
        x, y = self._check(x), self._check(y)
        if x == y:
            self.same_point_queries += 1
            return 0.0
        layer = min(int(self.home[x]), int(self.home[y]))
        a = int(self.handles[self.offsets[x] + layer])
        b = int(self.handles[self.offsets[y] + layer])
        tree = self.trees[layer]
        label = float(tree.labels[tree.lca_index.lca(a, b)])
        self.probes += 5
        self.queries += 1
        return label

    def reference_query(self, x: int, y: int) -> float:
        """같은 층에서 루트까지 걸어 올라가는 참조 답."""

        x, y = self._check(x), self._check(y)
        if x == y:
            return 0.0
        layer = self.layer_of(x, y)
        tree = self.trees[layer]
        return naive_um_distance(tree, tree.leaf_of(x), tree.leaf_of(y))


def oracle_from_cover(cover: RamseyCover) -> DistanceOracle:
    counts = cover.home + 1
    offsets = np.zeros(cover.n + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(counts)
    handles = np.zeros(int(offsets[-1]), dtype=np.int64)
    for x in range(cover.n):
        for layer in range(int(cover.home[x]) + 1):
            handles[offsets[x] + layer] = cover.layers[layer].tree.leaf_of(x)
    return DistanceOracle(
        trees=[layer.tree for layer in cover.layers],
        home=cover.home,
        offsets=offsets,
        handles=handles,
        builder=cover.builder,
        layer_points=[layer.points for layer in cover.layers],
        layer_cores=[layer.core for layer in cover.layers],
        layer_stars=[layer.stars for layer in cover.layers],
    )


def oracle_build(
    space: MetricSpace,
    builder: BuilderSpec,
    weights: Optional[WeightFunction] = None,
    *,
    rtol: float = RTOL,
) -> DistanceOracle:
    started = time.perf_counter()
    cover = build_cover(space, builder, weights, rtol=rtol)
    oracle = oracle_from_cover(cover)
    for tree in oracle.trees:
        tree.lca_index  # 표는 빌드 시간에 포함한다
    oracle.build_seconds = time.perf_counter() - started
    logger.debug("oracle::oracle_build :: n=%d layers=%d space=%d", space.n, oracle.layers, oracle.space)
    return oracle


def oracle_query(oracle: DistanceOracle, x: int, y: int) -> float:
    return oracle.query(x, y)


def stretch_matrix(oracle: DistanceOracle, space: MetricSpace) -> np.ndarray:
    """모든 쌍(상삼각, id 순)의 answer / d."""

    rows, cols = np.triu_indices(space.n, k=1)
    answers = np.asarray([oracle.query(int(x), int(y)) for x, y in zip(rows, cols)])
    return answers / space.matrix[rows, cols]


def stretch_histogram(stretches: np.ndarray) -> Dict[str, int]:
    if stretches.size == 0:
        return {}
    top = max(1, int(math.ceil(math.log2(max(float(stretches.max()), 1.0)))) + 1)
    edges = [0.0] + [2.0**k for k in range(top + 1)]
    counts, _ = np.histogram(stretches, bins=edges)
    return {f"[{lo:g},{hi:g})": int(c) for lo, hi, c in zip(edges[:-1], edges[1:], counts)}


def oracle_stats(oracle: DistanceOracle, space: Optional[MetricSpace] = None) -> Dict[str, Any]:
    stats: Dict[str, Any] = {
        "space": oracle.space,
        "layers": oracle.layers,
        "layer_sizes": [len(points) for points in oracle.layer_points],
        "core_sizes": [len(core) for core in oracle.layer_cores],
        "alpha": oracle.alpha,
        "builder": oracle.builder.to_dict(),
        "n": oracle.n,
    }
    if space is not None and space.n > 1:
        stretches = stretch_matrix(oracle, space)
        stats.update(
            {
                "histogram": stretch_histogram(stretches),
                "max_stretch": float(stretches.max()),
                "min_stretch": float(stretches.min()),
                "avg_stretch": float(stretches.mean()),
                "probes_per_query": oracle.probes_per_query,
            }
        )
    return stats


# ---------------------------------------------------------------------------
# 디렉터리 저장
# ---------------------------------------------------------------------------

def oracle_save(oracle: DistanceOracle, directory: Path) -> List[Path]:
    """manifest.json + layer_XXXX.json + table.bin (little-endian uint32)."""

    ensure_dir(directory)
    written: List[Path] = []
    for index, tree in enumerate(oracle.trees):
        payload = tree_to_dict(tree)
        payload["points"] = list(oracle.layer_points[index])
        if oracle.layer_cores:
            payload["core"] = list(oracle.layer_cores[index])
        payload["stars"] = [list(star) for star in oracle.layer_stars[index]]
        path = directory / f"layer_{index:04d}.json"
        write_json(path, payload)
        written.append(path)
    header = np.asarray([oracle.n, oracle.layers], dtype=np.int64)
    table = np.concatenate([header, oracle.home, oracle.offsets, oracle.handles])
    if table.size and (table.min() < 0 or table.max() > np.iinfo(TABLE_DTYPE).max):
        raise InvalidParameters("oracle table does not fit in 32-bit ids")
    table_path = directory / "table.bin"
    table.astype(TABLE_DTYPE).tofile(table_path)
    written.append(table_path)
    manifest = {
        "alpha": oracle.alpha,
        "builder": oracle.builder.to_dict(),
        "n": oracle.n,
        "layers": oracle.layers,
        "space": oracle.space,
        "version": __version__,
    }
    manifest_path = directory / "manifest.json"
    write_json(manifest_path, manifest)
    written.append(manifest_path)
    return written


def oracle_load(directory: Path) -> DistanceOracle:
    manifest = read_json(directory / "manifest.json")
    table = np.fromfile(directory / "table.bin", dtype=TABLE_DTYPE).astype(np.int64)
    n, layers = int(table[0]), int(table[1])
    if layers != int(manifest["layers"]) or n != int(manifest["n"]):
        raise InvalidParameters("oracle table header disagrees with manifest")
    home = table[2 : 2 + n]
    offsets = table[2 + n : 3 + 2 * n]
    handles = table[3 + 2 * n :]
    if handles.size != int(offsets[-1]):
        raise InvalidParameters("oracle handle table is truncated")
    trees: List[HstTree] = []
    points: List[Subspace] = []
    cores: List[Subspace] = []
    stars: List[List[Subspace]] = []
    for index in range(layers):
        payload = read_json(directory / f"layer_{index:04d}.json")
        trees.append(tree_from_dict(payload))
        points.append(tuple(payload.get("points", ())))
        cores.append(tuple(payload.get("core", ())))
        stars.append([tuple(int(x) for x in star) for star in payload.get("stars", [])])
    return DistanceOracle(
        trees=trees,
        home=home,
        offsets=offsets,
        handles=handles,
        builder=BuilderSpec.from_dict(manifest.get("builder", {})),
        layer_points=points,
        layer_cores=cores,
        layer_stars=stars,
    )


# ---------------------------------------------------------------------------
# 벤치
# ---------------------------------------------------------------------------

@dataclass
class StretchAudit:
    pairs: int = 0
    max_stretch: float = 0.0
    min_stretch: float = math.inf
    total: float = 0.0
    total_sq: float = 0.0
    contractions: int = 0
    over_alpha: int = 0
    star_pairs: int = 0
    over_scaling: int = 0
    mismatches: int = 0
    worst_pair: Optional[List[int]] = None

    def add(
        self,
        x: int,
        y: int,
        answer: float,
        true: float,
        reference: float,
        alpha: Optional[float],
        rtol: float,
        *,
        in_star: bool = False,
        scaling: Optional[float] = None,
    ) -> None:
        ratio = answer / true
        self.pairs += 1
        if ratio > self.max_stretch:
            self.max_stretch = ratio
            self.worst_pair = [x, y]
        self.min_stretch = min(self.min_stretch, ratio)
        self.total += ratio
        self.total_sq += ratio * ratio
        if answer < true * (1 - rtol):
            self.contractions += 1
        if in_star:
            self.star_pairs += 1
        elif alpha is not None and ratio > alpha * (1 + rtol):
            self.over_alpha += 1
        if scaling is not None and ratio > scaling * (1 + rtol):
            self.over_scaling += 1
        if answer != reference:
            self.mismatches += 1

    @property
    def avg(self) -> float:
        return self.total / self.pairs if self.pairs else 0.0

    @property
    def l2(self) -> float:
        return math.sqrt(self.total_sq / self.pairs) if self.pairs else 0.0

    @property
    def ok(self) -> bool:
        return self.contractions == 0 and self.over_alpha == 0 and self.mismatches == 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pairs": self.pairs,
            "max_stretch": self.max_stretch,
            "min_stretch": self.min_stretch if self.pairs else None,
            "avg_stretch": self.avg,
            "l2_stretch": self.l2,
            "contractions": self.contractions,
            "over_alpha": self.over_alpha,
            "star_pairs": self.star_pairs,
            "over_scaling": self.over_scaling,
            "mismatches": self.mismatches,
            "worst_pair": self.worst_pair,
        }


def _pair_tau(space: MetricSpace, weights: WeightFunction, members: np.ndarray, x: int, y: int, d: float) -> float:
    """층 X_i 안에서 τ(x,y) = min(w(B(x,d)), w(B(y,d))) / w(X_i)."""

    wvec = weights.values[members]
    wx = float(wvec[space.matrix[x, members] <= d].sum())
    wy = float(wvec[space.matrix[y, members] <= d].sum())
    return min(wx, wy) / float(wvec.sum())


def audit_oracle(
    oracle: DistanceOracle,
    space: MetricSpace,
    weights: Optional[WeightFunction] = None,
    *,
    exhaustive_limit: int = 256,
    sample_pairs: int = 100000,
    seed: int = 0,
    rtol: float = RTOL,
) -> StretchAudit:
    """n <= exhaustive_limit 이면 모든 쌍, 아니면 시드 고정 표본 쌍.

    partial 빌더의 α 는 같은 별 안의 쌍에는 걸지 않는다. scaling 빌더는 쌍마다
    ε = min(1, 2τ) 의 상한과 비교해 over_scaling 으로 센다(보고만).
    """

    audit = StretchAudit()
    alpha = oracle.alpha
    builder = oracle.builder
    weights = resolve_weights(space, weights)
    schedule = ScalingSchedule.from_name(builder.schedule) if builder.kind == "scaling" else None
    members = [np.asarray(points, dtype=np.intp) for points in oracle.layer_points]
    if space.n <= exhaustive_limit:
        rows, cols = np.triu_indices(space.n, k=1)
    else:
        rng = np.random.default_rng(seed)
        rows = rng.integers(0, space.n, size=sample_pairs)
        cols = rng.integers(0, space.n - 1, size=sample_pairs)
        cols = np.where(cols >= rows, cols + 1, cols)
    for x, y in zip(rows.tolist(), cols.tolist()):
        answer = oracle.query(x, y)
        true = space.dist(x, y)
        scaling = None
        if schedule is not None:
            tau = _pair_tau(space, weights, members[oracle.layer_of(x, y)], x, y, true)
            scaling = scaling_bound(schedule, builder.delta, min(1.0, 2.0 * tau), embedding=True)
        audit.add(
            x, y, answer, true, oracle.reference_query(x, y), alpha, rtol,
            in_star=oracle.shares_star(x, y), scaling=scaling,
        )
    return audit


def oracle_bench(
    sizes: Sequence[int],
    builder: BuilderSpec,
    *,
    fixture: str = "planar",
    seed: int = 7,
    sample_pairs: int = 100000,
    exhaustive_limit: int = 256,
    rtol: float = RTOL,
) -> List[Dict[str, Any]]:
    """크기별 (n, 빌드 시간, 공간, 층 수, 최대/평균/ℓ2 stretch, 질의당 probe) 표."""

    from .fixtures import FixtureSpec, generate

    rows: List[Dict[str, Any]] = []
    for n in sizes:
        space = generate(FixtureSpec(fixture, n=int(n), seed=seed) if fixture in ("planar", "graph") else FixtureSpec(fixture, n=int(n)))
        oracle = oracle_build(space, builder, rtol=rtol)
        audit = audit_oracle(oracle, space, exhaustive_limit=exhaustive_limit, sample_pairs=sample_pairs, seed=seed, rtol=rtol)
        rows.append(
            {
                "n": int(n),
                "t": builder.t if builder.kind == "basic" else None,
                "builder": builder.kind,
                "build_seconds": oracle.build_seconds,
                "space": oracle.space,
                "layers": oracle.layers,
                "pairs": audit.pairs,
                "max_stretch": audit.max_stretch,
                "avg_stretch": audit.avg,
                "l2_stretch": audit.l2,
                "probes_per_query": oracle.probes_per_query,
                "audit_ok": audit.ok,
            }
        )
        logger.info("oracle::oracle_bench :: n=%d space=%d layers=%d max=%.3f", n, oracle.space, oracle.layers, audit.max_stretch)
    return rows
