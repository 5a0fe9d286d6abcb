"""(실험적) 결정적 다중 스케일 좌표 임베딩.

스케일마다 padded partition bundle 을 만들고, 라운드별 클러스터에 이진 코드워드를 붙인다.
좌표 하나 = (라운드, 비트) 쌍이며 값은 code · min(d(x, X∖C(x)), Δ̂) 이다.
보장하는 것은 좌표별 립시츠 상한과 정규화 후 팽창 상한뿐이고, 왜곡은 측정해서 보고만 한다.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .decomposition import build_partition_bundle
from .errors import RTOL, InvalidDelta, InvalidNorm, ensure_leq
from .metric import MetricSpace, WeightFunction, aspect_ratio, diameter, resolve_weights

logger = logging.getLogger(__name__)


@dataclass
class CoordinateBlock:
    scale: int
    delta_hat: float
    rounds: int
    bits: int
    start: int
    width: int
    factor: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scale": self.scale,
            "delta_hat": self.delta_hat,
            "rounds": self.rounds,
            "bits": self.bits,
            "start": self.start,
            "width": self.width,
            "factor": self.factor,
        }


@dataclass
class CoordinateEmbedding:
    coords: np.ndarray
    p: float
    delta: float
    blocks: List[CoordinateBlock] = field(default_factory=list)
    raw: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return int(self.coords.shape[1])

    @property
    def scales(self) -> int:
        return len(self.blocks)

    def distance(self, x: int, y: int) -> float:
        diff = np.abs(self.coords[x] - self.coords[y])
        if diff.size == 0:
            return 0.0
        if math.isinf(self.p):
            return float(diff.max())
        return float((diff**self.p).sum() ** (1.0 / self.p))

    def expansion_bound(self) -> float:
        scales = max(self.scales, 1)
        return 2.0 if math.isinf(self.p) else 2.0 * scales ** (1.0 / self.p)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "artifact": "lpembed",
            "p": self.p if math.isfinite(self.p) else "inf",
            "delta": self.delta,
            "dimension": self.dimension,
            "n": int(self.coords.shape[0]),
            "blocks": [block.to_dict() for block in self.blocks],
        }


def _codes(count: int, bits: int) -> np.ndarray:
    """클러스터 i 의 코드워드 = i 의 이진 표현(낮은 비트부터)."""

    index = np.arange(count, dtype=np.int64)[:, None]
    return ((index >> np.arange(bits, dtype=np.int64)[None, :]) & 1).astype(np.float64)


def deterministic_lp_embed(
    space: MetricSpace,
    p: float = 2.0,
    delta: float = 0.5,
    weights: Optional[WeightFunction] = None,
    *,
    rtol: float = RTOL,
) -> CoordinateEmbedding:
    p = float(p)
    if not p >= 1:
        raise InvalidNorm(f"p must be >= 1, got {p}")
    if not 0 < delta < 1:
        raise InvalidDelta(f"delta must lie in (0,1), got {delta}")
    weights = resolve_weights(space, weights)
    n = space.n
    if n < 2:
        return CoordinateEmbedding(coords=np.zeros((n, 0)), p=p, delta=float(delta), raw=np.zeros((n, 0)))

    diam = diameter(space)
    levels = int(math.ceil(math.log2(aspect_ratio(space)) - 1e-12))
    raw_columns: List[np.ndarray] = []
    scaled_columns: List[np.ndarray] = []
    blocks: List[CoordinateBlock] = []
    start = 0
    for j in range(max(levels, 0) + 1):
        delta_hat = diam / 2**j
        bundle = build_partition_bundle(space, delta_hat, delta, weights, rtol=rtol)
        block: List[np.ndarray] = []
        bits_used = 0
        for clusters in bundle.rounds:
            bits = int(math.ceil(math.log2(len(clusters)))) if len(clusters) > 1 else 0
            if bits == 0:
                continue
            bits_used = max(bits_used, bits)
            codes = _codes(len(clusters), bits)
            values = np.zeros((n, bits))
            for c, cluster in enumerate(clusters):
                members = np.asarray(cluster.members, dtype=np.intp)
                outside = np.setdiff1d(np.arange(n), members)
                reach = space.matrix[np.ix_(members, outside)].min(axis=1) if outside.size else np.full(members.size, math.inf)
                values[members] = codes[c][None, :] * np.minimum(reach, delta_hat)[:, None]
            block.append(values)
        if not block:
            continue
        raw = np.concatenate(block, axis=1)
        factor = 1.0 if math.isinf(p) else (len(bundle.rounds) * bits_used) ** (-1.0 / p)
        raw_columns.append(raw)
        scaled_columns.append(raw * factor)
        blocks.append(
            CoordinateBlock(
                scale=j,
                delta_hat=delta_hat,
                rounds=len(bundle.rounds),
                bits=bits_used,
                start=start,
                width=raw.shape[1],
                factor=factor,
            )
        )
        start += raw.shape[1]
        logger.debug("lp_embedding::deterministic_lp_embed :: scale=%d rounds=%d width=%d", j, len(bundle.rounds), raw.shape[1])

    raw_all = np.concatenate(raw_columns, axis=1) if raw_columns else np.zeros((n, 0))
    coords = np.concatenate(scaled_columns, axis=1) if scaled_columns else np.zeros((n, 0))
    embedding = CoordinateEmbedding(coords=coords, p=p, delta=float(delta), blocks=blocks, raw=raw_all)
    _check_lipschitz(space, embedding, rtol)
    return embedding


def _check_lipschitz(space: MetricSpace, embedding: CoordinateEmbedding, rtol: float) -> None:
    raw = embedding.raw
    rows, cols = np.triu_indices(space.n, k=1)
    dist = space.matrix[rows, cols]
    if raw is not None and raw.size:
        jumps = np.abs(raw[rows] - raw[cols]).max(axis=1)
        worst = int(np.argmax(jumps / dist))
        ensure_leq(float(jumps[worst]), 2.0 * float(dist[worst]), "coordinate-lipschitz", f"pair ({rows[worst]},{cols[worst]})", rtol)
    bound = embedding.expansion_bound()
    for x, y, d in zip(rows.tolist(), cols.tolist(), dist.tolist()):
        ensure_leq(embedding.distance(x, y), bound * d, "expansion", f"pair ({x},{y})", rtol)


def lp_report(space: MetricSpace, embedding: CoordinateEmbedding) -> Dict[str, Any]:
    """측정된 왜곡(팽창 × 수축)과 차원."""

    rows, cols = np.triu_indices(space.n, k=1)
    if rows.size == 0:
        return {"dimension": embedding.dimension, "pairs": 0}
    mapped = np.asarray([embedding.distance(x, y) for x, y in zip(rows.tolist(), cols.tolist())])
    ratio = mapped / space.matrix[rows, cols]
    expansion = float(ratio.max())
    contraction = math.inf if ratio.min() <= 0 else float(1.0 / ratio.min())
    return {
        "dimension": embedding.dimension,
        "scales": embedding.scales,
        "pairs": int(rows.size),
        "expansion": expansion,
        "expansion_bound": embedding.expansion_bound(),
        "contraction": contraction,
        "distortion": expansion * contraction,
        "collapsed_pairs": int((ratio <= 0).sum()),
    }
