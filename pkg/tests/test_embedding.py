import math

import pytest

from src.embedding import core_distortions, partial_ramsey_embed, ramsey_embed, scaling_ramsey_embed
from src.errors import InvalidFraction, InvalidParameters
from src.fixtures import FixtureSpec, generate, random_weights
from src.metric import WeightFunction
from src.ramsey import ScalingSchedule
from src.ultrametric import validate_hst


def c22():
    return generate(FixtureSpec("clusters", k=2, m=2, s=10))


def test_ramsey_embed_on_clusters():
    space = c22()
    embedding = ramsey_embed(space, 2)
    assert embedding.core == (0, 1, 2, 3)
    assert embedding.tree.point_distance(0, 2) == 10.0
    assert embedding.tree.point_distance(0, 1) == 1.0
    assert embedding.bound == 32
    assert validate_hst(embedding.tree) == []


def test_ramsey_embed_on_path_keeps_everything():
    space = generate(FixtureSpec("path", n=4))
    embedding = ramsey_embed(space, 2)
    assert embedding.core == (0, 1, 2, 3)
    assert embedding.tree.root_label == 3.0
    assert embedding.tree.points == (0, 1, 2, 3)


def test_ramsey_embed_core_guarantees_on_planar():
    space = generate(FixtureSpec("planar", n=40, seed=13))
    for t in (2, 3):
        embedding = ramsey_embed(space, t)
        assert embedding.tree.points == space.points()
        assert len(embedding.core) >= math.ceil(space.n ** (1 - 1 / t) - 1e-9)
        ratios = core_distortions(space, embedding)
        assert ratios.min() >= 1 - 1e-9
        assert ratios.max() <= 16 * t * (1 + 1e-9)


def test_ramsey_embed_weighted_and_restricted():
    space = generate(FixtureSpec("graph", n=20, seed=4))
    weights = WeightFunction(random_weights(20, seed=1))
    embedding = ramsey_embed(space, 2, weights)
    assert embedding.checks["certificate"]["ok"]
    assert embedding.checks["size_bound"] is None

    subset = ramsey_embed(space, 2, points=[0, 3, 5, 7, 11])
    assert subset.tree.points == (0, 3, 5, 7, 11)
    assert set(subset.core) <= {0, 3, 5, 7, 11}


def test_ramsey_embed_rejects_small_t():
    with pytest.raises(InvalidParameters):
        ramsey_embed(c22(), 1)


def test_partial_embed_on_uniform():
    space = generate(FixtureSpec("uniform", n=4))
    embedding = partial_ramsey_embed(space, 0.5, 0.5)
    assert embedding.core == (0, 1, 2, 3)
    assert embedding.stars == [(2, 3)]
    assert embedding.bound == 32
    assert embedding.checks["size_ok"]


def test_scaling_embed_size_target_on_planar():
    space = generate(FixtureSpec("planar", n=24, seed=21))
    embedding = scaling_ramsey_embed(space, 0.5, ScalingSchedule.square())
    assert embedding.tree.points == space.points()
    assert embedding.params["schedule"]["name"] == "square"
    worst_t = max(record.t for record in embedding.per_node if record.t is not None)
    ratios = core_distortions(space, embedding)
    assert ratios.min() >= 1 - 1e-9
    assert ratios.max() <= 16 * worst_t * (1 + 1e-9)
    with pytest.raises(InvalidFraction):
        scaling_ramsey_embed(space, 1.5, ScalingSchedule.square())


def test_embedding_payload_marks_core():
    payload = ramsey_embed(c22(), 2).to_dict()
    assert payload["artifact"] == "embedding"
    assert payload["core"] == [0, 1, 2, 3]
    assert payload["params"] == {"t": 2}


CORPUS = (
    FixtureSpec("uniform", n=16),
    FixtureSpec("path", n=16),
    FixtureSpec("clusters", k=4, m=4, s=10),
    FixtureSpec("planar", n=64, seed=1),
    FixtureSpec("graph", n=64, seed=1),
)


def test_partial_and_scaling_embed_size_on_corpus():
    for spec in CORPUS:
        space = generate(spec)
        partial = partial_ramsey_embed(space, 0.5, 0.1)
        assert partial.checks["size_ok"], spec
        assert partial.checks["star_pair_fraction_ok"], spec
        scaling = scaling_ramsey_embed(space, 0.5, ScalingSchedule.square())
        assert scaling.checks["size_ok"], spec
