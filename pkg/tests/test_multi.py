import pytest

from src.errors import EmptyPath, InvalidFraction, UnknownPoint
from src.fixtures import FixtureSpec, generate
from src.multi import (
    build_multi_embedding,
    min_image_path_length,
    path_distortion_report,
    path_guardrail,
    path_length,
    sample_paths,
)
from src.ultrametric import validate_hst


def c22():
    return generate(FixtureSpec("clusters", k=2, m=2, s=10))


def test_two_points_give_two_leaves():
    me = build_multi_embedding(generate(FixtureSpec("path", n=2)), 0.5)
    assert me.tree.leaf_count == 2
    assert me.tree.root_label == 1.0
    assert me.t == 2


def test_clusters_split_off_one_point_at_a_time():
    space = c22()
    me = build_multi_embedding(space, 0.5)
    assert me.tree.leaf_count == 4
    assert me.tree.root_label == 10.0
    assert min_image_path_length(me, [0, 2, 1]) == pytest.approx(20.0)
    assert path_length(space, [0, 2, 1]) == pytest.approx(20.0)
    assert validate_hst(me.tree) == []
    audit = me.audit()
    assert audit["half_failures"] == 0
    assert audit["diameter_failures"] == 0
    assert audit["leaf_ok"]


def test_uniform_paths_are_exact():
    space = generate(FixtureSpec("uniform", n=4))
    me = build_multi_embedding(space, 0.5)
    report = path_distortion_report(me, space, count=40, max_len=5, seed=3)
    assert report["paths"] == 40
    assert report["max"] == pytest.approx(1.0)
    assert report["non_contracting"]


def test_planar_paths_never_contract():
    space = generate(FixtureSpec("planar", n=14, seed=10))
    me = build_multi_embedding(space, 0.25)
    assert me.t == 4
    assert sorted(me.tree.leaves_of) == list(range(space.n))
    report = path_distortion_report(me, space, count=60, max_len=6, seed=2)
    assert report["non_contracting"]
    assert report["guardrail"] == pytest.approx(path_guardrail(space, 0.25))
    assert set(report["quantiles"]) == {"0.5", "0.9", "0.99"}
    for split in me.splits:
        assert split.half_ok
        assert split.diameter_ok


def test_multi_errors():
    space = c22()
    with pytest.raises(InvalidFraction):
        build_multi_embedding(space, 0.0)
    with pytest.raises(InvalidFraction):
        build_multi_embedding(space, 1.5)
    me = build_multi_embedding(space, 1.0)
    with pytest.raises(EmptyPath):
        min_image_path_length(me, [0])
    with pytest.raises(UnknownPoint):
        me.images(7)


def test_sample_paths_have_no_repeated_steps():
    paths = sample_paths(5, 200, 4, seed=0)
    assert len(paths) == 200
    for path in paths:
        assert 2 <= len(path) <= 4
        assert all(a != b for a, b in zip(path, path[1:]))
        assert all(0 <= x < 5 for x in path)
    assert paths == sample_paths(5, 200, 4, seed=0)
    assert sample_paths(1, 10, 4, seed=0) == []


def test_multi_payload():
    payload = build_multi_embedding(c22(), 0.5).to_dict()
    assert payload["artifact"] == "multi"
    assert payload["t"] == 2
    assert set(payload["images"]) == {"0", "1", "2", "3"}


def test_split_gap_holds_on_corpus():
    corpus = (
        FixtureSpec("uniform", n=16),
        FixtureSpec("path", n=16),
        FixtureSpec("clusters", k=4, m=4, s=10),
        FixtureSpec("planar", n=64, seed=1),
        FixtureSpec("graph", n=64, seed=1),
    )
    for spec in corpus:
        audit = build_multi_embedding(generate(spec), 0.1).audit()
        assert audit["gap_failures"] == 0, spec
        assert audit["half_failures"] == 0, spec
        assert audit["leaf_ok"], spec
