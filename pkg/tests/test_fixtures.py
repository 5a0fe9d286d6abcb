from __future__ import annotations

import numpy as np
import pytest

from src.errors import InvalidParameters, UnknownFixture
from src.fixtures import FixtureSpec, fixture_from_dict, generate, parse_fixture, random_weights
from src.metric import validate_triangle


def test_parse_fixture_tokens():
    assert parse_fixture(["C", "2", "2", "10"]) == FixtureSpec("clusters", k=2, m=2, s=10.0)
    assert parse_fixture(["L", "8"]) == FixtureSpec("path", n=8)
    assert parse_fixture(["planar", "64", "7"]) == FixtureSpec("planar", n=64, seed=7)
    with pytest.raises(UnknownFixture):
        parse_fixture(["hexagon", "3"])
    with pytest.raises(InvalidParameters):
        parse_fixture(["L", "eight"])


def test_cluster_fixture_matrix():
    space = generate(FixtureSpec("clusters", k=2, m=2, s=10))
    expected = np.array([[0, 1, 10, 10], [1, 0, 10, 10], [10, 10, 0, 1], [10, 10, 1, 0]], dtype=float)
    assert np.array_equal(space.matrix, expected)
    assert space.provenance["fixture"] == {"kind": "clusters", "k": 2, "m": 2, "s": 10}


def test_uniform_and_path():
    uniform = generate(FixtureSpec("uniform", n=4))
    assert set(uniform.matrix[~np.eye(4, dtype=bool)].tolist()) == {1.0}
    path = generate(FixtureSpec("path", n=5))
    assert path.dist(0, 4) == 4.0


def test_random_fixtures_are_seeded_and_metric():
    for kind in ("planar", "graph"):
        first = generate(FixtureSpec(kind, n=24, seed=3))
        again = generate(FixtureSpec(kind, n=24, seed=3))
        other = generate(FixtureSpec(kind, n=24, seed=4))
        assert np.array_equal(first.matrix, again.matrix)
        assert not np.array_equal(first.matrix, other.matrix)
        assert validate_triangle(first) == []


def test_fixture_parameter_checks():
    with pytest.raises(InvalidParameters):
        generate(FixtureSpec("planar", n=8))
    with pytest.raises(InvalidParameters):
        generate(FixtureSpec("clusters", k=2, m=2, s=0.25))
    with pytest.raises(InvalidParameters):
        generate(FixtureSpec("path", n=0))


def test_fixture_from_dict_reads_corpus_entries():
    spec = fixture_from_dict({"kind": "graph", "n": 16, "seed": 2})
    assert spec == FixtureSpec("graph", n=16, seed=2)
    assert generate(spec).n == 16


def test_random_weights_are_integral_and_bounded():
    weights = random_weights(50, seed=5)
    assert weights.min() >= 1 and weights.max() <= 16
    assert np.array_equal(weights, np.round(weights))
    assert np.array_equal(weights, random_weights(50, seed=5))


def test_slug_names_files():
    assert FixtureSpec("clusters", k=4, m=4, s=10.0).slug() == "clusters_4_4_10"
    assert FixtureSpec("planar", n=64, seed=1).slug() == "planar_64_1"
