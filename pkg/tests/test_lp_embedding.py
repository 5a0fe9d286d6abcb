import math

import numpy as np
import pytest

from src.errors import InvalidDelta, InvalidNorm
from src.fixtures import FixtureSpec, generate
from src.lp_embedding import deterministic_lp_embed, lp_report


def test_two_points_get_one_coordinate():
    space = generate(FixtureSpec("path", n=2))
    embedding = deterministic_lp_embed(space, p=2)
    assert embedding.dimension == 1
    assert embedding.distance(0, 1) == pytest.approx(1.0)
    report = lp_report(space, embedding)
    assert report["distortion"] == pytest.approx(1.0)
    assert report["collapsed_pairs"] == 0


def test_single_point_has_no_coordinates():
    space = generate(FixtureSpec("path", n=1))
    embedding = deterministic_lp_embed(space)
    assert embedding.coords.shape == (1, 0)
    assert lp_report(space, embedding) == {"dimension": 0, "pairs": 0}


def test_expansion_stays_under_bound_for_several_norms():
    space = generate(FixtureSpec("planar", n=12, seed=3))
    for p in (1.0, 2.0, math.inf):
        embedding = deterministic_lp_embed(space, p=p)
        report = lp_report(space, embedding)
        assert report["expansion"] <= report["expansion_bound"] * (1 + 1e-9)
        assert embedding.scales >= 1
        assert embedding.dimension == sum(block.width for block in embedding.blocks)


def test_raw_coordinates_are_lipschitz():
    space = generate(FixtureSpec("graph", n=15, seed=5))
    embedding = deterministic_lp_embed(space, p=2, delta=0.25)
    rows, cols = np.triu_indices(space.n, k=1)
    jumps = np.abs(embedding.raw[rows] - embedding.raw[cols]).max(axis=1)
    assert (jumps <= space.matrix[rows, cols] * (1 + 1e-9)).all()


def test_payload_describes_blocks():
    space = generate(FixtureSpec("clusters", k=2, m=2, s=10))
    payload = deterministic_lp_embed(space, p=math.inf).to_dict()
    assert payload["artifact"] == "lpembed"
    assert payload["p"] == "inf"
    assert payload["n"] == 4
    assert [block["scale"] for block in payload["blocks"]] == sorted(block["scale"] for block in payload["blocks"])


def test_parameter_errors():
    space = generate(FixtureSpec("path", n=3))
    with pytest.raises(InvalidNorm):
        deterministic_lp_embed(space, p=0.5)
    with pytest.raises(InvalidDelta):
        deterministic_lp_embed(space, delta=1.0)
