import math

import pytest

from src.analysis import (
    brute_force_check,
    core_pairs,
    distortion_report,
    local_distortion,
    partial_from_values,
    partial_report,
    report_from_ratios,
    scaling_curve,
    subspace_pairs,
)
from src.errors import InvalidFraction, KOutOfRange, NotNonExpansive, ZeroDistancePair
from src.fixtures import FixtureSpec, generate, random_weights
from src.metric import WeightFunction, diameter
from src.ramsey import ramsey_subspace


def c22():
    return generate(FixtureSpec("clusters", k=2, m=2, s=10))


def test_report_from_ratios_general_mode():
    report = report_from_ratios([1.0, 2.0], q_list=(1, 2, math.inf))
    assert report.average == pytest.approx(1.5)
    assert report.lq["1"] == pytest.approx(1.5)
    assert report.lq["2"] == pytest.approx(math.sqrt(2.5))
    assert report.lq["inf"] == pytest.approx(2.0)
    assert report.worst == pytest.approx(2.0)

    shrunk = report_from_ratios([0.5, 2.0])
    assert shrunk.worst == pytest.approx(4.0)
    assert shrunk.average == pytest.approx(2.0)


def test_report_from_ratios_non_contractive_mode():
    report = report_from_ratios([1.0, 3.0], non_contractive=True, pairs=[(0, 1), (1, 2)])
    assert report.worst == pytest.approx(3.0)
    assert report.worst_pair == (1, 2)
    assert report.mode == "non-contractive"
    empty = report_from_ratios([])
    assert empty.pairs == 0 and empty.worst == 1.0


def test_distortion_report_of_ramsey_tree():
    space = c22()
    result = ramsey_subspace(space, 2)
    report = distortion_report(
        space,
        result.tree.point_distance,
        pairs=subspace_pairs(result.subspace),
        non_contractive=True,
        universe="subspace",
    )
    assert report.pairs == 6
    assert report.worst == pytest.approx(1.0)
    assert report.universe == "subspace"


def test_zero_distance_pair_is_rejected():
    space = c22()
    with pytest.raises(ZeroDistancePair):
        distortion_report(space, space.dist, pairs=[(1, 1)])


def test_pair_universes():
    assert core_pairs(4, [0]) == [(0, 1), (0, 2), (0, 3)]
    assert core_pairs(3, [0, 1]) == [(0, 1), (0, 2), (1, 2)]
    assert subspace_pairs([3, 1]) == [(1, 3)]


def test_partial_excludes_the_worst_fraction():
    summary = partial_from_values([1, 1, 1, 1, 1, 100], 1 / 6)
    assert summary["bound"] == 1.0
    assert summary["excluded"] == 1
    assert partial_from_values([], 0.5)["pairs"] == 0
    with pytest.raises(InvalidFraction):
        partial_from_values([1.0], 1.0)


def test_partial_report_general_mode_folds_contraction():
    space = generate(FixtureSpec("path", n=3))
    summary = partial_report(space, lambda x, y: space.dist(x, y) / 4, 0.5, non_contractive=False)
    assert summary["bound"] == pytest.approx(4.0)


def test_scaling_curve_on_clusters():
    space = c22()

    def stretched(x, y):
        return space.dist(x, y) * (3.0 if {x, y} == {0, 1} else 1.0)

    curve = scaling_curve(space, stretched)
    index = curve.pairs.index((0, 1))
    assert curve.tau[index] == pytest.approx(0.5)
    assert curve.tau[curve.pairs.index((0, 2))] == pytest.approx(1.0)
    assert curve.threshold(index) == pytest.approx(1.0)
    assert curve.at(1.0) == pytest.approx(3.0)
    assert curve.at(0.5) == pytest.approx(3.0)
    assert curve.steps() == [(1.0, 3.0)]
    assert curve.members(1.0).all()


def test_scaling_curve_uses_weights():
    space = c22()
    weights = WeightFunction([1.0, 1.0, 1.0, 5.0])
    curve = scaling_curve(space, space.dist, weights)
    assert curve.tau[curve.pairs.index((2, 3))] == pytest.approx(6 / 8)
    assert curve.tau[curve.pairs.index((0, 1))] == pytest.approx(2 / 8)
    assert curve.at(0.6) == pytest.approx(1.0)


def test_local_distortion():
    space = generate(FixtureSpec("path", n=5))
    core = list(range(space.n))
    assert local_distortion(space, space.dist, core, 3) == pytest.approx(1.0)
    half = lambda x, y: space.dist(x, y) / 2
    assert local_distortion(space, half, core, space.n) == pytest.approx(2.0)
    assert local_distortion(space, half, core, 1) == pytest.approx(1.0)
    with pytest.raises(NotNonExpansive):
        local_distortion(space, lambda x, y: 2 * space.dist(x, y), core, 2)
    with pytest.raises(KOutOfRange):
        local_distortion(space, space.dist, core, 0)


def test_brute_force_agrees_with_decompose():
    assert brute_force_check(c22(), 5.0, 2).ok
    assert brute_force_check(generate(FixtureSpec("path", n=4)), 1.5, 2).ok
    planar = generate(FixtureSpec("planar", n=6, seed=12))
    result = brute_force_check(planar, diameter(planar) / 2, 2)
    assert result.ok, result.mismatches
    assert set(result.expected) == {"center", "index", "Q", "P", "Qbar"}


def test_brute_force_with_core_and_weights():
    space = generate(FixtureSpec("planar", n=8, seed=4))
    weights = WeightFunction(random_weights(8, seed=3))
    result = brute_force_check(space, diameter(space) / 2, 3, weights, core=[0, 2, 4, 6])
    assert result.ok, result.mismatches
