import math

import numpy as np
import pytest

from src.errors import InvalidFraction, InvalidParameters, InvalidSchedule
from src.fixtures import FixtureSpec, generate, random_weights
from src.metric import WeightFunction
from src.ramsey import (
    ScalingSchedule,
    achieved_psi,
    lq_bound,
    pair_distortions,
    partial_bound,
    partial_ramsey,
    partial_t,
    ramsey_subspace,
    scaling_bound,
    scaling_ramsey,
    scaling_t,
    star_pair_fraction,
    verify_weighted_certificate,
)
from src.ultrametric import validate_hst


def c22():
    return generate(FixtureSpec("clusters", k=2, m=2, s=10))


def test_ramsey_subspace_on_clusters_is_isometric():
    space = c22()
    result = ramsey_subspace(space, 2)
    assert result.subspace == (0, 1, 2, 3)
    assert result.tree.root_label == 10.0
    child_labels = sorted(result.tree.labels[c] for c in result.tree.children[result.tree.root])
    assert child_labels == [1.0, 1.0]
    assert pair_distortions(space, result.tree, result.subspace).max() == pytest.approx(1.0)
    assert result.checks["certificate"]["ok"]
    assert result.checks["size_bound"] == 2
    assert validate_hst(result.tree) == []


def test_ramsey_subspace_meets_size_and_distortion_on_planar():
    space = generate(FixtureSpec("planar", n=32, seed=5))
    for t in (2, 3, 4):
        result = ramsey_subspace(space, t)
        assert len(result.subspace) >= math.ceil(space.n ** (1 - 1 / t) - 1e-9)
        ratios = pair_distortions(space, result.tree, result.subspace)
        assert ratios.min() >= 1 - 1e-9
        assert ratios.max() <= 8 * t * (1 + 1e-9)


def test_ramsey_subspace_weighted_certificate():
    space = generate(FixtureSpec("graph", n=24, seed=2))
    weights = WeightFunction(random_weights(24, seed=9))
    result = ramsey_subspace(space, 3, weights)
    check = verify_weighted_certificate(result.subspace, weights, 1 - 1 / 3)
    assert check.ok
    assert result.checks["size_bound"] is None


def test_ramsey_subspace_rejects_small_t():
    with pytest.raises(InvalidParameters):
        ramsey_subspace(c22(), 1)


def test_ramsey_subspace_single_point():
    space = generate(FixtureSpec("path", n=1))
    result = ramsey_subspace(space, 2)
    assert result.subspace == (0,)
    assert result.tree.leaf_count == 1


def test_partial_parameters():
    assert partial_t(0.5, 0.5) == 2
    assert partial_t(0.5, 1 / 64) == 6
    assert partial_bound(0.5, 0.5) == 16
    assert partial_bound(0.5, 0.5, embedding=True) == 32
    with pytest.raises(InvalidFraction):
        partial_t(1.0, 0.5)
    with pytest.raises(InvalidFraction):
        partial_t(0.5, 0.0)


def test_partial_ramsey_on_uniform_freezes_a_star():
    space = generate(FixtureSpec("uniform", n=4))
    result = partial_ramsey(space, 0.5, 0.5)
    assert result.params["t_p"] == 2
    assert result.stars == [(2, 3)]
    assert result.subspace == (0, 1, 2, 3)
    assert result.checks["star_pair_fraction"] == pytest.approx(1 / 6)
    assert result.checks["size_ok"]
    assert result.psi == 1.0


def test_star_pair_fraction():
    assert star_pair_fraction([(0, 1, 2)], 4) == pytest.approx(0.5)
    assert star_pair_fraction([], 1) == 0.0


def test_schedules_integrate_to_one():
    for name in ("square", "log-square", "power:3"):
        schedule = ScalingSchedule.from_name(name)
        assert schedule.integral == pytest.approx(1.0, abs=1e-6)
        assert schedule.tail(4.0) < 1.0
    assert ScalingSchedule.square()(1.0) == pytest.approx(1.0)
    assert ScalingSchedule.log_square()(1.0) == pytest.approx(math.e)
    assert ScalingSchedule.from_name("power:3").describe()["p"] == 3.0


def test_schedule_errors():
    with pytest.raises(InvalidSchedule):
        ScalingSchedule.from_name("cubic")
    with pytest.raises(InvalidSchedule):
        ScalingSchedule.from_name("power")
    with pytest.raises(InvalidSchedule):
        ScalingSchedule.power(1.0)


def test_scaling_parameters():
    square = ScalingSchedule.square()
    assert scaling_t(square, 0.5, 1.0) == 2
    assert scaling_t(ScalingSchedule.log_square(), 0.5, 1.0) == 3
    assert scaling_bound(square, 0.5, 1.0) == 16
    assert lq_bound(square, 0.5, 4) == 4
    with pytest.raises(InvalidFraction):
        scaling_t(square, 0.5, 0.0)


def test_scaling_ramsey_on_clusters():
    space = c22()
    result = scaling_ramsey(space, 0.5, ScalingSchedule.square())
    root = next(record for record in result.per_node if record.size == 4)
    assert root.level == pytest.approx(1.0)
    assert root.t == 2
    assert result.subspace == (0, 1, 2, 3)
    assert result.checks["node_invariant_failures"] == 0
    assert result.params["schedule"]["name"] == "square"


def test_scaling_ramsey_per_node_distortion_on_planar():
    space = generate(FixtureSpec("planar", n=24, seed=8))
    result = scaling_ramsey(space, 0.5, ScalingSchedule.log_square())
    worst_t = max(record.t for record in result.per_node if record.t is not None)
    ratios = pair_distortions(space, result.tree, result.subspace)
    assert ratios.min() >= 1 - 1e-9
    assert ratios.max() <= 8 * worst_t * (1 + 1e-9)


def test_achieved_psi_bisects_certificate():
    weights = WeightFunction.unit(16)
    psi = achieved_psi(tuple(range(4)), weights)
    assert psi == pytest.approx(0.5, abs=1e-9)
    assert achieved_psi((), weights) == 0.0
    assert achieved_psi(tuple(range(16)), weights) == 1.0


def test_ramsey_result_payload():
    payload = ramsey_subspace(c22(), 2).to_dict()
    assert payload["artifact"] == "ramsey"
    assert payload["kind"] == "basic"
    assert payload["subspace"] == [0, 1, 2, 3]
    assert np.isclose(payload["psi"], 0.5)


CORPUS = (
    FixtureSpec("uniform", n=16),
    FixtureSpec("path", n=16),
    FixtureSpec("clusters", k=4, m=4, s=10),
    FixtureSpec("planar", n=64, seed=1),
    FixtureSpec("graph", n=64, seed=1),
)


def test_partial_ramsey_keeps_all_but_epsilon_pairs_on_corpus():
    for spec in CORPUS:
        space = generate(spec)
        pairs = space.n * (space.n - 1) / 2
        for delta in (0.25, 0.5):
            for eps in (0.1, 0.01):
                result = partial_ramsey(space, delta, eps)
                assert result.checks["star_pair_fraction_ok"], (spec, delta, eps)
                assert result.checks["star_pair_fraction"] <= eps + 1e-12
                assert result.checks["size_ok"], (spec, delta, eps)
                ratios = pair_distortions(space, result.tree, result.subspace)
                over = int((ratios > partial_bound(delta, eps) * (1 + 1e-9)).sum())
                assert over / pairs <= eps + 1e-12, (spec, delta, eps)


def test_scaling_ramsey_node_invariant_on_corpus():
    for spec in CORPUS:
        space = generate(spec)
        result = scaling_ramsey(space, 0.5, ScalingSchedule.square())
        assert result.checks["node_invariant_failures"] == 0, spec
        assert result.checks["size_ok"], spec
