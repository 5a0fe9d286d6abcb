import json

import numpy as np
import pytest

from src.decomposition import build_partition_bundle
from src.embedding import ramsey_embed
from src.errors import InvalidParameters
from src.fixtures import FixtureSpec, generate
from src.lp_embedding import deterministic_lp_embed
from src.multi import build_multi_embedding
from src.oracle import BuilderSpec, build_cover
from src.ramsey import partial_ramsey, ramsey_subspace
from src.utils import dumps
from src.verify import verify_artifact


def c22():
    return generate(FixtureSpec("clusters", k=2, m=2, s=10))


def as_json(payload):
    return json.loads(dumps(payload))


def rules(found):
    return {violation.rule for violation in found}


def test_fresh_artifacts_pass():
    space = c22()
    assert verify_artifact(as_json(ramsey_subspace(space, 2).to_dict()), space) == []
    assert verify_artifact(as_json(ramsey_embed(space, 2).to_dict()), space) == []
    assert verify_artifact(as_json(build_multi_embedding(space, 0.5).to_dict()), space) == []

    uniform = generate(FixtureSpec("uniform", n=4))
    assert verify_artifact(as_json(partial_ramsey(uniform, 0.5, 0.5).to_dict()), uniform) == []
    bundle = build_partition_bundle(uniform, 0.5, 0.5).to_dict()
    bundle["artifact"] = "bundle"
    assert verify_artifact(as_json(bundle), uniform) == []


def test_planar_embedding_passes():
    space = generate(FixtureSpec("planar", n=20, seed=17))
    assert verify_artifact(as_json(ramsey_embed(space, 3).to_dict()), space) == []


def test_raised_child_label_breaks_decay():
    space = c22()
    payload = as_json(ramsey_subspace(space, 2).to_dict())
    payload["nodes"][1]["label"] = 20.0
    assert rules(verify_artifact(payload, space)) == {"label-decay"}


def test_root_label_too_large_or_too_small():
    space = c22()
    payload = as_json(ramsey_subspace(space, 2).to_dict())
    payload["nodes"][0]["label"] = 1000.0
    assert "distortion" in rules(verify_artifact(payload, space))
    payload["nodes"][0]["label"] = 5.0
    assert "non-contraction" in rules(verify_artifact(payload, space))


def test_subspace_mismatch():
    space = c22()
    payload = as_json(ramsey_subspace(space, 2).to_dict())
    payload["subspace"] = [0, 1, 2]
    assert rules(verify_artifact(payload, space)) == {"subspace"}


def test_multi_leaf_coverage():
    space = c22()
    payload = as_json(build_multi_embedding(space, 0.5).to_dict())
    bigger = generate(FixtureSpec("path", n=5))
    assert "coverage" in rules(verify_artifact(payload, bigger))


def test_bundle_padding_violation():
    uniform = generate(FixtureSpec("uniform", n=4))
    bundle = as_json(build_partition_bundle(uniform, 0.5, 0.5).to_dict())
    bundle["artifact"] = "bundle"
    bundle["rounds"][0][0]["eta"] = 4.0
    assert "padding" in rules(verify_artifact(bundle, uniform))


def test_unknown_artifact_is_an_input_error():
    with pytest.raises(InvalidParameters):
        verify_artifact({"artifact": "histogram"}, c22())


def test_bundle_padding_is_checked_against_the_whole_complement():
    space = generate(FixtureSpec("path", n=4))

    def cluster(members, core, eta):
        return {"members": members, "core": core, "eta": eta, "delta": 2.0}

    bundle = {
        "artifact": "bundle",
        "delta_hat": 2.0,
        "delta": 0.5,
        "n": 4,
        "points": [0, 1, 2, 3],
        "rounds": [
            [cluster([0, 1], [0], 0.25), cluster([2, 3], [3], 0.25)],
            [cluster([0], [], 0.125), cluster([1, 2], [1, 2], 0.25), cluster([3], [], 0.125)],
        ],
    }
    assert verify_artifact(bundle, space) == []
    # 1 and 2 are alone among the alive points but sit 1 away from padded neighbours
    bundle["rounds"][1][1]["eta"] = 0.75
    assert rules(verify_artifact(bundle, space)) == {"padding"}
    bundle["rounds"][1][1]["eta"] = 0.25
    bundle["rounds"][1][1]["core"] = [0, 1, 2]
    assert "core-reuse" in rules(verify_artifact(bundle, space))


def test_cover_artifact_passes_and_detects_corruption():
    space = generate(FixtureSpec("planar", n=24, seed=5))
    for builder in (BuilderSpec(t=2), BuilderSpec("partial", delta=0.25, epsilon=0.25), BuilderSpec("scaling", delta=0.5)):
        assert verify_artifact(as_json(build_cover(space, builder).to_dict()), space) == [], builder

    payload = as_json(build_cover(space, BuilderSpec(t=2)).to_dict())
    payload["home"] = payload["home"][:-1]
    assert rules(verify_artifact(payload, space)) == {"home"}

    payload = as_json(build_cover(space, BuilderSpec(t=2)).to_dict())
    payload["space"] = payload["space"] + 1
    assert "space" in rules(verify_artifact(payload, space))

    payload = as_json(build_cover(space, BuilderSpec(t=2)).to_dict())
    payload["layers"][0]["points"] = payload["layers"][0]["points"][1:]
    assert "layer-nesting" in rules(verify_artifact(payload, space))


def test_lpembed_report_and_coordinates():
    space = generate(FixtureSpec("planar", n=16, seed=4))
    embedding = deterministic_lp_embed(space, p=2)
    payload = as_json(embedding.to_dict())
    assert verify_artifact(payload, space) == []
    assert verify_artifact(payload, space, coords=embedding.coords) == []

    stretched = embedding.coords.copy()
    stretched[0] += 1.0e6
    assert rules(verify_artifact(payload, space, coords=stretched)) == {"expansion"}
    assert rules(verify_artifact(payload, space, coords=embedding.coords[:, :-1])) == {"coordinates"}
    broken = embedding.coords.copy()
    broken[0, 0] = np.nan
    assert rules(verify_artifact(payload, space, coords=broken)) == {"coordinates"}

    payload["dimension"] = payload["dimension"] + 1
    assert "dimension" in rules(verify_artifact(payload, space))
