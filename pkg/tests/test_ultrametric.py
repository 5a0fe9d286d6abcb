from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from src.errors import ForeignLeaf, InvalidParameters, UnknownPoint
from src.ultrametric import (
    TreeBuilder,
    leaf_distance_matrix,
    load_tree,
    naive_um_distance,
    path_max_label,
    save_tree,
    subtree_points,
    tree_from_dict,
    tree_to_dict,
    ultrametric_matrix,
    um_distance,
    validate_hst,
)


def sample_tree():
    # 10 ─┬─ 1 ─┬─ 0
    #     │     └─ 1
    #     └─ 4 ─┬─ 2
    #           ├─ 3
    #           └─ 4
    builder = TreeBuilder()
    left = builder.join(1.0, [builder.leaf(0), builder.leaf(1)])
    right = builder.star(4.0, [2, 3, 4])
    return builder.build(builder.join(10.0, [left, right]))


def test_builder_renumbers_in_preorder():
    tree = sample_tree()
    assert tree.root == 0
    assert tree.root_label == 10.0
    assert tree.order[0] == 0
    assert tree.points == (0, 1, 2, 3, 4)
    assert tree.leaf_count == 5
    assert tree.is_single_image()


def test_join_collapses_unary_and_empty():
    builder = TreeBuilder()
    leaf = builder.leaf(7)
    assert builder.join(3.0, [leaf]) == leaf
    assert builder.join(3.0, [None]) is None


def test_um_distance_reads_lca_label():
    tree = sample_tree()
    a, b, c = tree.leaf_of(0), tree.leaf_of(1), tree.leaf_of(3)
    assert um_distance(tree, a, b) == 1.0
    assert um_distance(tree, a, c) == 10.0
    assert um_distance(tree, c, tree.leaf_of(4)) == 4.0
    assert um_distance(tree, a, a) == 0.0
    assert tree.point_distance(2, 0) == 10.0
    with pytest.raises(ForeignLeaf):
        um_distance(tree, tree.root, a)
    with pytest.raises(UnknownPoint):
        tree.leaf_of(9)


def test_lca_agrees_with_naive_walk_on_all_pairs():
    tree = sample_tree()
    for a in tree.leaves:
        for b in tree.leaves:
            assert um_distance(tree, a, b) == naive_um_distance(tree, a, b)
            if a != b:
                assert path_max_label(tree, a, b) == um_distance(tree, a, b)
    assert tree.lca_index.probes_per_query == 6


def test_ultrametric_matrix():
    tree = sample_tree()
    matrix = ultrametric_matrix(tree, 6)
    assert matrix[0, 1] == 1.0
    assert matrix[3, 4] == 4.0
    assert matrix[1, 4] == 10.0
    assert np.isnan(matrix[5, 0])
    leaves, leaf_matrix = leaf_distance_matrix(tree)
    assert leaf_matrix.shape == (5, 5)
    assert np.array_equal(leaf_matrix, leaf_matrix.T)


def test_validate_hst_accepts_ultrametric_and_flags_decay():
    tree = sample_tree()
    assert validate_hst(tree) == []
    assert validate_hst(tree, k=2.0) == []
    assert [v.rule for v in validate_hst(tree, k=4.0)] == ["label-decay"]

    payload = tree_to_dict(tree)
    payload["nodes"][1]["label"] = 20.0
    rules = {v.rule for v in validate_hst(tree_from_dict(payload))}
    assert rules == {"label-decay"}


def test_validate_hst_flags_unary_and_leaf_labels():
    payload = {
        "k": 1,
        "root": 0,
        "nodes": [
            {"id": 0, "label": 5.0, "children": [1]},
            {"id": 1, "label": 0.5, "leaf": 0},
        ],
    }
    rules = {v.rule for v in validate_hst(tree_from_dict(payload))}
    assert rules == {"unary", "leaf-label"}


def test_sampled_strong_triangle_mode_passes_on_valid_tree():
    tree = sample_tree()
    assert validate_hst(tree, exhaustive_limit=2, samples=500, seed=3) == []


def test_tree_json_roundtrip(tmp_path: Path):
    tree = sample_tree()
    path = save_tree(tree, tmp_path / "tree.json")
    loaded = load_tree(path)
    assert tree_to_dict(loaded) == tree_to_dict(tree)
    assert subtree_points(loaded, loaded.root) == [0, 1, 2, 3, 4]


def test_tree_from_dict_rejects_bad_ids():
    with pytest.raises(InvalidParameters):
        tree_from_dict({"nodes": [{"id": 1, "label": 0.0, "leaf": 0}]})
    with pytest.raises(InvalidParameters):
        tree_from_dict(
            {
                "nodes": [
                    {"id": 0, "label": 1.0, "children": [1, 1]},
                    {"id": 1, "label": 0.0, "leaf": 0},
                ]
            }
        )


def test_multi_image_tree_registers_every_leaf():
    builder = TreeBuilder()
    root = builder.join(2.0, [builder.leaf(0), builder.join(1.0, [builder.leaf(0), builder.leaf(1)])])
    tree = builder.build(root)
    assert len(tree.leaves_of[0]) == 2
    assert not tree.is_single_image()
    with pytest.raises(InvalidParameters):
        ultrametric_matrix(tree, 2)
