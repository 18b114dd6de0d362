import pytest

import numpy as np

from iot_ddos_gcn.router_tree import RouterTree, aggregate_router_features


@pytest.fixture
def two_level_tree():
    # router 0 is the root, routers 1 and 2 are leaves
    return RouterTree([-1, 0, 0], {10: 1, 11: 1, 12: 2, 13: 2})


def test_single_router():
    tree = RouterTree.single_router(range(50))
    assert tree.num_routers == 1
    assert tree.leaf_routers == [0]
    assert tree.edge_pairs(list(range(50))).shape == (50, 2)


def test_balanced_assignment():
    tree = RouterTree.balanced([-1, 0, 0, 0], list(range(10)))
    assert tree.leaf_routers == [1, 2, 3]
    assert [tree.assignments[n] for n in range(10)] == [1, 1, 1, 1, 2, 2, 2, 3, 3, 3]


def test_edge_pairs(two_level_tree):
    pairs = two_level_tree.edge_pairs([10, 11, 12, 13])
    assert sorted(map(tuple, pairs.tolist())) == [(0, 5), (1, 5), (2, 6), (3, 6), (5, 4), (6, 4)]


def test_subtree_matrix(two_level_tree):
    obtained = two_level_tree.subtree_matrix([10, 11, 12, 13]).toarray()
    expected = np.array([
        [1, 1, 1, 1],
        [1, 1, 0, 0],
        [0, 0, 1, 1],
    ])
    np.testing.assert_array_equal(obtained, expected)


@pytest.mark.parametrize("parents,assignments,match", [
    ([], {}, "empty"),
    ([1, 0], {}, "cycle"),
    ([-1, -1], {0: 0}, "single rooted tree"),
    ([-1, 5], {}, "unknown parent"),
    ([-1, 0], {7: 0}, "not a leaf"),
])
def test_invalid_trees(parents, assignments, match):
    with pytest.raises(ValueError, match=match):
        RouterTree(parents, assignments)


def test_check_nodes(two_level_tree):
    with pytest.raises(ValueError, match="without a router"):
        two_level_tree.check_nodes([10, 11, 12, 13, 14])
    with pytest.raises(ValueError, match="unknown IoT nodes"):
        two_level_tree.check_nodes([10, 11, 12])


def test_router_features_sum_children():
    tree = RouterTree.single_router([0, 1])
    features = np.array([[1, 2, 0, 0, 0], [3, 4, 0, 0, 0]], dtype=float)
    obtained = aggregate_router_features(features, tree, [0, 1])
    np.testing.assert_array_equal(obtained[2], [4, 6, 0, 0, 0])
    np.testing.assert_array_equal(obtained[:2], features)


def test_router_chain_single_node():
    tree = RouterTree([-1, 0], {0: 1})
    features = np.array([[2.5, -1.0, 3.0]])
    obtained = aggregate_router_features(features, tree, [0])
    np.testing.assert_array_equal(obtained[1], features[0])
    np.testing.assert_array_equal(obtained[2], features[0])


def test_router_features_zero_and_batched(two_level_tree):
    zeros = aggregate_router_features(np.zeros((4, 5)), two_level_tree, [10, 11, 12, 13])
    assert zeros.shape == (7, 5)
    assert not zeros.any()

    batch = np.arange(2 * 4 * 3, dtype=float).reshape(2, 4, 3)
    obtained = aggregate_router_features(batch, two_level_tree, [10, 11, 12, 13])
    assert obtained.shape == (2, 7, 3)
    np.testing.assert_array_equal(obtained[1, 4], batch[1].sum(axis=0))
    np.testing.assert_array_equal(obtained[0, 5], batch[0, :2].sum(axis=0))


def test_router_features_row_mismatch(two_level_tree):
    with pytest.raises(ValueError, match="rows"):
        aggregate_router_features(np.zeros((3, 5)), two_level_tree, [10, 11, 12, 13])
