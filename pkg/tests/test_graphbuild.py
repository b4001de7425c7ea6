import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import adjacency_bruteforce, features_bruteforce
from patchgraph.clustering import ClusterModel, assign
from patchgraph.encoder import AutoencoderModel, encode
from patchgraph.errors import DomainError
from patchgraph.graphbuild import (
    adjacency_from_labels,
    build_graph,
    export_graph,
    import_graph,
    incidence_counts,
    label_patches,
    permute_graph,
    read_jsonl,
    write_jsonl,
)
from patchgraph.patching import partition


def label_grids(max_side=8, max_c=6):
    return st.integers(2, max_c).flatmap(
        lambda C: st.tuples(
            st.just(C),
            st.integers(1, max_side).flatmap(
                lambda r: st.integers(1, max_side).flatmap(
                    lambda c: st.lists(st.lists(st.integers(0, C - 1), min_size=c, max_size=c), min_size=r, max_size=r)
                )
            ),
        )
    )


def test_single_cluster():
    A = adjacency_from_labels([[0, 0], [0, 0]], 1)
    assert A.tolist() == [[1.0]]
    assert incidence_counts([[0, 0], [0, 0]], 1).tolist() == [[8]]


def test_symmetric_half_example():
    A = adjacency_from_labels([[0, 1], [0, 1]], 2)
    assert np.max(np.abs(A - 0.5)) < 1e-12


def test_asymmetric_example():
    A = adjacency_from_labels([[0, 0], [0, 1]], 2)
    expected = np.array([[2 / 3, 1 / 3], [1.0, 0.0]])
    assert np.max(np.abs(A - expected)) < 1e-12
    oracle, _ = adjacency_bruteforce([[0, 0], [0, 1]], 2)
    assert np.array_equal(A, oracle)


def test_label_out_of_range():
    with pytest.raises(DomainError):
        adjacency_from_labels([[0, 3], [0, 1]], 3)


@settings(max_examples=200, deadline=None)
@given(label_grids(), st.sampled_from([4, 8]))
def test_matches_bruteforce(case, conn):
    C, labels = case
    A = adjacency_from_labels(labels, C, conn)
    oracle, n = adjacency_bruteforce(labels, C, conn)
    assert np.array_equal(A, oracle)
    n = np.array(n)
    assert np.array_equal(n, n.T)  # incidence counts are symmetric
    for i in range(C):
        s = A[i].sum()
        assert s == 0.0 or abs(s - 1.0) < 1e-9
        assert np.all((A[i] >= 0) & (A[i] <= 1))


@settings(max_examples=100, deadline=None)
@given(label_grids())
def test_eight_neighbour_counts_dominate(case):
    C, labels = case
    assert np.all(incidence_counts(labels, C, 8).sum(1) >= incidence_counts(labels, C, 4).sum(1))


def test_build_graph_single_cluster():
    z = np.arange(8.0).reshape(4, 2)
    g = build_graph(np.full((2, 2), 2), z, 4)
    assert g.present.tolist() == [False, False, True, False]
    assert np.array_equal(g.node_features[2], z.mean(axis=0))
    assert np.all(g.node_features[[0, 1, 3]] == 0)
    assert g.adjacency[2, 2] == 1.0 and g.adjacency.sum() == 1.0


@settings(max_examples=50, deadline=None)
@given(label_grids(max_side=5), st.integers(0, 1000))
def test_relabeling_equivariance(case, seed):
    C, labels = case
    rng = np.random.default_rng(seed)
    labels = np.array(labels)
    z = rng.normal(size=(labels.size, 3))
    perm = rng.permutation(C)  # new id k holds old id perm[k]
    inv = np.argsort(perm)
    g = build_graph(labels, z, C)
    h = build_graph(inv[labels], z, C)
    Pm = np.eye(C)[perm]  # row k selects old node perm[k]
    assert np.array_equal(h.adjacency, Pm @ g.adjacency @ Pm.T)
    assert np.array_equal(h.node_features, g.node_features[perm])
    p = permute_graph(g, perm)
    assert np.array_equal(p.adjacency, h.adjacency) and np.array_equal(p.present, h.present)


def test_random_grids_against_bruteforce_builder():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        C = int(rng.integers(2, 7))
        r, c = rng.integers(1, 9, size=2)
        labels = rng.integers(0, C, size=(r, c))
        z = rng.normal(size=(labels.size, 3))
        conn = int(rng.choice([4, 8]))
        g = build_graph(labels, z, C, conn)
        A, _ = adjacency_bruteforce(labels.tolist(), C, conn)
        assert np.array_equal(g.adjacency, A)
        assert np.allclose(g.node_features, features_bruteforce(labels.tolist(), z.tolist(), C), atol=1e-12, rtol=0)


def test_label_patches_composes_modules():
    rng = np.random.default_rng(0)
    img = rng.random((8, 8, 1))
    img[4:, 4:] = img[:4, :4]  # patch 3 duplicates patch 0
    grid = partition(img, 4)
    enc = AutoencoderModel.init(16, 8, 3, seed=1)
    km = ClusterModel(rng.normal(size=(3, 3)))
    labels, z = label_patches(grid, enc, km)
    assert labels.shape == (4,)
    assert labels[0] == labels[3]
    for p in range(4):
        assert labels[p] == assign(km, encode(enc, grid.patches[p]))
        assert np.allclose(z[p], encode(enc, grid.patches[p]))


def test_export_dot_single_node():
    g = build_graph(np.zeros((2, 2), int), np.ones((4, 2)), 3)
    dot = export_graph(g, "dot")
    assert dot.count("[label=\"cluster") == 1
    assert "n0 -> n0 [weight=1.0" in dot
    assert dot.count("->") == 1


def test_export_dot_asymmetric_example():
    g = build_graph(np.array([[0, 0], [0, 1]]), np.ones((4, 2)), 2)
    dot = export_graph(g, "dot")
    edges = [l for l in dot.splitlines() if "->" in l]
    cross = [l for l in edges if "n0 -> n1" in l or "n1 -> n0" in l]
    assert len(cross) == 2
    assert "n0 -> n1 [weight=0.3333333333333333" in dot
    assert "n1 -> n0 [weight=1.0" in dot


def test_json_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    g = build_graph(rng.integers(0, 4, size=(3, 3)), rng.normal(size=(9, 5)), 4, label=1)
    back = import_graph(export_graph(g, "json"))
    assert np.array_equal(back.adjacency, g.adjacency)
    assert np.array_equal(back.node_features, g.node_features)
    assert np.array_equal(back.present, g.present) and back.label == 1
    d = json.loads(export_graph(g, "json"))
    assert set(d) == {"C", "present", "node_features", "adjacency", "label"}
    write_jsonl(tmp_path / "g.jsonl", [g, g])
    assert len(read_jsonl(tmp_path / "g.jsonl")) == 2
