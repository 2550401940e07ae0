import numpy as np
import pytest

from mtd.errors import ContractError, DimensionError
from mtd.graph import SimilarityGraph, build_graph, graph_loss, pairwise_graph_loss
from mtd.tensor import Tape


def test_hand_built_similarity():
    Y = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]], dtype=float)
    G = np.ones_like(Y)
    graph = build_graph(Y, G, eta=1.0)
    # samples 0 and 1 share two labels and know all three: 3*2/(3*2+1)
    assert graph.similarity[0, 1] == pytest.approx(6.0 / 7.0)
    assert graph.similarity[0, 2] == 0.0
    assert graph.similarity[0, 0] == pytest.approx(6.0 / 7.0)
    np.testing.assert_allclose(graph.laplacian.sum(axis=1), 0.0, atol=1e-12)


def test_unknown_entries_do_not_matter(rng):
    Y = (rng.random((6, 4)) < 0.5).astype(float)
    G = (rng.random((6, 4)) < 0.6).astype(float)
    junk = np.where(G == 1, Y, (rng.random((6, 4)) < 0.5).astype(float))
    np.testing.assert_array_equal(build_graph(Y * G, G).similarity, build_graph(junk, G).similarity)


def test_eta_must_be_positive():
    with pytest.raises(ContractError):
        build_graph(np.ones((2, 2)), np.ones((2, 2)), eta=0.0)


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        build_graph(np.ones((2, 2)), np.ones((3, 2)))


def test_identical_embeddings_give_zero_loss():
    Y = np.ones((4, 2))
    graph = build_graph(Y, np.ones_like(Y), eta=1.0)
    tape = Tape()
    Z = tape.leaf(np.tile([[0.3, -1.2, 2.0]], (4, 1)))
    assert graph_loss(Z, graph).item() == pytest.approx(0.0, abs=1e-14)


def test_no_shared_labels_give_zero_loss(rng):
    Y = np.eye(3)
    graph = build_graph(Y, np.ones_like(Y), eta=1.0)
    off_diagonal = graph.similarity - np.diag(np.diag(graph.similarity))
    assert np.all(off_diagonal == 0)
    tape = Tape()
    assert graph_loss(tape.leaf(rng.normal(size=(3, 2))), graph).item() == pytest.approx(0.0, abs=1e-12)


def test_graph_size_must_match_batch():
    graph = build_graph(np.ones((3, 1)), np.ones((3, 1)))
    tape = Tape()
    with pytest.raises(DimensionError):
        graph_loss(tape.leaf(np.ones((4, 2))), graph)


def test_trace_and_pairwise_forms_agree(rng):
    for _ in range(100):
        b = int(rng.integers(1, 11))
        d = int(rng.integers(1, 6))
        T = rng.random((b, b))
        T = (T + T.T) / 2.0
        graph = SimilarityGraph(similarity=T, laplacian=np.diag(T.sum(axis=1)) - T)
        Z = rng.normal(size=(b, d))
        trace = graph_loss(Tape().leaf(Z), graph).item()
        assert abs(trace - pairwise_graph_loss(Z, graph)) < 1e-9


def test_gradient_is_two_l_z_over_b_squared(rng):
    Y = (rng.random((5, 3)) < 0.5).astype(float)
    graph = build_graph(Y, np.ones_like(Y), eta=0.5)
    Z = rng.normal(size=(5, 4))
    tape = Tape()
    leaf = tape.leaf(Z)
    tape.backward(graph_loss(leaf, graph))
    np.testing.assert_allclose(leaf.grad, 2.0 * graph.laplacian @ Z / 25.0, rtol=1e-12, atol=1e-14)


def test_loss_ignores_common_translation(rng):
    for _ in range(20):
        Y = (rng.random((6, 3)) < 0.5).astype(float)
        G = (rng.random((6, 3)) < 0.7).astype(float)
        graph = build_graph(Y * G, G, eta=0.7)
        Z = rng.normal(size=(6, 4))
        shift = rng.normal(size=(1, 4)) * 5.0
        before = graph_loss(Tape().leaf(Z), graph).item()
        after = graph_loss(Tape().leaf(Z + shift), graph).item()
        assert after == pytest.approx(before, rel=1e-9, abs=1e-12)
