from dataclasses import dataclass
from typing import List

import numpy as np
import pytest

from fd import assert_gradient_close, central_difference
from mtd.errors import ContractError
from mtd.graph import build_graph, graph_loss
from mtd.losses import (
    LossParts,
    LossWeights,
    classification_loss,
    contrastive_loss,
    reconstruction_loss,
    total_loss,
)
from mtd.masking import MaskSpec, apply_masks, build_masks
from mtd.model import bind, forward, init_model
from mtd.tensor import Tape
from mtd.trainer import TrainConfig, batch_loss


# ---------------------------------------------------------
# hand examples
# ---------------------------------------------------------

def _nodes(tape, rows):
    return [tape.leaf([r]) for r in rows]


def test_contrastive_hand_example():
    tape = Tape()
    s = _nodes(tape, [[1.0, 0.0], [1.0, 0.0]])
    o = _nodes(tape, [[0.0, 1.0], [0.0, -1.0]])
    assert contrastive_loss(s, o, np.ones((1, 2))).item() == pytest.approx(0.2)


def test_contrastive_zero_when_channels_orthogonal():
    tape = Tape()
    s = _nodes(tape, [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    o = _nodes(tape, [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert contrastive_loss(s, o, np.ones((1, 2))).item() == 0.0


def test_contrastive_skips_samples_with_one_view(rng):
    tape = Tape()
    S = [rng.normal(size=(2, 4)) for _ in range(3)]
    O = [rng.normal(size=(2, 4)) for _ in range(3)]
    W = np.array([[1, 1, 1], [0, 1, 0]], dtype=float)
    both = contrastive_loss([tape.leaf(x) for x in S], [tape.leaf(x) for x in O], W).item()
    first = contrastive_loss([tape.leaf(x[:1]) for x in S], [tape.leaf(x[:1]) for x in O], W[:1]).item()
    assert both == pytest.approx(first, rel=1e-12)
    lonely = contrastive_loss([tape.leaf(x[1:]) for x in S], [tape.leaf(x[1:]) for x in O], W[1:])
    assert lonely.item() == 0.0


def test_contrastive_sum_reduction(rng):
    tape = Tape()
    S = [tape.leaf(rng.normal(size=(3, 4))) for _ in range(2)]
    O = [tape.leaf(rng.normal(size=(3, 4))) for _ in range(2)]
    W = np.ones((3, 2))
    mean = contrastive_loss(S, O, W).item()
    assert contrastive_loss(S, O, W, reduction="sum").item() == pytest.approx(3.0 * mean)


def test_contrastive_scale_invariance(rng):
    S = [rng.normal(size=(2, 5)) for _ in range(3)]
    O = [rng.normal(size=(2, 5)) for _ in range(3)]
    W = np.ones((2, 3))

    def value(shared):
        tape = Tape()
        return contrastive_loss([tape.leaf(x) for x in shared], [tape.leaf(x) for x in O], W).item()

    scaled = [x.copy() for x in S]
    scaled[1][0] *= 7.5
    assert abs(value(S) - value(scaled)) < 1e-9


def test_contrastive_needs_two_views():
    tape = Tape()
    with pytest.raises(ContractError):
        contrastive_loss([tape.leaf([[1.0]])], [tape.leaf([[1.0]])], np.ones((1, 1)))


def test_reconstruction_hand_example():
    tape = Tape()
    X = np.array([[0.5, 0.5], [1.0, -1.0]])
    Xbar = tape.leaf(X + np.array([[1.0, 0.0], [0.0, 2.0]]))
    assert reconstruction_loss([Xbar], [X], np.ones((2, 1))).item() == pytest.approx(1.25)


def test_reconstruction_ignores_missing_targets(rng):
    tape = Tape()
    X = rng.normal(size=(3, 4))
    Xbar = tape.leaf(rng.normal(size=(3, 4)))
    W = np.array([[1.0], [0.0], [1.0]])
    other = X.copy()
    other[1] = 99.0
    assert reconstruction_loss([Xbar], [X], W).item() == reconstruction_loss([Xbar], [other], W).item()


def test_classification_hand_example():
    tape = Tape()
    loss = classification_loss(tape.leaf([[0.5, 0.5]]), np.array([[1.0, 0.0]]), np.ones((1, 2)))
    assert loss.item() == pytest.approx(np.log(2.0))


def test_classification_fully_masked_and_perfect():
    tape = Tape()
    Y = np.array([[1.0, 0.0, 1.0]])
    assert classification_loss(tape.leaf([[0.3, 0.3, 0.3]]), Y, np.zeros((1, 3))).item() == 0.0
    perfect = classification_loss(tape.leaf([[1.0 - 1e-15, 1e-15, 1.0 - 1e-15]]), Y, np.ones((1, 3)))
    assert perfect.item() == pytest.approx(0.0, abs=1e-12)


def test_total_loss_arithmetic():
    tape = Tape()
    parts = LossParts(*[tape.leaf([[v]]) for v in (1.0, 2.0, 3.0, 4.0)])
    node, breakdown = total_loss(parts, LossWeights(1.0, 1.0, 1.0))
    assert node.item() == 10.0
    assert breakdown.l_total == 10.0
    node, breakdown = total_loss(parts, LossWeights(0.0, 0.0, 0.0))
    assert node.item() == 1.0
    assert breakdown.l_gc == 2.0


def test_breakdown_identity(rng):
    tape = Tape()
    values = rng.random(4) * 3
    parts = LossParts(*[tape.leaf([[v]]) for v in values])
    weights = LossWeights(0.4, 0.4, 0.1)
    _, b = total_loss(parts, weights)
    expected = b.l_mc + weights.alpha * b.l_gc + weights.beta * b.l_ccc + weights.gamma * b.l_re
    assert abs(b.l_total - expected) < 1e-12


def test_negative_weight_rejected():
    tape = Tape()
    with pytest.raises(ContractError):
        total_loss(LossParts(tape.leaf([[1.0]])), LossWeights(alpha=-0.1))


# ---------------------------------------------------------
# mini instance: gradients and masked-entry independence
# ---------------------------------------------------------

@dataclass
class MiniBatch:
    inputs: List[np.ndarray]
    targets: List[np.ndarray]
    W: np.ndarray
    Y: np.ndarray
    G: np.ndarray


def _mini_batch(rng, n=6, dims=(5, 7, 4), c=3):
    W = np.array([[1, 1, 1], [1, 0, 1], [0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 1, 1]], dtype=float)[:n]
    G = (rng.random((n, c)) < 0.7).astype(float)
    G[0] = 1.0
    Y = (rng.random((n, c)) < 0.5).astype(float) * G
    Y[0] = [1.0, 1.0, 0.0]
    targets = [rng.normal(size=(n, d)) * W[:, [v]] for v, d in enumerate(dims)]
    masks = build_masks(n, list(dims), MaskSpec(0.25, seed=4))
    return MiniBatch(apply_masks(targets, masks), targets, W, Y, G)


def _mini_model(seed=5, activation="sigmoid"):
    return init_model([5, 7, 4], embed_dim=4, n_labels=3, hidden=[5], seed=seed, hidden_activation=activation)


def _component(bound, batch: MiniBatch, which: str):
    tape = bound.tape
    views = [tape.constant(x) for x in batch.inputs]
    if which == "all":
        return batch_loss(bound, batch.inputs, batch.targets, batch.W, batch.Y, batch.G, TrainConfig(eta=1.0))[0]
    out = forward(bound, views, batch.W)
    if which == "mc":
        return classification_loss(out.predictions, batch.Y, batch.G)
    if which == "gc":
        return graph_loss(out.fused, build_graph(batch.Y, batch.G, eta=1.0))
    if which == "ccc":
        return contrastive_loss(out.shared, out.private, batch.W)
    return reconstruction_loss(out.reconstructions, batch.targets, batch.W)


@pytest.mark.parametrize("which", ["mc", "gc", "ccc", "re", "all"])
def test_parameter_gradients_match_finite_differences(which, rng):
    batch = _mini_batch(rng)
    model = _mini_model()

    def value():
        return _component(bind(model), batch, which).item()

    bound = bind(model)
    loss = _component(bound, batch, which)
    assert loss.item() > 0
    bound.tape.backward(loss)
    grads = bound.gradients()
    for name, param in model.parameters().items():
        assert_gradient_close(grads[name], central_difference(value, param), rtol=1e-4, atol=1e-7)


def test_masked_entries_never_reach_losses_or_gradients(rng):
    cfg = TrainConfig(eta=1.0)
    model = _mini_model(activation="relu")
    for _ in range(20):
        batch = _mini_batch(rng)

        def run(b):
            bound = bind(model)
            loss, breakdown = batch_loss(bound, b.inputs, b.targets, b.W, b.Y, b.G, cfg)
            bound.tape.backward(loss)
            return breakdown, bound.gradients()

        base_breakdown, base_grads = run(batch)
        noisy = MiniBatch(
            inputs=[np.where(batch.W[:, [v]] == 1, x, rng.normal(size=x.shape) * 3) for v, x in enumerate(batch.inputs)],
            targets=[np.where(batch.W[:, [v]] == 1, x, rng.normal(size=x.shape) * 3) for v, x in enumerate(batch.targets)],
            W=batch.W,
            Y=np.where(batch.G == 1, batch.Y, (rng.random(batch.Y.shape) < 0.5).astype(float)),
            G=batch.G,
        )
        noisy_breakdown, noisy_grads = run(noisy)
        assert noisy_breakdown == base_breakdown
        for name in base_grads:
            assert np.max(np.abs(noisy_grads[name] - base_grads[name])) <= 1e-12


def test_losses_are_nonnegative(rng):
    model = _mini_model(activation="relu")
    for _ in range(5):
        batch = _mini_batch(rng)
        _, b = batch_loss(bind(model), batch.inputs, batch.targets, batch.W, batch.Y, batch.G, TrainConfig())
        assert min(b.l_mc, b.l_gc, b.l_ccc, b.l_re) >= 0.0


# ---------------------------------------------------------
# optimizing the contrastive loss alone
# ---------------------------------------------------------

def _unit_rows(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _descend(S, O, steps, lr, free_private):
    W = np.ones((1, len(S)))
    for _ in range(steps):
        tape = Tape()
        s = [tape.leaf(x) for x in S]
        o = [tape.leaf(x) if free_private else tape.constant(x) for x in O]
        tape.backward(contrastive_loss(s, o, W))
        S = [_unit_rows(x - lr * node.grad) for x, node in zip(S, s)]
        if free_private:
            O = [_unit_rows(x - lr * node.grad) for x, node in zip(O, o)]
    return S, O


def _loss(S, O):
    tape = Tape()
    return contrastive_loss([tape.leaf(x) for x in S], [tape.leaf(x) for x in O], np.ones((1, len(S)))).item()


def test_contrastive_descent_aligns_shared_and_separates_channels(rng):
    e = np.eye(8)
    O = [e[[0]], _unit_rows(e[[0]] + e[[1]]), _unit_rows(e[[1]] + e[[2]])]
    S = [_unit_rows(rng.normal(size=(1, 8))) for _ in range(3)]
    S, _ = _descend(S, O, steps=500, lr=1.0, free_private=False)

    shared_cos = [float(S[u] @ S[v].T) for u in range(3) for v in range(3) if u != v]
    cross_abs = [abs(float(S[u] @ O[v].T)) for u in range(3) for v in range(3)]
    assert np.mean(shared_cos) > 0.95
    assert np.mean(cross_abs) < 0.1


def test_contrastive_descent_on_both_channels_reduces_loss(rng):
    S = [_unit_rows(rng.normal(size=(1, 8))) for _ in range(3)]
    O = [_unit_rows(rng.normal(size=(1, 8))) for _ in range(3)]
    start = _loss(S, O)
    S, O = _descend(S, O, steps=200, lr=0.5, free_private=True)
    assert _loss(S, O) < 0.1 * start
    assert np.mean([abs(float(S[u] @ O[v].T)) for u in range(3) for v in range(3)]) < 0.1
