import json
import logging
import struct

import numpy as np
import pytest

from mtd.errors import ContractError, DatasetError, DimensionError
from mtd.fileio import write_mvf_payload
from mtd.model import (
    ModelSpec,
    bind,
    channel_similarity,
    forward,
    fuse,
    gate_fuse,
    init_model,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from mtd.tensor import Tape


def _small_model(**kwargs):
    settings = dict(embed_dim=4, n_labels=3, hidden=[5], seed=2)
    settings.update(kwargs)
    return init_model([6, 3], **settings)


def test_init_is_deterministic_per_seed():
    a, b, c = _small_model(), _small_model(), _small_model(seed=3)
    for name, value in a.parameters().items():
        np.testing.assert_array_equal(value, b.parameters()[name])
    assert not np.array_equal(a.classifier_weight, c.classifier_weight)


def test_parameter_layout():
    model = _small_model()
    params = model.parameters()
    assert params["shared.0.weight.0"].shape == (6, 5)
    assert params["shared.0.weight.1"].shape == (5, 4)
    assert params["private.1.weight.0"].shape == (3, 5)
    assert params["decoder.1.weight.1"].shape == (5, 3)
    assert params["classifier.weight"].shape == (4, 3)
    assert params["classifier.bias"].shape == (1, 3)
    assert np.all(params["shared.0.bias.0"] == 0)
    assert list(params)[-2:] == ["classifier.weight", "classifier.bias"]


def test_single_channel_has_no_proprietary_encoders():
    model = _small_model(two_channel=False)
    assert not model.two_channel
    assert not any(name.startswith("private") for name in model.parameters())


def test_concat_classifier_needs_two_channels():
    with pytest.raises(ContractError):
        _small_model(classifier_input="concat", two_channel=False)
    assert _small_model(classifier_input="concat").classifier_weight.shape == (8, 3)


def test_fuse_averages_available_views():
    tape = Tape()
    s = [tape.leaf([[1.0, 2.0], [1.0, 2.0]]), tape.leaf([[3.0, 4.0], [9.0, 9.0]])]
    W = np.array([[1.0, 1.0], [1.0, 0.0]])
    fused, private = fuse(s, [], W)
    np.testing.assert_array_equal(fused.value, [[2.0, 3.0], [1.0, 2.0]])
    assert private is None


def test_fuse_rejects_row_without_views():
    tape = Tape()
    s = [tape.leaf([[1.0]]), tape.leaf([[2.0]])]
    with pytest.raises(ContractError, match="row 0"):
        fuse(s, [], np.zeros((1, 2)))


def test_gate_with_zero_proprietary_halves_shared():
    tape = Tape()
    z = gate_fuse(tape.leaf([[2.0, -4.0]]), tape.leaf([[0.0, 0.0]]))
    np.testing.assert_array_equal(z.value, [[1.0, -2.0]])


def test_forward_shapes(rng):
    model = _small_model()
    bound = bind(model)
    views = [bound.tape.constant(rng.normal(size=(7, 6))), bound.tape.constant(rng.normal(size=(7, 3)))]
    out = forward(bound, views, np.ones((7, 2)))
    assert out.fused.shape == (7, 4)
    assert out.predictions.shape == (7, 3)
    assert [r.shape for r in out.reconstructions] == [(7, 6), (7, 3)]
    assert np.all((out.predictions.value > 0) & (out.predictions.value < 1))


def test_forward_rejects_wrong_view_width(rng):
    bound = bind(_small_model())
    views = [bound.tape.constant(rng.normal(size=(2, 5))), bound.tape.constant(rng.normal(size=(2, 3)))]
    with pytest.raises(DimensionError):
        forward(bound, views, np.ones((2, 2)))


def test_predictions_ignore_missing_view_features(rng):
    model = _small_model()
    views = [rng.normal(size=(5, 6)), rng.normal(size=(5, 3))]
    W = np.array([[1, 1], [1, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    clean = [x * W[:, [v]] for v, x in enumerate(views)]
    junk = [np.where(W[:, [v]] == 1, x, rng.normal(size=x.shape) * 10) for v, x in enumerate(views)]
    np.testing.assert_array_equal(predict(model, clean, W), predict(model, junk, W))


def test_checkpoint_round_trip(tmp_path, rng):
    model = _small_model(classifier_input="concat", hidden_activation="sigmoid")
    path = save_checkpoint(model, tmp_path / "m.mtdc")
    loaded = load_checkpoint(path)
    assert loaded.classifier_input == "concat"
    assert loaded.hidden_activation == "sigmoid"
    for name, value in model.parameters().items():
        np.testing.assert_array_equal(loaded.parameters()[name], value)
    views = [rng.normal(size=(4, 6)), rng.normal(size=(4, 3))]
    np.testing.assert_array_equal(predict(model, views, np.ones((4, 2))), predict(loaded, views, np.ones((4, 2))))


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.mtdc"
    path.write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(DatasetError, match="magic"):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    path = save_checkpoint(_small_model(), tmp_path / "m.mtdc")
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DatasetError):
        load_checkpoint(path)


def _write_checkpoint(path, manifest, matrices, extra=b""):
    encoded = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as f:
        f.write(struct.pack("<4sII", b"MTDC", 1, len(encoded)))
        f.write(encoded)
        for matrix in matrices:
            write_mvf_payload(f, matrix)
        f.write(extra)
    return path


def test_checkpoint_must_list_every_parameter(tmp_path):
    model = _small_model()
    path = save_checkpoint(model, tmp_path / "m.mtdc")
    manifest = json.loads(path.read_bytes()[12:12 + struct.unpack("<4sII", path.read_bytes()[:12])[2]])
    first = list(model.parameters().values())[0]
    manifest["parameters"] = manifest["parameters"][:1]
    _write_checkpoint(path, manifest, [first])
    with pytest.raises(DatasetError, match="parameter list"):
        load_checkpoint(path)


def test_checkpoint_rejects_reordered_parameters(tmp_path):
    model = _small_model()
    path = save_checkpoint(model, tmp_path / "m.mtdc")
    manifest = json.loads(path.read_bytes()[12:12 + struct.unpack("<4sII", path.read_bytes()[:12])[2]])
    values = list(model.parameters().values())
    manifest["parameters"] = manifest["parameters"][::-1]
    _write_checkpoint(path, manifest, values[::-1])
    with pytest.raises(DatasetError, match="out of order"):
        load_checkpoint(path)


def test_checkpoint_trailing_bytes(tmp_path):
    path = save_checkpoint(_small_model(), tmp_path / "m.mtdc")
    path.write_bytes(path.read_bytes() + b"\x00" * 3)
    with pytest.raises(DatasetError, match="3 trailing bytes"):
        load_checkpoint(path)


@pytest.mark.parametrize("activation", ["relu", "sigmoid"])
def test_outputs_finite_for_large_inputs(rng, activation):
    model = _small_model(hidden_activation=activation)
    views = [rng.uniform(-100, 100, size=(50, 6)), rng.uniform(-100, 100, size=(50, 3))]
    views[0][0], views[1][1] = 100.0, -100.0
    P = predict(model, views, np.ones((50, 2)))
    assert np.all(np.isfinite(P))
    assert np.all((P >= 0) & (P <= 1))
    bound = bind(model)
    out = forward(bound, [bound.tape.constant(x) for x in views], np.ones((50, 2)))
    assert all(np.all(np.isfinite(r.value)) for r in out.reconstructions)
    assert np.all(np.isfinite(out.fused.value))


def test_channel_similarity_warns_on_zero_embedding(rng, caplog):
    model = _small_model()
    for value in model.parameters().values():
        value[...] = 0.0
    views = [rng.normal(size=(2, 6)), rng.normal(size=(2, 3))]
    with caplog.at_level(logging.WARNING, logger="mtd.model"):
        matrix, _ = channel_similarity(model, views, np.ones((2, 2)), row=0)
    assert np.all(matrix == 0)
    assert "view 1 is available but S_1 has zero norm" in caplog.text


def test_channel_similarity_matrix(rng):
    model = _small_model(hidden_activation="sigmoid")
    views = [rng.normal(size=(3, 6)), np.vstack([np.zeros((1, 3)), rng.normal(size=(2, 3))])]
    W = np.array([[1, 0], [1, 1], [1, 1]], dtype=float)
    matrix, names = channel_similarity(model, views, W, row=1)
    assert names == ["S_1", "S_2", "O_1", "O_2"]
    np.testing.assert_allclose(np.diag(matrix), 1.0)
    np.testing.assert_allclose(matrix, matrix.T)
    missing, _ = channel_similarity(model, views, W, row=0)
    assert np.all(missing[1] == 0) and np.all(missing[3] == 0)


def test_model_spec_build():
    model = ModelSpec(embed_dim=3, hidden=[4], classifier_input="concat").build([2, 2], 2, seed=0, two_channel=False)
    assert model.classifier_input == "gated"
    assert model.embed_dim == 3
    with pytest.raises(ContractError):
        ModelSpec(hidden_activation="tanh").validate()
