"""
model.py
--------
Two-channel encoders, decoders, cross-view fusion, gated fusion and the
linear classifier. Owns every learnable parameter.

Parameters are plain float64 arrays on ``MtdModel``. A forward pass binds
them to a tape as leaves (``bind``) so the trainer can read gradients back
by parameter name.
"""

import io
import json
import logging
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import CLASSIFIER_INPUTS, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN, DEFAULT_HIDDEN_ACTIVATION
from .errors import ContractError, DatasetError, DimensionError
from .fileio import read_mvf_payload, write_mvf_payload
from .helpers import make_rng
from .tensor import (
    Tape,
    ValueNode,
    activation,
    add,
    concat_cols,
    div,
    matmul,
    mul,
    sigmoid,
)

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"MTDC"
CHECKPOINT_VERSION = 1
OUTPUT_ACTIVATIONS = ("linear", "sigmoid", "relu")


# ---------------------------------------------------------
# MLP
# ---------------------------------------------------------

@dataclass
class MlpSpec:
    widths: List[int]
    hidden_activation: str = DEFAULT_HIDDEN_ACTIVATION
    output_activation: str = "linear"

    def validate(self) -> "MlpSpec":
        if len(self.widths) < 2:
            raise ContractError(f"an MLP needs input and output widths, got {self.widths}")
        if any(int(w) <= 0 for w in self.widths):
            raise ContractError(f"MLP widths must be positive, got {self.widths}")
        if self.hidden_activation not in ("sigmoid", "relu"):
            raise ContractError(f"unknown hidden activation '{self.hidden_activation}'")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ContractError(f"unknown output activation '{self.output_activation}'")
        return self

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1


@dataclass
class Mlp:
    spec: MlpSpec
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def parameters(self, prefix: str) -> List[Tuple[str, np.ndarray]]:
        out = []
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"{prefix}.weight.{k}", w))
            out.append((f"{prefix}.bias.{k}", b))
        return out

    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_mlp(spec: MlpSpec, rng: np.random.Generator) -> Mlp:
    spec.validate()
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        weights.append(glorot_uniform(fan_in, fan_out, rng))
        biases.append(np.zeros((1, fan_out)))
    return Mlp(spec, weights, biases)


# ---------------------------------------------------------
# MODEL
# ---------------------------------------------------------

@dataclass
class MtdModel:
    view_dims: List[int]
    embed_dim: int
    n_labels: int
    shared_encoders: List[Mlp]
    private_encoders: List[Mlp]
    decoders: List[Mlp]
    classifier_weight: np.ndarray
    classifier_bias: np.ndarray
    classifier_input: str = "gated"
    hidden: List[int] = field(default_factory=lambda: list(DEFAULT_HIDDEN))
    hidden_activation: str = DEFAULT_HIDDEN_ACTIVATION

    @property
    def n_views(self) -> int:
        return len(self.view_dims)

    @property
    def two_channel(self) -> bool:
        return bool(self.private_encoders)

    def parameters(self) -> "OrderedDict[str, np.ndarray]":
        """Every learnable array in checkpoint order."""
        params: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for group, mlps in (("shared", self.shared_encoders), ("private", self.private_encoders),
                            ("decoder", self.decoders)):
            for v, mlp in enumerate(mlps):
                params.update(mlp.parameters(f"{group}.{v}"))
        params["classifier.weight"] = self.classifier_weight
        params["classifier.bias"] = self.classifier_bias
        return params

    def copy(self) -> "MtdModel":
        def clone(mlps):
            return [Mlp(m.spec, [w.copy() for w in m.weights], [b.copy() for b in m.biases]) for m in mlps]

        return MtdModel(list(self.view_dims), self.embed_dim, self.n_labels,
                        clone(self.shared_encoders), clone(self.private_encoders), clone(self.decoders),
                        self.classifier_weight.copy(), self.classifier_bias.copy(),
                        self.classifier_input, list(self.hidden), self.hidden_activation)


def init_model(view_dims: Sequence[int], embed_dim: int = DEFAULT_EMBED_DIM, n_labels: int = 1,
               hidden: Sequence[int] = DEFAULT_HIDDEN, seed: int = 0,
               hidden_activation: str = DEFAULT_HIDDEN_ACTIVATION, classifier_input: str = "gated",
               two_channel: bool = True) -> MtdModel:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    if classifier_input not in CLASSIFIER_INPUTS:
        raise ContractError(f"classifier_input must be one of {CLASSIFIER_INPUTS}")
    if classifier_input == "concat" and not two_channel:
        raise ContractError("the concat classifier input needs the proprietary channel")
    rng = make_rng(seed, 23)
    hidden = [int(h) for h in hidden]

    def encoder(d):
        return init_mlp(MlpSpec([int(d), *hidden, embed_dim], hidden_activation), rng)

    def decoder(d):
        return init_mlp(MlpSpec([embed_dim, *reversed(hidden), int(d)], hidden_activation), rng)

    shared = [encoder(d) for d in view_dims]
    private = [encoder(d) for d in view_dims] if two_channel else []
    decoders = [decoder(d) for d in view_dims]
    fan_in = embed_dim * (2 if classifier_input == "concat" else 1)
    return MtdModel(
        view_dims=[int(d) for d in view_dims],
        embed_dim=int(embed_dim),
        n_labels=int(n_labels),
        shared_encoders=shared,
        private_encoders=private,
        decoders=decoders,
        classifier_weight=glorot_uniform(fan_in, n_labels, rng),
        classifier_bias=np.zeros((1, n_labels)),
        classifier_input=classifier_input,
        hidden=hidden,
        hidden_activation=hidden_activation,
    )


@dataclass
class ModelSpec:
    """Architecture settings shared by every run of an experiment."""

    embed_dim: int = DEFAULT_EMBED_DIM
    hidden: List[int] = field(default_factory=lambda: list(DEFAULT_HIDDEN))
    hidden_activation: str = DEFAULT_HIDDEN_ACTIVATION
    classifier_input: str = "gated"

    def validate(self) -> "ModelSpec":
        if self.embed_dim <= 0 or any(int(h) <= 0 for h in self.hidden):
            raise ContractError(f"embed_dim and hidden widths must be positive ({self.embed_dim}, {self.hidden})")
        if self.hidden_activation not in ("sigmoid", "relu"):
            raise ContractError(f"unknown hidden activation '{self.hidden_activation}'")
        if self.classifier_input not in CLASSIFIER_INPUTS:
            raise ContractError(f"classifier_input must be one of {CLASSIFIER_INPUTS}")
        return self

    def build(self, view_dims: Sequence[int], n_labels: int, seed: int, two_channel: bool = True) -> MtdModel:
        self.validate()
        # one channel has nothing to concatenate
        classifier_input = self.classifier_input if two_channel else "gated"
        return init_model(view_dims, self.embed_dim, n_labels, self.hidden, seed,
                          self.hidden_activation, classifier_input, two_channel)


@dataclass
class BoundModel:
    """A model whose parameters are leaves on one tape."""

    model: MtdModel
    tape: Tape
    nodes: Dict[str, ValueNode]

    def gradients(self) -> Dict[str, np.ndarray]:
        return {name: node.grad for name, node in self.nodes.items()}


def bind(model: MtdModel, tape: Optional[Tape] = None) -> BoundModel:
    tape = tape or Tape()
    nodes = {name: tape.leaf(value, name) for name, value in model.parameters().items()}
    return BoundModel(model, tape, nodes)


@dataclass
class ForwardOutputs:
    shared: List[ValueNode]
    private: List[ValueNode]
    fused_shared: ValueNode
    fused_private: Optional[ValueNode]
    fused: ValueNode
    reconstructions: List[ValueNode]
    predictions: ValueNode


# ---------------------------------------------------------
# FORWARD PIECES
# ---------------------------------------------------------

def mlp_forward(bound: BoundModel, prefix: str, mlp: Mlp, x: ValueNode) -> ValueNode:
    if x.shape[1] != mlp.spec.widths[0]:
        raise DimensionError(f"{prefix}: input width {x.shape[1]}, expected {mlp.spec.widths[0]}")
    h = x
    last = mlp.spec.n_layers - 1
    for k in range(mlp.spec.n_layers):
        h = add(matmul(h, bound.nodes[f"{prefix}.weight.{k}"]), bound.nodes[f"{prefix}.bias.{k}"])
        kind = mlp.spec.hidden_activation if k < last else mlp.spec.output_activation
        if kind != "linear":
            h = activation(h, kind)
    return h


def _check_view_index(view_index: np.ndarray, rows: int, n_views: int) -> np.ndarray:
    W = np.asarray(view_index, dtype=np.float64)
    if W.shape != (rows, n_views):
        raise DimensionError(f"W shape {W.shape}, expected {(rows, n_views)}")
    return W


def encode(bound: BoundModel, views: Sequence[ValueNode],
           view_index: np.ndarray) -> Tuple[List[ValueNode], List[ValueNode]]:
    """Per-view shared and proprietary embeddings; missing rows are encoded too and gated later."""
    model = bound.model
    if len(views) != model.n_views:
        raise DimensionError(f"{len(views)} views given, model has {model.n_views}")
    _check_view_index(view_index, views[0].shape[0], model.n_views)
    shared = [mlp_forward(bound, f"shared.{v}", mlp, x) for v, (mlp, x) in enumerate(zip(model.shared_encoders, views))]
    private = [mlp_forward(bound, f"private.{v}", mlp, x) for v, (mlp, x) in enumerate(zip(model.private_encoders, views))]
    return shared, private


def _fuse_channel(features: Sequence[ValueNode], W: np.ndarray) -> ValueNode:
    tape = features[0].tape
    rows, width = features[0].shape
    counts = W.sum(axis=1, keepdims=True)
    if np.any(counts == 0):
        row = int(np.flatnonzero(counts[:, 0] == 0)[0])
        raise ContractError(f"sample row {row} has no available view to fuse")
    acc = None
    for v, f in enumerate(features):
        term = mul(f, tape.constant(np.repeat(W[:, [v]], width, axis=1), "view_gate"))
        acc = term if acc is None else add(acc, term)
    return div(acc, tape.constant(np.repeat(counts, width, axis=1), "view_count"))


def fuse(shared: Sequence[ValueNode], private: Sequence[ValueNode],
         view_index: np.ndarray) -> Tuple[ValueNode, Optional[ValueNode]]:
    """Availability-weighted mean over views for each channel."""
    W = _check_view_index(view_index, shared[0].shape[0], len(shared))
    fused_shared = _fuse_channel(shared, W)
    fused_private = _fuse_channel(private, W) if private else None
    return fused_shared, fused_private


def gate_fuse(fused_shared: ValueNode, fused_private: ValueNode) -> ValueNode:
    """Z = sigmoid(O_bar) * S_bar."""
    if fused_shared.shape != fused_private.shape:
        raise DimensionError(f"gate_fuse: shapes {fused_shared.shape} and {fused_private.shape} differ")
    return mul(sigmoid(fused_private), fused_shared)


def decode(bound: BoundModel, shared: Sequence[ValueNode], private: Sequence[ValueNode]) -> List[ValueNode]:
    """Decoder v reconstructs view v from S^(v) + O^(v) (S^(v) alone for one channel)."""
    model = bound.model
    out = []
    for v, mlp in enumerate(model.decoders):
        h = add(shared[v], private[v]) if private else shared[v]
        out.append(mlp_forward(bound, f"decoder.{v}", mlp, h))
    return out


def classify(bound: BoundModel, Z: ValueNode) -> ValueNode:
    weight, bias = bound.nodes["classifier.weight"], bound.nodes["classifier.bias"]
    if Z.shape[1] != weight.shape[0]:
        raise DimensionError(f"classifier expects width {weight.shape[0]}, got {Z.shape[1]}")
    return sigmoid(add(matmul(Z, weight), bias))


def forward(bound: BoundModel, views: Sequence[ValueNode], view_index: np.ndarray,
            reconstruct: bool = True) -> ForwardOutputs:
    """encode -> fuse -> gate -> classify (and decode when ``reconstruct``)."""
    model = bound.model
    shared, private = encode(bound, views, view_index)
    fused_shared, fused_private = fuse(shared, private, view_index)
    if not model.two_channel:
        Z = fused_shared
    elif model.classifier_input == "concat":
        Z = concat_cols([fused_shared, fused_private])
    else:
        Z = gate_fuse(fused_shared, fused_private)
    reconstructions = decode(bound, shared, private) if reconstruct else []
    return ForwardOutputs(shared, private, fused_shared, fused_private, Z, reconstructions, classify(bound, Z))


def predict(model: MtdModel, views: Sequence[np.ndarray], view_index: np.ndarray) -> np.ndarray:
    """Inference on unmasked inputs; returns the score matrix P."""
    bound = bind(model)
    nodes = [bound.tape.constant(x, f"view_{v}") for v, x in enumerate(views)]
    return forward(bound, nodes, view_index, reconstruct=False).predictions.value.copy()


def channel_similarity(model: MtdModel, views: Sequence[np.ndarray], view_index: np.ndarray,
                       row: int) -> Tuple[np.ndarray, List[str]]:
    """Cosine matrix over one sample's (s^1..s^m, o^1..o^m).

    Rows and columns of missing instances are zero. An available instance
    whose embedding has zero norm is also zeroed, and a warning names it.
    """
    W = np.asarray(view_index, dtype=np.float64)
    bound = bind(model)
    nodes = [bound.tape.constant(np.asarray(x)[[row]], f"view_{v}") for v, x in enumerate(views)]
    shared, private = encode(bound, nodes, W[[row]])
    names, vectors = [], []
    for channel, feats in (("S", shared), ("O", private)):
        for v, f in enumerate(feats):
            name = f"{channel}_{v + 1}"
            vec = f.value[0]
            norm = np.linalg.norm(vec)
            if W[row, v] == 1 and norm == 0:
                logger.warning("row %d: view %d is available but %s has zero norm", row, v + 1, name)
            available = W[row, v] == 1 and norm > 0
            vectors.append(vec / norm if available else np.zeros_like(vec))
            names.append(name)
    stacked = np.vstack(vectors)
    return stacked @ stacked.T, names


# ---------------------------------------------------------
# CHECKPOINTS
# ---------------------------------------------------------

def _manifest(model: MtdModel) -> dict:
    return {
        "view_dims": model.view_dims,
        "embed_dim": model.embed_dim,
        "n_labels": model.n_labels,
        "hidden": model.hidden,
        "hidden_activation": model.hidden_activation,
        "classifier_input": model.classifier_input,
        "two_channel": model.two_channel,
        "parameters": [[name, *value.shape] for name, value in model.parameters().items()],
    }


def save_checkpoint(model: MtdModel, path) -> Path:
    """MTDC magic, u32 version, u32 manifest length, JSON manifest, then MVF1 payloads."""
    path = Path(path)
    manifest = json.dumps(_manifest(model)).encode("utf-8")
    with open(path, "wb") as f:
        f.write(struct.pack("<4sII", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(manifest)))
        f.write(manifest)
        for value in model.parameters().values():
            write_mvf_payload(f, value)
    return path


def load_checkpoint(path) -> MtdModel:
    path = Path(path)
    stream = io.BytesIO(path.read_bytes())
    header = stream.read(12)
    if len(header) != 12:
        raise DatasetError(f"{path}: truncated checkpoint header")
    magic, version, length = struct.unpack("<4sII", header)
    if magic != CHECKPOINT_MAGIC:
        raise DatasetError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    if version != CHECKPOINT_VERSION:
        raise DatasetError(f"{path}: unsupported checkpoint version {version}")
    try:
        manifest = json.loads(stream.read(length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetError(f"{path}: unreadable manifest ({exc})") from exc

    model = init_model(manifest["view_dims"], manifest["embed_dim"], manifest["n_labels"],
                       manifest["hidden"], 0, manifest["hidden_activation"],
                       manifest["classifier_input"], manifest["two_channel"])
    params = model.parameters()
    listed = [name for name, _, _ in manifest["parameters"]]
    if listed != list(params):
        missing = [name for name in params if name not in listed]
        unknown = [name for name in listed if name not in params]
        raise DatasetError(f"{path}: parameter list does not match the architecture "
                           f"(missing {missing}, unknown {unknown}, or out of order)")
    for name, rows, cols in manifest["parameters"]:
        value = read_mvf_payload(stream, source=f"{path}:{name}")
        if value.shape != (rows, cols) or value.shape != params[name].shape:
            raise DatasetError(f"{path}: {name} has shape {value.shape}, expected {params[name].shape}")
        params[name][...] = value
    leftover = len(stream.read())
    if leftover:
        raise DatasetError(f"{path}: {leftover} trailing bytes after the last parameter")
    return model
