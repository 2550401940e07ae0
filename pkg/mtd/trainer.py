"""
trainer.py
----------
Training engine: per-epoch fragment masks, shuffled mini-batches, loss
assembly, reverse pass and SGD-with-momentum updates. Also evaluation on a
test split and the ablation variants.

Each epoch:
  1. build fresh masks and apply them to the training views
  2. shuffle the batch order
  3. per batch: forward -> batch graph -> losses -> backward -> update
"""

import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .constants import (
    DEFAULT_ALPHA,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BETA,
    DEFAULT_EPOCHS,
    DEFAULT_ETA,
    DEFAULT_GAMMA,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MASK_RATE,
    DEFAULT_MOMENTUM,
    DEFAULT_WEIGHT_DECAY,
)
from .dataset import MultiViewDataset
from .errors import ConfigError, ContractError, DimensionError, NumericError, TrainingError
from .graph import build_graph, graph_loss
from .helpers import iter_batches, make_rng
from .losses import (
    CONTRASTIVE_REDUCTIONS,
    LossBreakdown,
    LossParts,
    LossWeights,
    classification_loss,
    contrastive_loss,
    mean_breakdown,
    reconstruction_loss,
    total_loss,
)
from .masking import MaskSpec, apply_masks, build_masks
from .metrics import MetricsReport, evaluate_scores
from .model import BoundModel, ModelSpec, MtdModel, bind, channel_similarity, forward, predict, save_checkpoint
from .tensor import Tape, ValueNode

logger = logging.getLogger(__name__)


# ---------------------------------------------------------
# CONFIGURATION
# ---------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    momentum: float = DEFAULT_MOMENTUM
    batch_size: int = DEFAULT_BATCH_SIZE
    epochs: int = DEFAULT_EPOCHS
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA
    mask_rate: float = DEFAULT_MASK_RATE
    mask_inclusive: bool = False
    eta: float = DEFAULT_ETA
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    seed: int = 0
    # 0 evaluates after the last epoch only
    eval_every: int = 0
    contrastive_reduction: str = "mean"

    def validate(self) -> "TrainConfig":
        problems = []
        if self.learning_rate < 0:
            problems.append(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            problems.append(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            problems.append(f"epochs must be >= 1, got {self.epochs}")
        for name in ("alpha", "beta", "gamma", "weight_decay"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0 <= self.mask_rate < 1:
            problems.append(f"mask_rate must be in [0, 1), got {self.mask_rate}")
        if self.eta <= 0:
            problems.append(f"eta must be > 0, got {self.eta}")
        if self.eval_every < 0:
            problems.append(f"eval_every must be >= 0, got {self.eval_every}")
        if self.contrastive_reduction not in CONTRASTIVE_REDUCTIONS:
            problems.append(f"contrastive_reduction must be one of {CONTRASTIVE_REDUCTIONS}")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.beta, self.gamma)

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown training keys: {', '.join(unknown)}")
        return cls(**dict(data)).validate()


# ---------------------------------------------------------
# OPTIMISER
# ---------------------------------------------------------

class SgdMomentum:
    """Classical momentum: v <- mu v - lr (g + wd p); p <- p + v (in place)."""

    def __init__(self, learning_rate: float, momentum: float, weight_decay: float = 0.0):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: Dict[str, np.ndarray] = {}

    def step(self, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        for name, param in params.items():
            grad = grads[name]
            if grad.shape != param.shape:
                raise DimensionError(f"{name}: gradient {grad.shape} vs parameter {param.shape}")
            if self.weight_decay:
                grad = grad + self.weight_decay * param
            v = self.velocity.get(name)
            v = -self.learning_rate * grad if v is None else self.momentum * v - self.learning_rate * grad
            self.velocity[name] = v
            param += v


# ---------------------------------------------------------
# RUN RECORD
# ---------------------------------------------------------

@dataclass
class RunRecord:
    config: Dict
    epoch_losses: List[LossBreakdown] = field(default_factory=list)
    evaluations: List[Tuple[int, MetricsReport]] = field(default_factory=list)
    checkpoint_path: Optional[str] = None
    seed: int = 0
    wall_clock_s: float = 0.0
    epoch_seconds: List[float] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    # (epoch, channel cosine matrix) of one tracked training row; epoch 0 is the initial model
    similarities: List[Tuple[int, np.ndarray]] = field(default_factory=list)
    similarity_names: List[str] = field(default_factory=list)

    @property
    def final_report(self) -> Optional[MetricsReport]:
        return self.evaluations[-1][1] if self.evaluations else None

    def to_dict(self) -> Dict:
        return {
            "config": self.config,
            "per_epoch_losses": [b.as_dict() for b in self.epoch_losses],
            "evaluations": [{"epoch": epoch, **report.as_dict()} for epoch, report in self.evaluations],
            "checkpoint_path": self.checkpoint_path,
            "seed": self.seed,
            "wall_clock_s": self.wall_clock_s,
            "epoch_seconds": self.epoch_seconds,
            "warnings": self.warnings,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunRecord":
        try:
            return cls(
                config=dict(data["config"]),
                epoch_losses=[LossBreakdown(**row) for row in data["per_epoch_losses"]],
                evaluations=[(int(row["epoch"]), MetricsReport.from_dict(row)) for row in data["evaluations"]],
                checkpoint_path=data.get("checkpoint_path"),
                seed=int(data.get("seed", 0)),
                wall_clock_s=float(data.get("wall_clock_s", 0.0)),
                epoch_seconds=[float(s) for s in data.get("epoch_seconds", [])],
                warnings=list(data.get("warnings", [])),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed run record ({exc})") from exc


# ---------------------------------------------------------
# ONE BATCH
# ---------------------------------------------------------

def batch_loss(bound: BoundModel, inputs: Sequence[np.ndarray], targets: Sequence[np.ndarray],
               view_index: np.ndarray, labels: np.ndarray, label_index: np.ndarray,
               cfg: TrainConfig) -> Tuple[ValueNode, LossBreakdown]:
    """L_all for one batch; ``inputs`` are the masked views, ``targets`` the unmasked ones."""
    tape = bound.tape
    model = bound.model
    nodes = [tape.constant(x, f"view_{v}") for v, x in enumerate(inputs)]
    out = forward(bound, nodes, view_index, reconstruct=cfg.gamma > 0)
    parts = LossParts(l_mc=classification_loss(out.predictions, labels, label_index))
    if cfg.alpha > 0:
        parts.l_gc = graph_loss(out.fused, build_graph(labels, label_index, cfg.eta))
    if cfg.beta > 0 and model.two_channel and model.n_views >= 2:
        parts.l_ccc = contrastive_loss(out.shared, out.private, view_index, cfg.contrastive_reduction)
    if cfg.gamma > 0:
        parts.l_re = reconstruction_loss(out.reconstructions, targets, view_index)
    return total_loss(parts, cfg.weights())


def _check_compatible(data: MultiViewDataset, model: MtdModel) -> None:
    if data.view_dims != model.view_dims:
        raise DimensionError(f"data view dims {data.view_dims} vs model {model.view_dims}")
    if data.n_labels != model.n_labels:
        raise DimensionError(f"data has {data.n_labels} labels, model predicts {model.n_labels}")


# ---------------------------------------------------------
# TRAINING LOOP
# ---------------------------------------------------------

def train(data: MultiViewDataset, model: MtdModel, cfg: TrainConfig,
          test_data: Optional[MultiViewDataset] = None,
          checkpoint_path=None, similarity_row: Optional[int] = None) -> RunRecord:
    """Train ``model`` in place on the training split and return the run record.

    With ``similarity_row`` set, the channel similarity matrix of that
    training row is recorded before the first epoch and on every
    evaluation epoch.
    """
    cfg.validate()
    if data.n_samples == 0:
        raise ContractError("the training split is empty")
    data.validate(source="training split")
    _check_compatible(data, model)
    if similarity_row is not None and not 0 <= similarity_row < data.n_samples:
        raise ConfigError(f"similarity row {similarity_row} is outside [0, {data.n_samples})")

    record = RunRecord(config=cfg.to_dict(), seed=cfg.seed)

    def snapshot(epoch: int) -> None:
        if similarity_row is None:
            return
        matrix, names = channel_similarity(model, data.views, data.view_index, similarity_row)
        record.similarities.append((epoch, matrix))
        record.similarity_names = names

    snapshot(0)
    if cfg.beta > 0 and not model.two_channel:
        record.warnings.append("single-channel model: the contrastive loss is skipped")
    optimizer = SgdMomentum(cfg.learning_rate, cfg.momentum, cfg.weight_decay)
    mask_spec = MaskSpec(cfg.mask_rate, cfg.seed, cfg.mask_inclusive)
    n = data.n_samples
    started = time.perf_counter()

    for epoch in range(1, cfg.epochs + 1):
        epoch_start = time.perf_counter()
        if cfg.mask_rate > 0:
            inputs = apply_masks(data.views, build_masks(n, data.view_dims, mask_spec, epoch))
        else:
            inputs = data.views
        order = make_rng(cfg.seed, 1, epoch).permutation(n)

        breakdowns = []
        for batch_no, rows in enumerate(iter_batches(order, cfg.batch_size)):
            bound = bind(model, Tape())
            try:
                loss, breakdown = batch_loss(
                    bound,
                    [x[rows] for x in inputs],
                    [x[rows] for x in data.views],
                    data.view_index[rows],
                    data.labels[rows],
                    data.label_index[rows],
                    cfg,
                )
                bound.tape.backward(loss)
            except NumericError as exc:
                raise TrainingError(f"epoch {epoch}, batch {batch_no}: {exc}") from exc
            if not np.isfinite(breakdown.l_total):
                raise TrainingError(f"epoch {epoch}, batch {batch_no}: non-finite loss {breakdown.l_total}")
            optimizer.step(model.parameters(), bound.gradients())
            breakdowns.append(breakdown)

        epoch_loss = mean_breakdown(breakdowns)
        record.epoch_losses.append(epoch_loss)
        record.epoch_seconds.append(time.perf_counter() - epoch_start)
        logger.info("epoch %d/%d  l_total=%.6f  l_mc=%.6f", epoch, cfg.epochs, epoch_loss.l_total, epoch_loss.l_mc)

        due = epoch == cfg.epochs or (cfg.eval_every and epoch % cfg.eval_every == 0)
        if due:
            snapshot(epoch)
        if test_data is not None and due:
            report = evaluate(model, test_data)
            record.evaluations.append((epoch, report))
            logger.info("epoch %d  test AP=%.4f", epoch, report.ap)

    record.wall_clock_s = time.perf_counter() - started
    if test_data is not None and not test_data.label_index.all():
        record.warnings.append("test labels were not complete; metrics use the weak labels")
    if checkpoint_path is not None:
        record.checkpoint_path = str(save_checkpoint(model, checkpoint_path))
    return record


def evaluate(model: MtdModel, data: MultiViewDataset) -> MetricsReport:
    """Score the unmasked test views and compute all six metrics."""
    _check_compatible(data, model)
    scores = predict(model, data.views, data.view_index)
    return evaluate_scores(scores, data.labels)


# ---------------------------------------------------------
# ABLATION
# ---------------------------------------------------------

@dataclass(frozen=True)
class AblationVariant:
    name: str
    two_channel: bool = True
    overrides: Tuple[Tuple[str, float], ...] = ()

    def apply(self, cfg: TrainConfig) -> TrainConfig:
        cfg = replace(cfg, **dict(self.overrides))
        if not self.two_channel:
            cfg = replace(cfg, beta=0.0)
        return cfg


_NO_AUX = (("alpha", 0.0), ("beta", 0.0), ("gamma", 0.0))

ABLATION_VARIANTS: Dict[str, AblationVariant] = {
    v.name: v for v in (
        AblationVariant("full"),
        AblationVariant("single_channel", two_channel=False),
        AblationVariant("no_mask", overrides=(("mask_rate", 0.0),)),
        AblationVariant("no_gc", overrides=(("alpha", 0.0),)),
        AblationVariant("no_re", overrides=(("gamma", 0.0),)),
        AblationVariant("no_ccc", overrides=(("beta", 0.0),)),
        AblationVariant("dch_baseline", overrides=_NO_AUX),
        AblationVariant("dch_gc", overrides=(("beta", 0.0), ("gamma", 0.0))),
        AblationVariant("dch_gc_re", overrides=(("beta", 0.0),)),
        AblationVariant("single_channel_no_mask", two_channel=False, overrides=(("mask_rate", 0.0),)),
        AblationVariant("dch_baseline_no_mask", overrides=_NO_AUX + (("mask_rate", 0.0),)),
    )
}


def resolve_variants(names: Sequence[str]) -> List[AblationVariant]:
    unknown = [name for name in names if name not in ABLATION_VARIANTS]
    if unknown:
        raise ConfigError(f"unknown ablation variant(s): {', '.join(unknown)}; "
                          f"choose from {', '.join(ABLATION_VARIANTS)}")
    return [ABLATION_VARIANTS[name] for name in names]


def run_variant(variant: AblationVariant, train_data: MultiViewDataset, test_data: MultiViewDataset,
                cfg: TrainConfig, model_spec: ModelSpec, checkpoint_path=None) -> RunRecord:
    """Train one variant from ``cfg.seed``; the record's config reflects the variant."""
    variant_cfg = variant.apply(cfg)
    model = model_spec.build(train_data.view_dims, train_data.n_labels, variant_cfg.seed, variant.two_channel)
    record = train(train_data, model, variant_cfg, test_data, checkpoint_path)
    record.config["variant"] = variant.name
    record.config["two_channel"] = variant.two_channel
    return record


def run_ablation(train_data: MultiViewDataset, test_data: MultiViewDataset, cfg: TrainConfig,
                 variants: Sequence[str], model_spec: Optional[ModelSpec] = None) -> List[Tuple[str, MetricsReport]]:
    model_spec = model_spec or ModelSpec()
    results = []
    for variant in resolve_variants(variants):
        logger.info("ablation variant %s (seed %d)", variant.name, cfg.seed)
        record = run_variant(variant, train_data, test_data, cfg, model_spec)
        results.append((variant.name, record.final_report))
    return results
