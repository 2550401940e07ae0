"""
losses.py
---------
The four training losses and their weighted total:

    L_all = L_mc + alpha * L_gc + beta * L_ccc + gamma * L_re

Every loss gates on the availability indices (W for views, G for labels),
so values stored at missing positions never reach a loss value or gradient.
"""

from dataclasses import asdict, dataclass
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .constants import CONTRASTIVE_EPS, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GAMMA, LOG_FLOOR
from .errors import ContractError, DimensionError
from .tensor import (
    ValueNode,
    add,
    clamp_min,
    div,
    log,
    mul,
    row_l2_normalize,
    scale,
    square,
    sub,
    sum_rows,
    total,
)

CONTRASTIVE_REDUCTIONS = ("mean", "sum")


@dataclass
class LossWeights:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA

    def validate(self) -> "LossWeights":
        for name, value in asdict(self).items():
            if value < 0:
                raise ContractError(f"loss weight {name} must be nonnegative, got {value}")
        return self


@dataclass
class LossParts:
    l_mc: ValueNode
    l_gc: Optional[ValueNode] = None
    l_ccc: Optional[ValueNode] = None
    l_re: Optional[ValueNode] = None


@dataclass
class LossBreakdown:
    l_mc: float
    l_gc: float
    l_ccc: float
    l_re: float
    l_total: float

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------
# CROSS-CHANNEL CONTRASTIVE LOSS
# ---------------------------------------------------------

def _cosine(a_hat: ValueNode, b_hat: ValueNode) -> ValueNode:
    return sum_rows(mul(a_hat, b_hat))


def contrastive_loss(shared: Sequence[ValueNode], private: Sequence[ValueNode], view_index: np.ndarray,
                     reduction: str = "mean", eps: float = CONTRASTIVE_EPS) -> ValueNode:
    """Per sample: mean negative-pair squared cosine over mean positive-pair similarity.

    Negatives are shared-proprietary pairs (coefficient 2, all u, v) and
    proprietary-proprietary pairs (u != v), normalised by 3n_i^2 - n_i;
    positives are shared-shared pairs (u != v) mapped to [0, 1] by (cos+1)/2,
    normalised by n_i^2 - n_i. n_i is the number of available views of
    sample i; samples with fewer than two are skipped.
    """
    m = len(shared)
    if m < 2:
        raise ContractError("the contrastive loss needs at least two views")
    if len(private) != m:
        raise DimensionError(f"{m} shared but {len(private)} proprietary feature matrices")
    if reduction not in CONTRASTIVE_REDUCTIONS:
        raise ContractError(f"reduction must be one of {CONTRASTIVE_REDUCTIONS}")
    tape = shared[0].tape
    W = np.asarray(view_index, dtype=np.float64)
    if W.shape != (shared[0].shape[0], m):
        raise DimensionError(f"W shape {W.shape}, expected {(shared[0].shape[0], m)}")

    counts = W.sum(axis=1, keepdims=True)
    contributing = counts >= 2
    n_contributing = int(contributing.sum())
    if n_contributing == 0:
        return tape.constant([[0.0]], "l_ccc")

    s_hat = [row_l2_normalize(s) for s in shared]
    o_hat = [row_l2_normalize(o) for o in private]

    def pair_gate(u, v):
        return tape.constant(W[:, [u]] * W[:, [v]], "pair_gate")

    cross = oo = pos = None
    for u, v in product(range(m), repeat=2):
        term = mul(square(_cosine(s_hat[u], o_hat[v])), pair_gate(u, v))
        cross = term if cross is None else add(cross, term)
        if u == v:
            continue
        term = mul(square(_cosine(o_hat[u], o_hat[v])), pair_gate(u, v))
        oo = term if oo is None else add(oo, term)
        sim = scale(add(_cosine(s_hat[u], s_hat[v]), tape.constant([[1.0]])), 0.5)
        term = mul(sim, pair_gate(u, v))
        pos = term if pos is None else add(pos, term)

    neg_norm = np.where(contributing, 3.0 * counts ** 2 - counts, 1.0)
    pos_norm = np.where(contributing, counts ** 2 - counts, 1.0)
    negative = div(add(scale(cross, 2.0), oo), tape.constant(neg_norm, "neg_norm"))
    positive = div(pos, tape.constant(pos_norm, "pos_norm"))
    ratio = div(negative, clamp_min(positive, eps))
    per_sample = mul(ratio, tape.constant(contributing.astype(np.float64), "contributing"))
    loss = total(per_sample)
    return scale(loss, 1.0 / n_contributing) if reduction == "mean" else loss


# ---------------------------------------------------------
# RECONSTRUCTION LOSS
# ---------------------------------------------------------

def reconstruction_loss(reconstructions: Sequence[ValueNode], targets: Sequence[np.ndarray],
                        view_index: np.ndarray) -> ValueNode:
    """(1/b) sum_v sum_i (1/d_v) ||Xbar_i - X_i||^2 W_iv against the unmasked inputs."""
    if len(reconstructions) != len(targets):
        raise DimensionError(f"{len(reconstructions)} reconstructions for {len(targets)} views")
    tape = reconstructions[0].tape
    W = np.asarray(view_index, dtype=np.float64)
    b = reconstructions[0].shape[0]
    loss = None
    for v, (xbar, x) in enumerate(zip(reconstructions, targets)):
        x = np.asarray(x, dtype=np.float64)
        if xbar.shape != x.shape:
            raise DimensionError(f"view {v}: reconstruction {xbar.shape} vs target {x.shape}")
        gate = tape.constant(np.repeat(W[:, [v]], x.shape[1], axis=1), "view_gate")
        err = mul(square(sub(xbar, tape.constant(x, f"target_{v}"))), gate)
        term = scale(total(err), 1.0 / (b * x.shape[1]))
        loss = term if loss is None else add(loss, term)
    return loss


# ---------------------------------------------------------
# MASKED MULTI-LABEL CROSS-ENTROPY
# ---------------------------------------------------------

def classification_loss(predictions: ValueNode, labels: np.ndarray, label_index: np.ndarray,
                        floor: float = LOG_FLOOR) -> ValueNode:
    """-(1/(b c)) sum_ij [Y log P + (1 - Y) log(1 - P)] G, logs clamped at ``floor``."""
    tape = predictions.tape
    Y = np.asarray(labels, dtype=np.float64)
    G = np.asarray(label_index, dtype=np.float64)
    if Y.shape != predictions.shape or G.shape != predictions.shape:
        raise DimensionError(f"P {predictions.shape}, Y {Y.shape}, G {G.shape} must agree")
    b, c = predictions.shape
    ones = tape.constant(np.ones((b, c)), "ones")
    y = tape.constant(Y, "labels")
    pos = mul(y, log(predictions, floor))
    neg = mul(sub(ones, y), log(sub(ones, predictions), floor))
    masked = mul(add(pos, neg), tape.constant(G, "label_index"))
    return scale(total(masked), -1.0 / (b * c))


# ---------------------------------------------------------
# TOTAL
# ---------------------------------------------------------

def total_loss(parts: LossParts, weights: LossWeights) -> Tuple[ValueNode, LossBreakdown]:
    weights.validate()
    out = parts.l_mc
    for node, weight in ((parts.l_gc, weights.alpha), (parts.l_ccc, weights.beta), (parts.l_re, weights.gamma)):
        if node is not None and weight != 0:
            out = add(out, scale(node, weight))

    def value(node):
        return 0.0 if node is None else node.item()

    breakdown = LossBreakdown(value(parts.l_mc), value(parts.l_gc), value(parts.l_ccc),
                              value(parts.l_re), out.item())
    return out, breakdown


def mean_breakdown(items: List[LossBreakdown]) -> LossBreakdown:
    keys = ("l_mc", "l_gc", "l_ccc", "l_re", "l_total")
    return LossBreakdown(*[float(np.mean([getattr(b, k) for b in items])) for k in keys])
