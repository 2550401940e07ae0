"""
metrics.py
----------
The six multi-label evaluation metrics, reported as "higher is better":
AP, 1-HL, 1-RL, AUC, 1-OE, 1-Cov.

Ranking conventions: a sample's labels are ranked by descending score with
ties broken by ascending label index. Pairwise comparisons (ranking loss,
AUC) give ties half credit. Degenerate samples/labels are skipped and
counted on the report.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

import numpy as np

from .constants import HAMMING_THRESHOLD, METRIC_COLUMNS
from .errors import DimensionError, UndefinedMetricError

logger = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    ap: float
    one_minus_hl: float
    one_minus_rl: float
    auc: float
    one_minus_oe: float
    one_minus_cov: float
    n_samples: int = 0
    n_labels: int = 0
    skipped_no_positive: int = 0
    skipped_ranking: int = 0
    skipped_auc_labels: int = 0

    def values(self) -> List[float]:
        """Scores in report column order."""
        return [getattr(self, k) for k in METRIC_COLUMNS]

    def as_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "MetricsReport":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


def _prepare(P, Y) -> Tuple[np.ndarray, np.ndarray]:
    P = np.asarray(P, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if P.ndim != 2 or P.shape != Y.shape:
        raise DimensionError(f"scores {P.shape} and labels {Y.shape} must be equal 2-D shapes")
    return P, Y


def label_ranks(P: np.ndarray) -> np.ndarray:
    """1-based descending-score rank of every label within its row (ties -> lower index first)."""
    n, c = P.shape
    ranks = np.empty((n, c), dtype=np.int64)
    idx = np.arange(c)
    for i in range(n):
        order = np.lexsort((idx, -P[i]))
        ranks[i, order] = np.arange(1, c + 1)
    return ranks


# ---------------------------------------------------------
# SAMPLE-RANKING METRICS
# ---------------------------------------------------------

def _average_precision(P, Y) -> Tuple[float, int]:
    ranks = label_ranks(P)
    scores = []
    for i in range(P.shape[0]):
        pos_ranks = np.sort(ranks[i, Y[i] == 1])
        if pos_ranks.size == 0:
            continue
        scores.append(np.mean(np.arange(1, pos_ranks.size + 1) / pos_ranks))
    if not scores:
        raise UndefinedMetricError("average precision: no sample has a positive label")
    return float(np.mean(scores)), P.shape[0] - len(scores)


def average_precision(P, Y) -> float:
    return _average_precision(*_prepare(P, Y))[0]


def hamming(P, Y, threshold: float = HAMMING_THRESHOLD) -> float:
    """1 - HL; scores equal to the threshold count as positive."""
    P, Y = _prepare(P, Y)
    mismatches = ((P >= threshold).astype(np.float64) != Y).sum()
    return float(1.0 - mismatches / Y.size)


def _ranking_loss(P, Y) -> Tuple[float, int]:
    losses = []
    for i in range(P.shape[0]):
        pos, neg = P[i, Y[i] == 1], P[i, Y[i] == 0]
        if pos.size == 0 or neg.size == 0:
            continue
        wrong = (pos[:, None] < neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
        losses.append(wrong / (pos.size * neg.size))
    if not losses:
        raise UndefinedMetricError("ranking loss: no sample has both positive and negative labels")
    return float(1.0 - np.mean(losses)), P.shape[0] - len(losses)


def ranking_loss(P, Y) -> float:
    """1 - RL."""
    return _ranking_loss(*_prepare(P, Y))[0]


def _one_error(P, Y) -> Tuple[float, int]:
    has_pos = Y.sum(axis=1) > 0
    if not has_pos.any():
        raise UndefinedMetricError("one-error: no sample has a positive label")
    top = np.argmax(P, axis=1)  # first maximum -> lowest index on ties
    hits = Y[np.arange(P.shape[0]), top] == 1
    return float(hits[has_pos].mean()), int((~has_pos).sum())


def one_error(P, Y) -> float:
    """1 - OE."""
    return _one_error(*_prepare(P, Y))[0]


def _coverage(P, Y) -> Tuple[float, int]:
    ranks = label_ranks(P)
    c = P.shape[1]
    covs = [(ranks[i, Y[i] == 1].max() - 1) / c for i in range(P.shape[0]) if Y[i].any()]
    if not covs:
        raise UndefinedMetricError("coverage: no sample has a positive label")
    return float(1.0 - np.mean(covs)), P.shape[0] - len(covs)


def coverage(P, Y) -> float:
    """1 - Cov with Cov normalised by the number of labels."""
    return _coverage(*_prepare(P, Y))[0]


# ---------------------------------------------------------
# LABEL-WISE AUC
# ---------------------------------------------------------

def _auc(P, Y) -> Tuple[float, int]:
    aucs = []
    for j in range(P.shape[1]):
        pos, neg = P[Y[:, j] == 1, j], P[Y[:, j] == 0, j]
        if pos.size == 0 or neg.size == 0:
            continue
        right = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
        aucs.append(right / (pos.size * neg.size))
    if not aucs:
        raise UndefinedMetricError("AUC: no label has both positive and negative samples")
    return float(np.mean(aucs)), P.shape[1] - len(aucs)


def auc(P, Y) -> float:
    """Macro average over labels of the Mann-Whitney AUC."""
    return _auc(*_prepare(P, Y))[0]


# ---------------------------------------------------------
# REPORT
# ---------------------------------------------------------

def evaluate_scores(P, Y) -> MetricsReport:
    P, Y = _prepare(P, Y)
    ap, skipped_pos = _average_precision(P, Y)
    rl, skipped_rank = _ranking_loss(P, Y)
    auc_value, skipped_labels = _auc(P, Y)
    oe, _ = _one_error(P, Y)
    cov, _ = _coverage(P, Y)
    if skipped_pos or skipped_labels:
        logger.debug("metrics skipped %d samples without positives, %d degenerate labels",
                     skipped_pos, skipped_labels)
    return MetricsReport(
        ap=ap,
        one_minus_hl=hamming(P, Y),
        one_minus_rl=rl,
        auc=auc_value,
        one_minus_oe=oe,
        one_minus_cov=cov,
        n_samples=int(P.shape[0]),
        n_labels=int(P.shape[1]),
        skipped_no_positive=skipped_pos,
        skipped_ranking=skipped_rank,
        skipped_auc_labels=skipped_labels,
    )
