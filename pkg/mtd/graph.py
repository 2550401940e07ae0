"""
graph.py
--------
Weak-label-guided sample similarity graph and its Laplacian regulariser.

T[i, j] = C[i, j] * (y_i . y_j) / (C[i, j] * (y_i . y_j) + eta), with
C = G G^T the count of labels known for both samples. The graph is built
per mini-batch; labels enter as Y * G so unknown entries never matter.
"""

from dataclasses import dataclass

import numpy as np

from .checks import check_same_shape
from .constants import DEFAULT_ETA
from .errors import ContractError, DimensionError
from .tensor import ValueNode, matmul, mul, scale, total


@dataclass
class SimilarityGraph:
    similarity: np.ndarray
    laplacian: np.ndarray

    @property
    def size(self) -> int:
        return int(self.similarity.shape[0])


def build_graph(labels: np.ndarray, label_index: np.ndarray, eta: float = DEFAULT_ETA) -> SimilarityGraph:
    labels = np.asarray(labels, dtype=np.float64)
    label_index = np.asarray(label_index, dtype=np.float64)
    ok, message = check_same_shape("Y", labels, "G", label_index)
    if not ok:
        raise DimensionError(message)
    if eta <= 0:
        raise ContractError(f"eta must be positive, got {eta}")
    known = labels * label_index
    co_known = label_index @ label_index.T
    shared = known @ known.T
    weight = co_known * shared
    T = weight / (weight + eta)
    L = np.diag(T.sum(axis=1)) - T
    return SimilarityGraph(similarity=T, laplacian=L)


def graph_loss(Z: ValueNode, graph: SimilarityGraph) -> ValueNode:
    """(1/b^2) * Tr(Z^T L Z), evaluated as sum(Z * (L Z))."""
    b = Z.shape[0]
    if graph.size != b:
        raise DimensionError(f"graph over {graph.size} samples, embeddings have {b} rows")
    LZ = matmul(Z.tape.constant(graph.laplacian, "laplacian"), Z)
    return scale(total(mul(Z, LZ)), 1.0 / (b * b))


def pairwise_graph_loss(Z: np.ndarray, graph: SimilarityGraph) -> float:
    """Double-sum form: (1/(2 b^2)) * sum_ij T_ij ||Z_i - Z_j||^2, equal to the trace form."""
    Z = np.asarray(Z, dtype=np.float64)
    b = Z.shape[0]
    sq = ((Z[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2)
    return float((sq * graph.similarity).sum() / (2.0 * b * b))
