"""
dataset.py
----------
Multi-view multi-label data model, file ingestion, the incomplete-data
simulator and train/test splitting.

A dataset holds m view matrices X^(v) (n x d_v), the label matrix Y (n x c),
the missing-view index W (n x m) and the missing-label index G (n x c).
Unavailable view rows and unknown labels are stored as zeros.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .checks import (
    check_binary,
    check_every_row_has_view,
    check_finite,
    check_missing_views_zeroed,
    check_rate,
    check_row_counts,
    check_unknown_labels_zeroed,
)
from .constants import DEFAULT_LABEL_MISSING_RATE, DEFAULT_TRAIN_RATIO, DEFAULT_VIEW_MISSING_RATE
from .errors import ContractError, DatasetError, SimulationError
from .fileio import read_mvf, read_numeric_csv, write_mvf, write_numeric_csv
from .helpers import make_rng

logger = logging.getLogger(__name__)

LABELS_FILE = "labels.csv"
FULL_LABELS_FILE = "labels_full.csv"
VIEW_INDEX_FILE = "w.csv"
LABEL_INDEX_FILE = "g.csv"
SPLIT_FILE = "split.json"


@dataclass
class MultiViewDataset:
    views: List[np.ndarray]
    labels: np.ndarray
    view_index: np.ndarray
    label_index: np.ndarray
    view_names: Optional[List[str]] = None
    label_names: Optional[List[str]] = None
    # complete labels held back by simulate_incompleteness, used for evaluation
    full_labels: Optional[np.ndarray] = None

    @property
    def n_samples(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def n_labels(self) -> int:
        return int(self.labels.shape[1])

    @property
    def view_dims(self) -> List[int]:
        return [int(x.shape[1]) for x in self.views]

    @property
    def is_complete(self) -> bool:
        return bool(self.view_index.all() and self.label_index.all())

    def validate(self, source: str = "dataset") -> "MultiViewDataset":
        """Raise DatasetError when any dataset invariant is broken."""
        if not self.views:
            raise DatasetError(f"{source}: no views")
        shapes = [(f"view {v}", x.shape) for v, x in enumerate(self.views)]
        shapes += [("labels", self.labels.shape), ("W", self.view_index.shape), ("G", self.label_index.shape)]
        checks = [
            check_row_counts(shapes),
            (self.view_index.shape[1] == self.n_views,
             f"W has {self.view_index.shape[1]} columns for {self.n_views} views."),
            (self.label_index.shape == self.labels.shape,
             f"G shape {self.label_index.shape} does not match labels {self.labels.shape}."),
            check_binary("labels", self.labels),
            check_binary("W", self.view_index),
            check_binary("G", self.label_index),
            check_every_row_has_view(self.view_index),
            check_missing_views_zeroed(self.views, self.view_index),
            check_unknown_labels_zeroed(self.labels, self.label_index),
        ]
        checks += [check_finite(f"view {v}", x) for v, x in enumerate(self.views)]
        for ok, message in checks:
            if not ok:
                raise DatasetError(f"{source}: {message}")
        return self

    def subset(self, rows: Sequence[int]) -> "MultiViewDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return replace(
            self,
            views=[x[rows].copy() for x in self.views],
            labels=self.labels[rows].copy(),
            view_index=self.view_index[rows].copy(),
            label_index=self.label_index[rows].copy(),
            full_labels=None if self.full_labels is None else self.full_labels[rows].copy(),
        )

    def copy(self) -> "MultiViewDataset":
        return self.subset(np.arange(self.n_samples))


def make_dataset(views: Sequence[np.ndarray], labels: np.ndarray,
                 view_index: Optional[np.ndarray] = None,
                 label_index: Optional[np.ndarray] = None, **names) -> MultiViewDataset:
    """Build and validate a dataset; missing W/G default to all-ones."""
    views = [np.asarray(x, dtype=np.float64) for x in views]
    labels = np.asarray(labels, dtype=np.float64)
    n = labels.shape[0]
    if view_index is None:
        view_index = np.ones((n, len(views)))
    if label_index is None:
        label_index = np.ones_like(labels)
    data = MultiViewDataset(views, labels, np.asarray(view_index, dtype=np.float64),
                            np.asarray(label_index, dtype=np.float64), **names)
    return data.validate()


# ---------------------------------------------------------
# SPEC OBJECTS
# ---------------------------------------------------------

@dataclass
class IncompletenessSpec:
    view_missing_rate: float = DEFAULT_VIEW_MISSING_RATE
    label_missing_rate: float = DEFAULT_LABEL_MISSING_RATE
    seed: int = 0

    def validate(self) -> "IncompletenessSpec":
        for name, rate in (("view_missing_rate", self.view_missing_rate),
                           ("label_missing_rate", self.label_missing_rate)):
            ok, message = check_rate(name, rate)
            if not ok:
                raise ContractError(message)
        return self


@dataclass
class SplitSpec:
    train_ratio: float = DEFAULT_TRAIN_RATIO
    seed: int = 0

    def validate(self) -> "SplitSpec":
        if not 0.0 < self.train_ratio < 1.0:
            raise ContractError(f"train_ratio = {self.train_ratio} is outside (0, 1)")
        return self


@dataclass
class SyntheticSpec:
    n_samples: int = 600
    n_views: int = 2
    n_labels: int = 5
    view_dims: List[int] = field(default_factory=lambda: [64, 48])
    latent_dim: int = 8
    noise: float = 0.6
    overlap: float = 0.6
    nuisance_dim: int = 8
    seed: int = 0

    def validate(self) -> "SyntheticSpec":
        if self.latent_dim < self.n_labels:
            raise ContractError(f"latent_dim {self.latent_dim} must be >= n_labels {self.n_labels}")
        if len(self.view_dims) != self.n_views:
            raise ContractError(f"{len(self.view_dims)} view dims given for {self.n_views} views")
        if not 0.0 <= self.overlap < 1.0:
            raise ContractError(f"overlap = {self.overlap} is outside [0, 1)")
        if self.noise < 0 or self.nuisance_dim < 0:
            raise ContractError("noise and nuisance_dim must be non-negative")
        return self


# ---------------------------------------------------------
# LOADING / SAVING
# ---------------------------------------------------------

def _view_path(path: Path, v: int) -> Optional[Path]:
    for suffix in (".mvf", ".csv"):
        candidate = path / f"view_{v}{suffix}"
        if candidate.exists():
            return candidate
    return None


def _read_view(file: Path) -> np.ndarray:
    return read_mvf(file) if file.suffix == ".mvf" else read_numeric_csv(file)


def _read_binary_csv(file: Path) -> np.ndarray:
    values = read_numeric_csv(file)
    ok, message = check_binary(file.name, values)
    if not ok:
        raise DatasetError(f"{file}: {message}")
    return values


def load_dataset(path) -> MultiViewDataset:
    """Read ``view_{v}.mvf`` (or ``.csv``), ``labels.csv`` and optional ``w.csv``/``g.csv``."""
    path = Path(path)
    if not path.is_dir():
        raise DatasetError(f"{path}: dataset directory does not exist")
    views = []
    while (file := _view_path(path, len(views))) is not None:
        views.append(_read_view(file))
    if not views:
        raise DatasetError(f"{path}: no view_0.mvf or view_0.csv found")
    labels_file = path / LABELS_FILE
    if not labels_file.exists():
        raise DatasetError(f"{labels_file}: label file is missing")
    labels = _read_binary_csv(labels_file)

    ok, message = check_row_counts([(f"view_{v}", x.shape) for v, x in enumerate(views)]
                                   + [(LABELS_FILE, labels.shape)])
    if not ok:
        raise DatasetError(f"{path}: {message}")

    n, c = labels.shape
    w_file, g_file, full_file = path / VIEW_INDEX_FILE, path / LABEL_INDEX_FILE, path / FULL_LABELS_FILE
    view_index = _read_binary_csv(w_file) if w_file.exists() else np.ones((n, len(views)))
    label_index = _read_binary_csv(g_file) if g_file.exists() else np.ones((n, c))
    full_labels = _read_binary_csv(full_file) if full_file.exists() else None
    if full_labels is not None and full_labels.shape != labels.shape:
        raise DatasetError(f"{full_file}: shape {full_labels.shape} does not match labels {labels.shape}")

    data = MultiViewDataset(views, labels, view_index, label_index, full_labels=full_labels)
    data.validate(source=str(path))
    logger.info("loaded %s: n=%d m=%d c=%d dims=%s", path, n, len(views), c, data.view_dims)
    return data


def save_dataset(data: MultiViewDataset, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for v, x in enumerate(data.views):
        write_mvf(path / f"view_{v}.mvf", x)
    write_numeric_csv(path / LABELS_FILE, data.labels, integer=True)
    write_numeric_csv(path / VIEW_INDEX_FILE, data.view_index, integer=True)
    write_numeric_csv(path / LABEL_INDEX_FILE, data.label_index, integer=True)
    if data.full_labels is not None:
        write_numeric_csv(path / FULL_LABELS_FILE, data.full_labels, integer=True)
    return path


# ---------------------------------------------------------
# INCOMPLETENESS SIMULATION
# ---------------------------------------------------------

def _drop_views(n: int, m: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    n_drop = int(np.floor(rate * n))
    if n_drop == 0:
        return np.ones((n, m))
    if m * (n - n_drop) < n:
        raise SimulationError(
            f"view_missing_rate {rate} leaves {m * (n - n_drop)} instances for {n} samples; "
            "every sample needs at least one view")
    W = np.ones((n, m))
    for v in range(m):
        W[rng.choice(n, size=n_drop, replace=False), v] = 0.0

    # repair: restore one view of each empty row, remove a compensating entry in that column
    for _ in range(n * m):
        empty = np.flatnonzero(W.sum(axis=1) == 0)
        if empty.size == 0:
            return W
        i = int(empty[0])
        spare = (W == 1) & (W.sum(axis=1, keepdims=True) >= 2)
        candidates = np.flatnonzero(spare.any(axis=0))
        if candidates.size == 0:
            raise SimulationError(f"cannot keep a view for sample {i}: no view has a spare instance")
        v = int(rng.choice(candidates))
        donors = np.flatnonzero(spare[:, v])
        W[i, v] = 1.0
        W[int(rng.choice(donors)), v] = 0.0
    raise SimulationError("view repair did not converge")


def _drop_labels(labels: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    G = np.ones_like(labels)
    if rate == 0:
        return G
    for j in range(labels.shape[1]):
        for group in (np.flatnonzero(labels[:, j] == 1), np.flatnonzero(labels[:, j] == 0)):
            k = int(np.floor(rate * group.size))
            if k:
                G[rng.choice(group, size=k, replace=False), j] = 0.0
    return G


def simulate_incompleteness(data: MultiViewDataset, spec: IncompletenessSpec) -> MultiViewDataset:
    """Mark instances missing per view and labels unknown per category (positives and negatives apart)."""
    spec.validate()
    if not data.is_complete:
        raise ContractError("simulate_incompleteness needs a complete dataset (W and G all ones)")
    rng = make_rng(spec.seed, 11)
    W = _drop_views(data.n_samples, data.n_views, spec.view_missing_rate, rng)
    G = _drop_labels(data.labels, spec.label_missing_rate, rng)
    views = [x * W[:, [v]] for v, x in enumerate(data.views)]
    out = replace(data, views=views, labels=data.labels * G, view_index=W, label_index=G,
                  full_labels=data.labels.copy())
    logger.debug("simulated incompleteness: %d missing instances, %d unknown labels",
                 int((W == 0).sum()), int((G == 0).sum()))
    return out.validate(source="simulated dataset")


# ---------------------------------------------------------
# SPLITTING
# ---------------------------------------------------------

def split_indices(n: int, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray]:
    spec.validate()
    n_train = int(round(spec.train_ratio * n))
    if n_train <= 0 or n_train >= n:
        raise ContractError(f"train_ratio {spec.train_ratio} on {n} samples leaves an empty side")
    order = make_rng(spec.seed, 13).permutation(n)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def with_complete_labels(data: MultiViewDataset, source: str = "test split") -> MultiViewDataset:
    """Copy for evaluation: Y from the held-back complete labels, G all-ones."""
    out = data.copy()
    if out.full_labels is not None:
        out.labels = out.full_labels.copy()
    elif not out.label_index.all():
        logger.warning("%s has unknown labels and no complete labels; evaluating against weak labels", source)
    out.label_index = np.ones_like(out.labels)
    return out


def split_by_indices(data: MultiViewDataset, train_rows: Sequence[int],
                     test_rows: Sequence[int]) -> Tuple[MultiViewDataset, MultiViewDataset]:
    """Train keeps weak labels; test gets complete labels and an all-ones G."""
    return data.subset(train_rows), with_complete_labels(data.subset(test_rows))


def split(data: MultiViewDataset, spec: SplitSpec) -> Tuple[MultiViewDataset, MultiViewDataset]:
    train_rows, test_rows = split_indices(data.n_samples, spec)
    return split_by_indices(data, train_rows, test_rows)


def write_split_manifest(path, train_rows, test_rows, **settings) -> Path:
    file = Path(path) / SPLIT_FILE
    manifest = {"train": [int(i) for i in train_rows], "test": [int(i) for i in test_rows], **settings}
    file.write_text(json.dumps(manifest, indent=2))
    return file


def read_split_manifest(path) -> Optional[dict]:
    file = Path(path) / SPLIT_FILE
    if not file.exists():
        return None
    try:
        return json.loads(file.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{file}: invalid JSON ({exc})") from exc


# ---------------------------------------------------------
# SYNTHETIC DATA
# ---------------------------------------------------------

def latent_prototypes(n_labels: int, latent_dim: int, overlap: float, rng: np.random.Generator) -> np.ndarray:
    """Label prototypes sharing one common direction with weight ``overlap``."""
    common = rng.standard_normal(latent_dim)
    own = rng.standard_normal((n_labels, latent_dim))
    return overlap * common + np.sqrt(1.0 - overlap ** 2) * own


def generate_synthetic(spec: SyntheticSpec) -> MultiViewDataset:
    """Complete dataset whose views are linear maps of a sum of overlapping label prototypes.

    Each view also mixes in ``nuisance_dim`` label-free latent directions of
    its own, so part of every view's variance is view-specific.
    """
    spec.validate()
    rng = make_rng(spec.seed, 17)
    n, c, k, q = spec.n_samples, spec.n_labels, spec.latent_dim, spec.nuisance_dim

    prototypes = latent_prototypes(c, k, spec.overlap, rng)
    labels = np.zeros((n, c))
    for i in range(n):
        n_pos = int(rng.integers(1, min(3, c) + 1))
        labels[i, rng.choice(c, size=n_pos, replace=False)] = 1.0
    latent = labels @ prototypes + spec.noise * rng.standard_normal((n, k))

    views = []
    for d in spec.view_dims:
        nuisance = rng.standard_normal((n, q))
        mapping = rng.standard_normal((k + q, d)) / np.sqrt(k + q)
        views.append(np.hstack([latent, nuisance]) @ mapping + spec.noise * rng.standard_normal((n, d)))

    return make_dataset(views, labels,
                        view_names=[f"view_{v}" for v in range(spec.n_views)],
                        label_names=[f"label_{j}" for j in range(c)])
