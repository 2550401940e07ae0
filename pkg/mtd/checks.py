"""
checks.py
---------
Independent validation checks used by the dataset, model and trainer
modules. Each check returns ``(ok, message)``; callers decide which error
to raise with the message.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

Check = Tuple[bool, Optional[str]]


# ---------------------------------------------------------
# SHAPE CHECKS
# ---------------------------------------------------------

def check_row_counts(named_shapes: Sequence[Tuple[str, Tuple[int, ...]]]) -> Check:
    """All named matrices must share the same number of rows."""
    if not named_shapes:
        return True, None
    first_name, first_shape = named_shapes[0]
    for name, shape in named_shapes[1:]:
        if shape[0] != first_shape[0]:
            return False, f"{name} has {shape[0]} rows but {first_name} has {first_shape[0]}."
    return True, None


def check_same_shape(name_a: str, a: np.ndarray, name_b: str, b: np.ndarray) -> Check:
    if a.shape != b.shape:
        return False, f"{name_a} shape {a.shape} does not match {name_b} shape {b.shape}."
    return True, None


# ---------------------------------------------------------
# VALUE CHECKS
# ---------------------------------------------------------

def first_non_binary_row(values: np.ndarray) -> Optional[int]:
    """Index of the first row holding an entry other than 0 or 1, else None."""
    bad = ~np.isin(values, (0, 1))
    if not bad.any():
        return None
    return int(np.argmax(bad.any(axis=1)))


def check_binary(name: str, values: np.ndarray) -> Check:
    row = first_non_binary_row(values)
    if row is not None:
        return False, f"{name} holds a non-binary entry at row {row}."
    return True, None


def check_finite(name: str, values: np.ndarray) -> Check:
    if not np.all(np.isfinite(values)):
        row = int(np.argmax(~np.isfinite(values).all(axis=1))) if values.ndim == 2 else 0
        return False, f"{name} holds a non-finite value at row {row}."
    return True, None


# ---------------------------------------------------------
# INCOMPLETENESS CHECKS
# ---------------------------------------------------------

def check_every_row_has_view(view_index: np.ndarray) -> Check:
    """Each sample must keep at least one available view."""
    empty = np.flatnonzero(view_index.sum(axis=1) == 0)
    if empty.size:
        return False, f"sample row {int(empty[0])} has no available view ({empty.size} such rows)."
    return True, None


def check_missing_views_zeroed(views: Sequence[np.ndarray], view_index: np.ndarray) -> Check:
    for v, x in enumerate(views):
        missing = view_index[:, v] == 0
        if missing.any() and np.any(x[missing] != 0):
            row = int(np.flatnonzero(missing & np.any(x != 0, axis=1))[0])
            return False, f"view {v} row {row} is marked missing but holds non-zero features."
    return True, None


def check_unknown_labels_zeroed(labels: np.ndarray, label_index: np.ndarray) -> Check:
    bad = (label_index == 0) & (labels != 0)
    if bad.any():
        row = int(np.argmax(bad.any(axis=1)))
        return False, f"label row {row} holds a positive entry where the label is unknown."
    return True, None


# ---------------------------------------------------------
# RATE CHECKS
# ---------------------------------------------------------

def check_rate(name: str, rate: float, upper_inclusive: bool = False) -> Check:
    upper_ok = rate <= 1.0 if upper_inclusive else rate < 1.0
    if not (rate >= 0.0 and upper_ok):
        bound = "[0, 1]" if upper_inclusive else "[0, 1)"
        return False, f"{name} = {rate} is outside {bound}."
    return True, None
