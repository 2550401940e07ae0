"""
helpers.py

Utility functions:
- seeded random generators
- mini-batch index slicing
- mean/std summaries across repeated runs
- comma-separated grid parsing for the CLI
"""

from typing import Iterator, List, Sequence, Tuple

import numpy as np


# -----------------------
# Random generators
# -----------------------
def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for (seed, stream...) so components never share state."""
    return np.random.default_rng([int(seed), *[int(s) for s in stream]])


# -----------------------
# Mini-batches (last partial batch kept)
# -----------------------
def iter_batches(order: np.ndarray, batch_size: int) -> Iterator[np.ndarray]:
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


# -----------------------
# Summaries
# -----------------------
def mean_std(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    return float(arr.mean()), float(arr.std())


# -----------------------
# Grid parsing ("0.1,0.4" -> [0.1, 0.4])
# -----------------------
def parse_float_list(text: str) -> List[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def parse_int_list(text: str) -> List[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]
