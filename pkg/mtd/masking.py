"""
masking.py
----------
Random fragment masking of input instances.

For each view, every row gets one contiguous run of l_v = round(rate * d_v)
zeros starting at a uniformly drawn position b in [0, d_v - l_v]. The run is
half-open, [b, b + l_v), so exactly l_v entries are zeroed and the realised
mask rate equals l_v / d_v. ``inclusive=True`` zeroes l_v + 1 entries
instead ([b, b + l_v] inclusive).
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .checks import check_rate, check_same_shape
from .constants import DEFAULT_MASK_RATE
from .errors import ContractError, DimensionError
from .helpers import make_rng

logger = logging.getLogger(__name__)


@dataclass
class MaskSpec:
    rate: float = DEFAULT_MASK_RATE
    seed: int = 0
    inclusive: bool = False

    def validate(self) -> "MaskSpec":
        ok, message = check_rate("mask rate", self.rate)
        if not ok:
            raise ContractError(message)
        return self

    def fragment_length(self, dim: int) -> int:
        """Zeroed entries per row for a view of width ``dim`` (round half to even)."""
        length = int(round(self.rate * dim))
        if self.inclusive and length > 0:
            length += 1
        if length >= dim:
            raise ContractError(f"fragment length {length} must be < view dimension {dim}")
        return length


@dataclass
class MaskSet:
    masks: List[np.ndarray]

    def __len__(self) -> int:
        return len(self.masks)

    def __getitem__(self, v: int) -> np.ndarray:
        return self.masks[v]


def build_masks(n: int, dims: Sequence[int], spec: MaskSpec, epoch: int = 0) -> MaskSet:
    """Fresh masks for every (seed, epoch) pair."""
    spec.validate()
    rng = make_rng(spec.seed, 19, epoch)
    masks = []
    for d in dims:
        length = spec.fragment_length(int(d))
        mask = np.ones((n, d))
        if length:
            starts = rng.integers(0, d - length + 1, size=n)
            cols = np.arange(d)
            mask[(cols >= starts[:, None]) & (cols < starts[:, None] + length)] = 0.0
        masks.append(mask)
    return MaskSet(masks)


def apply_masks(views: Sequence[np.ndarray], masks: MaskSet) -> List[np.ndarray]:
    if len(views) != len(masks):
        raise DimensionError(f"{len(views)} views but {len(masks)} masks")
    out = []
    for v, (x, mask) in enumerate(zip(views, masks.masks)):
        ok, message = check_same_shape(f"view {v}", x, f"mask {v}", mask)
        if not ok:
            raise DimensionError(message)
        out.append(x * mask)
    return out
