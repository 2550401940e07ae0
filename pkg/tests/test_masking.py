import numpy as np
import pytest

from mtd.errors import ContractError, DimensionError
from mtd.masking import MaskSpec, apply_masks, build_masks


def _runs(row):
    """Start and length of every run of zeros in a 0/1 row."""
    padded = np.concatenate([[1.0], row, [1.0]])
    edges = np.flatnonzero(np.diff(padded == 0))
    return [(int(a), int(b - a)) for a, b in zip(edges[::2], edges[1::2])]


@pytest.mark.parametrize("rate,dim,expected", [(0.25, 8, 2), (0.25, 10, 2), (0.25, 64, 16), (0.3, 5, 2), (0.0, 9, 0)])
def test_fragment_length_rounds_half_to_even(rate, dim, expected):
    assert MaskSpec(rate).fragment_length(dim) == expected


def test_inclusive_fragment_is_one_longer():
    assert MaskSpec(0.25, inclusive=True).fragment_length(8) == 3


def test_fragment_must_leave_entries():
    with pytest.raises(ContractError):
        MaskSpec(0.9).fragment_length(2)


def test_rate_must_be_below_one():
    with pytest.raises(ContractError):
        build_masks(3, [4], MaskSpec(1.0))


def test_each_row_has_one_contiguous_fragment():
    masks = build_masks(200, [8, 13], MaskSpec(0.25, seed=3))
    for mask, dim in zip(masks.masks, (8, 13)):
        length = MaskSpec(0.25).fragment_length(dim)
        assert mask.shape == (200, dim)
        assert set(np.unique(mask)) <= {0.0, 1.0}
        for row in mask:
            runs = _runs(row)
            assert len(runs) == 1 and runs[0][1] == length
            assert 0 <= runs[0][0] <= dim - length


def test_start_positions_cover_every_offset():
    mask = build_masks(2000, [8], MaskSpec(0.25, seed=1))[0]
    starts = {_runs(row)[0][0] for row in mask}
    assert starts == set(range(0, 7))


def test_zero_rate_masks_nothing():
    masks = build_masks(5, [4, 6], MaskSpec(0.0))
    assert all(np.all(m == 1.0) for m in masks.masks)


def test_masks_depend_on_seed_and_epoch():
    spec = MaskSpec(0.25, seed=9)
    a = build_masks(50, [16], spec, epoch=1)[0]
    b = build_masks(50, [16], spec, epoch=1)[0]
    c = build_masks(50, [16], spec, epoch=2)[0]
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_apply_masks_zeroes_fragment_only(rng):
    views = [rng.normal(size=(10, 8)) + 5.0]
    masks = build_masks(10, [8], MaskSpec(0.25))
    out = apply_masks(views, masks)[0]
    np.testing.assert_array_equal(out[masks[0] == 1], views[0][masks[0] == 1])
    assert np.all(out[masks[0] == 0] == 0)


def test_apply_masks_shape_mismatch():
    masks = build_masks(3, [4], MaskSpec(0.25))
    with pytest.raises(DimensionError):
        apply_masks([np.ones((3, 5))], masks)
    with pytest.raises(DimensionError):
        apply_masks([np.ones((3, 4)), np.ones((3, 4))], masks)
