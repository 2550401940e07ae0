import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from mtd.dataset import SyntheticSpec, generate_synthetic  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_synthetic():
    return generate_synthetic(SyntheticSpec(n_samples=40, n_views=2, n_labels=3, view_dims=[6, 5], latent_dim=4))
