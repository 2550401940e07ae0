"""Central finite differences for gradient checks."""

import numpy as np


def central_difference(f, array: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Numerical gradient of scalar ``f()`` with respect to ``array`` (perturbed in place, then restored)."""
    grad = np.zeros_like(array)
    for idx in np.ndindex(array.shape):
        orig = array[idx]
        array[idx] = orig + h
        plus = f()
        array[idx] = orig - h
        minus = f()
        array[idx] = orig
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad


def assert_gradient_close(analytic: np.ndarray, numeric: np.ndarray, rtol: float = 1e-4, atol: float = 1e-7):
    err = np.abs(analytic - numeric)
    bound = rtol * np.abs(numeric) + atol
    worst = np.unravel_index(np.argmax(err - bound), err.shape)
    assert np.all(err <= bound), (
        f"gradient mismatch at {worst}: analytic {analytic[worst]!r}, numeric {numeric[worst]!r}")
