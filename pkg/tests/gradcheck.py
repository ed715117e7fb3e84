import numpy as np

STEP = 1e-5


def numeric_grad(f, x: np.ndarray, step: float = STEP) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. ``x``, perturbing ``x`` in place."""
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        plus = f()
        x[idx] = orig - step
        minus = f()
        x[idx] = orig
        grad[idx] = (plus - minus) / (2.0 * step)
    return grad


def assert_close_grad(analytic: np.ndarray, numeric: np.ndarray, rtol: float = 1e-4, atol: float = 1e-7) -> None:
    np.testing.assert_allclose(analytic, numeric, rtol=rtol, atol=atol)
