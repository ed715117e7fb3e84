"""Dense float64 helpers shared by every other module.

Tensors are plain ``numpy.ndarray`` objects with dtype float64.
"""

import numpy as np
from scipy import linalg

from splitvae.errors import DimensionError, InsufficientSamplesError, NotPsdError, NumericError

PSD_SYMMETRY_TOL = 1e-8
PSD_NEGATIVE_TOL = 1e-6

# Stream ids below 1000 are ranks (0 is the server). Named streams sit above.
STREAM_SHUFFLE = 1000
STREAM_GENERATE = 1001
STREAM_COPULA = 1002
STREAM_SYNTH = 1003
STREAM_CENTRAL = 1004


def as_tensor(value, ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"expected {ndim}-d tensor, got shape {arr.shape}")
    return arr


def ensure_finite(arr: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{what} contains non-finite values")
    return arr


class RngStream:
    """Reproducible normal/uniform draws keyed by ``(seed, stream_id)``.

    Streams with different ids are statistically independent, so each rank
    can draw without coordinating with the others.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def fork(self, *keys: int) -> "RngStream":
        """Derived stream for e.g. one (epoch, batch) pair; does not advance this stream."""
        child = RngStream.__new__(RngStream)
        child.seed = self.seed
        child.stream_id = self.stream_id
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *[int(k) for k in keys]))
        child._gen = np.random.Generator(np.random.PCG64(seq))
        return child

    def standard_normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def matmul(a, b) -> np.ndarray:
    a = as_tensor(a, 2)
    b = as_tensor(b, 2)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return ensure_finite(a @ b, "matmul output")


def psd_matrix_sqrt(a) -> np.ndarray:
    a = as_tensor(a, 2)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"square matrix required, got {a.shape}")
    ensure_finite(a, "psd_matrix_sqrt input")
    sym = 0.5 * (a + a.T)
    scale = max(1.0, float(np.max(np.abs(sym))) if sym.size else 1.0)
    if np.max(np.abs(a - sym), initial=0.0) > PSD_SYMMETRY_TOL * scale:
        raise NotPsdError("matrix is not symmetric within tolerance")
    vals, vecs = linalg.eigh(sym)
    if vals.size and vals.min() < -PSD_NEGATIVE_TOL:
        raise NotPsdError(f"matrix has negative eigenvalue {vals.min():.3e}")
    vals = np.clip(vals, 0.0, None)
    root = (vecs * np.sqrt(vals)) @ vecs.T
    return 0.5 * (root + root.T)


def sample_standard_normal(rng: RngStream, shape) -> np.ndarray:
    return rng.standard_normal(shape)


def mean_and_cov(x) -> tuple[np.ndarray, np.ndarray]:
    x = as_tensor(x, 2)
    m = x.shape[0]
    if m < 2:
        raise InsufficientSamplesError(f"mean_and_cov needs at least 2 rows, got {m}")
    mu = x.mean(axis=0)
    centered = x - mu
    cov = centered.T @ centered / (m - 1)
    cov = 0.5 * (cov + cov.T)
    return mu, cov
