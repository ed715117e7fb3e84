"""Gaussian copula with empirical marginals."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special, stats

from splitvae.core import RngStream
from splitvae.core.numerics import as_tensor, ensure_finite
from splitvae.errors import InsufficientSamplesError, ModelStateError

logger = logging.getLogger(__name__)

MIN_FIT_ROWS = 10
EIGEN_FLOOR = 1e-10


@dataclass(frozen=True)
class CopulaModel:
    # sorted training values per feature, one column each
    marginals: np.ndarray
    correlation: np.ndarray
    degenerate: np.ndarray

    @property
    def width(self) -> int:
        return self.marginals.shape[1]

    @property
    def n_rows(self) -> int:
        return self.marginals.shape[0]


def normal_scores(data: np.ndarray) -> np.ndarray:
    m = data.shape[0]
    ranks = stats.rankdata(data, method="average", axis=0)
    return special.ndtri((ranks - 0.5) / m)


def repair_correlation(r: np.ndarray) -> np.ndarray:
    """Nearest-ish PSD correlation: clamp eigenvalues, then rescale to a unit diagonal."""
    r = 0.5 * (r + r.T)
    vals, vecs = linalg.eigh(r)
    if vals.min() < EIGEN_FLOOR:
        r = (vecs * np.clip(vals, EIGEN_FLOOR, None)) @ vecs.T
        scale = np.sqrt(np.diag(r))
        r = r / np.outer(scale, scale)
        r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)
    return r


def copula_fit(data) -> CopulaModel:
    data = ensure_finite(as_tensor(data, 2), "copula input")
    m, d = data.shape
    if m < MIN_FIT_ROWS:
        raise InsufficientSamplesError(f"copula_fit needs at least {MIN_FIT_ROWS} rows, got {m}")
    degenerate = np.ptp(data, axis=0) == 0
    scores = normal_scores(data)
    r = np.eye(d)
    live = np.flatnonzero(~degenerate)
    if live.size > 1:
        r[np.ix_(live, live)] = np.corrcoef(scores[:, live], rowvar=False)
    r = repair_correlation(r)
    if degenerate.any():
        logger.info("copula_fit degenerate_features=%s", int(degenerate.sum()))
    logger.info("copula_fit rows=%s features=%s", m, d)
    return CopulaModel(marginals=np.sort(data, axis=0), correlation=r, degenerate=degenerate)


def _factor(r: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(r, lower=True)
    except linalg.LinAlgError:
        vals, vecs = linalg.eigh(r)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def copula_sample(model: CopulaModel | None, count: int, rng: RngStream) -> np.ndarray:
    if model is None:
        raise ModelStateError("copula has not been fitted")
    d, m = model.width, model.n_rows
    if count == 0:
        return np.empty((0, d))
    g = rng.standard_normal((count, d)) @ _factor(model.correlation).T
    u = special.ndtr(g)
    positions = (np.arange(1, m + 1) - 0.5) / m
    out = np.empty((count, d))
    for j in range(d):
        # np.interp clamps outside [positions[0], positions[-1]] to the extreme order statistics
        out[:, j] = np.interp(u[:, j], positions, model.marginals[:, j])
    return out
