"""Scenario-quality metrics and time-series diagnostics.

All metrics compare a generated ensemble against observed rows of the same
width. ``rmse`` pairs rows after sorting both sets by their row mean, which
keeps it independent of row order.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from splitvae.core import mean_and_cov, psd_matrix_sqrt
from splitvae.core.numerics import as_tensor
from splitvae.errors import DataError, DimensionError, InsufficientSamplesError, NotPsdError
from splitvae.settings import FID_FORMS

METRIC_NAMES = ("fid", "es", "rmse", "crps")


def _same_width(x, y, what: str) -> tuple[np.ndarray, np.ndarray]:
    x = as_tensor(x, 2)
    y = as_tensor(y, 2)
    if x.shape[1] != y.shape[1]:
        raise DimensionError(f"{what}: widths differ ({x.shape[1]} vs {y.shape[1]})")
    return x, y


def fid(x, y, form: str = "standard") -> float:
    x, y = _same_width(x, y, "fid")
    if form not in FID_FORMS:
        raise DataError(f"fid form must be one of {FID_FORMS}, got {form!r}")
    mu_x, cov_x = mean_and_cov(x)
    mu_y, cov_y = mean_and_cov(y)
    if not (np.all(np.isfinite(cov_x)) and np.all(np.isfinite(cov_y))):
        raise DataError("fid: non-finite covariance")
    root_x = psd_matrix_sqrt(cov_x)
    inner = root_x @ cov_y @ root_x
    try:
        cross = psd_matrix_sqrt(0.5 * (inner + inner.T))
    except NotPsdError as exc:
        raise DataError(f"fid: covariance product is not PSD: {exc}") from exc
    trace = float(np.trace(cov_x) + np.trace(cov_y) - 2.0 * np.trace(cross))
    shift = float(np.sum((mu_x - mu_y) ** 2))
    if form == "printed":
        # printed sign; can go negative
        return shift - trace
    return max(0.0, shift + trace)


def energy_score(x, y) -> float:
    x, y = _same_width(x, y, "energy_score")
    m1 = x.shape[0]
    if m1 < 1 or y.shape[0] < 1:
        raise InsufficientSamplesError("energy_score needs at least one row on each side")
    cross = cdist(x, y).mean()
    within = cdist(x, x).sum() / (2.0 * m1 * m1)
    return float(cross - within)


def _sort_rows(x: np.ndarray) -> np.ndarray:
    # row mean first, then columns left to right for ties
    keys = np.vstack([x.T[::-1], x.mean(axis=1)])
    return x[np.lexsort(keys)]


def rmse(x, y) -> float:
    x, y = _same_width(x, y, "rmse")
    k = min(x.shape[0], y.shape[0])
    if k == 0:
        raise InsufficientSamplesError("rmse needs at least one row on each side")
    diff = _sort_rows(x)[:k] - _sort_rows(y)[:k]
    return float(np.sqrt(np.mean(diff**2)))


def _abs_sum_against(sorted_g: np.ndarray, csum: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sum_k |g_k - y| for each y, with g sorted and csum its prefix sums (leading 0)."""
    m = sorted_g.shape[0]
    below = np.searchsorted(sorted_g, y, side="right")
    low = csum[below]
    return y * below - low + (csum[-1] - low) - y * (m - below)


def crps(generated, observed) -> float:
    g, y = _same_width(generated, observed, "crps")
    m2 = g.shape[0]
    if m2 < 1:
        raise InsufficientSamplesError("crps needs at least one generated row")
    if y.shape[0] == 0:
        raise InsufficientSamplesError("crps needs at least one observation")
    weights = 2.0 * np.arange(m2) - (m2 - 1)
    total = 0.0
    for j in range(g.shape[1]):
        gs = np.sort(g[:, j])
        csum = np.concatenate([[0.0], np.cumsum(gs)])
        spread = 2.0 * float(weights @ gs)
        first = _abs_sum_against(gs, csum, y[:, j]) / m2
        total += float(np.mean(first)) - spread / (2.0 * m2 * m2)
    return max(0.0, total / g.shape[1])


def centroid_series(data) -> np.ndarray:
    data = as_tensor(data, 2)
    if data.shape[1] < 1:
        raise DimensionError("centroid_series needs T >= 1")
    return data.mean(axis=0)


def autocorrelation(series, max_lag: int) -> tuple[np.ndarray, bool]:
    """Lags 0..max_lag-1. Returns ``(values, degenerate)``; constant series give zeros."""
    s = as_tensor(series, 1)
    t = s.shape[0]
    if not 1 <= max_lag <= t:
        raise DimensionError(f"max_lag must be in [1, {t}], got {max_lag}")
    centered = s - s.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        return np.zeros(max_lag), True
    out = np.array([centered[: t - lag] @ centered[lag:] for lag in range(max_lag)]) / denom
    out[0] = 1.0
    return out, False


@dataclass(frozen=True)
class DiagnosticSeries:
    centroid: np.ndarray
    autocorr: np.ndarray
    degenerate: bool = False


def diagnostic_series(data, nodes: int, steps: int, max_lag: int | None = None) -> DiagnosticSeries:
    """Centroid over nodes of the ensemble-mean day, plus its autocorrelation."""
    data = as_tensor(data, 2)
    if data.shape[1] != nodes * steps:
        raise DimensionError(f"layout {nodes}x{steps} does not match width {data.shape[1]}")
    day = data.mean(axis=0).reshape(nodes, steps)
    centroid = centroid_series(day)
    autocorr, degenerate = autocorrelation(centroid, max_lag or steps)
    return DiagnosticSeries(centroid=centroid, autocorr=autocorr, degenerate=degenerate)


def evaluate_once(observed, generated, fid_form: str = "standard") -> dict[str, float]:
    observed, generated = _same_width(observed, generated, "evaluate")
    return {
        "fid": fid(observed, generated, form=fid_form),
        "es": energy_score(generated, observed),
        "rmse": rmse(generated, observed),
        "crps": crps(generated, observed),
    }


@dataclass(frozen=True)
class MetricReport:
    fid: tuple[float, float]
    es: tuple[float, float]
    rmse: tuple[float, float]
    crps: tuple[float, float]
    runs: int

    @classmethod
    def from_runs(cls, runs: list[dict[str, float]]) -> "MetricReport":
        if not runs:
            raise InsufficientSamplesError("a metric report needs at least one run")
        summary = {}
        for name in METRIC_NAMES:
            values = np.array([r[name] for r in runs], dtype=np.float64)
            std = float(values.std(ddof=1)) if values.size > 1 else 0.0
            summary[name] = (float(values.mean()), std)
        return cls(runs=len(runs), **summary)

    def rows(self, method: str) -> list[dict]:
        return [
            {"method": method, "metric": name, "mean": getattr(self, name)[0], "std": getattr(self, name)[1], "runs": self.runs}
            for name in METRIC_NAMES
        ]
