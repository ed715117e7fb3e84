import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from splitvae.core.numerics import STREAM_SHUFFLE, STREAM_SYNTH, RngStream, as_tensor, ensure_finite
from splitvae.errors import ConfigError, DataError, DataParseError
from splitvae.utils import parse_silo_spec

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class SiloMap:
    dims: list[int]
    assignment: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.assignment:
            ranks = [rank for rank, d in enumerate(self.dims, start=1) for _ in range(d)]
            object.__setattr__(self, "assignment", ranks)

    @property
    def n_edges(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return sum(self.dims)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for d in self.dims:
            out.append(slice(start, start + d))
            start += d
        return out

    def split(self, data: np.ndarray) -> list[np.ndarray]:
        data = as_tensor(data, 2)
        if data.shape[1] != self.total:
            raise DataError(f"data has {data.shape[1]} features, silo map covers {self.total}")
        return [data[:, s].copy() for s in self.slices()]

    def split_names(self, names: list[str]) -> list[list[str]]:
        return [list(names[s]) for s in self.slices()]

    def to_dict(self) -> dict:
        return {"dims": list(self.dims)}


def partition_silos(d: int, spec) -> SiloMap:
    kind, value = parse_silo_spec(spec)
    if kind == "uniform":
        n = int(value)
        if n < 1 or n > d:
            raise ConfigError(f"--silos uniform:{n} cannot split {d} features")
        base, extra = divmod(d, n)
        dims = [base + 1 if rank < extra else base for rank in range(n)]
    else:
        dims = list(value)
        if any(x < 1 for x in dims):
            raise ConfigError(f"--silos dims must be >= 1, got {dims}")
        if sum(dims) != d:
            raise ConfigError(f"--silos dims {dims} sum to {sum(dims)}, data has {d} features")
    return SiloMap(dims=dims)


@dataclass(frozen=True)
class NormStats:
    mins: np.ndarray
    maxs: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.maxs == self.mins

    def subset(self, s: slice) -> "NormStats":
        return NormStats(mins=self.mins[s].copy(), maxs=self.maxs[s].copy())

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, values: dict) -> "NormStats":
        return cls(mins=np.asarray(values["mins"], dtype=np.float64), maxs=np.asarray(values["maxs"], dtype=np.float64))


def normalize(data, stats: NormStats | None = None, clip: bool = True) -> tuple[np.ndarray, NormStats]:
    """Per-feature min-max to [0, 1]; constant features map to 0.5."""
    data = ensure_finite(as_tensor(data, 2), "normalize input")
    if stats is None:
        stats = NormStats(mins=data.min(axis=0), maxs=data.max(axis=0))
    if stats.mins.shape[0] != data.shape[1]:
        raise DataError(f"norm stats cover {stats.mins.shape[0]} features, data has {data.shape[1]}")
    span = stats.maxs - stats.mins
    const = stats.constant
    safe = np.where(const, 1.0, span)
    out = (data - stats.mins) / safe
    out[:, const] = 0.5
    if clip:
        out = np.clip(out, 0.0, 1.0)
    if const.any():
        logger.info("normalize constant_features=%s", int(const.sum()))
    return out, stats


def denormalize(data, stats: NormStats) -> np.ndarray:
    data = as_tensor(data, 2)
    span = np.where(stats.constant, 0.0, stats.maxs - stats.mins)
    return data * span + stats.mins


def shuffle_rows(data: np.ndarray, seed: int) -> np.ndarray:
    """Same permutation on every rank that holds the same row count."""
    perm = RngStream(seed, STREAM_SHUFFLE).permutation(data.shape[0])
    return data[perm]


def split_rows(data: np.ndarray, train_frac: float) -> tuple[np.ndarray, np.ndarray]:
    m = data.shape[0]
    n_train = max(1, int(round(m * train_frac)))
    return data[:n_train].copy(), data[n_train:].copy()


@dataclass(frozen=True)
class SyntheticDescriptor:
    nodes: int
    steps: int
    correlation: float
    temporal_correlation: float
    noise_scale: float
    mean: np.ndarray
    cov: np.ndarray

    @property
    def layout(self) -> tuple[int, int]:
        return self.nodes, self.steps


def _decay_matrix(n: int, rho: float) -> np.ndarray:
    idx = np.arange(n)
    return np.power(rho, np.abs(idx[:, None] - idx[None, :]).astype(np.float64))


def synth_generate(
    nodes: int,
    steps: int,
    seed: int,
    correlation: float,
    samples: int = 2000,
    temporal_correlation: float = 0.5,
    noise_scale: float = 0.2,
    amplitude: float = 1.0,
    base: float = 2.0,
) -> tuple[np.ndarray, SyntheticDescriptor]:
    """Daily profiles for ``nodes`` locations over ``steps`` time points.

    Each row is one day laid out node-major (node i occupies columns
    ``i*steps .. (i+1)*steps-1``). Node i follows ``base + amplitude*sin(2*pi*t/steps + pi*i/nodes)``
    plus Gaussian noise whose correlation is ``correlation**|i-j|`` across nodes and
    ``temporal_correlation**|t-u|`` across time.
    """
    if nodes < 1 or steps < 1:
        raise ConfigError(f"nodes and steps must be >= 1, got {nodes}, {steps}")
    if not 0.0 <= correlation < 1.0:
        raise ConfigError(f"correlation must be in [0, 1), got {correlation}")
    t = np.arange(steps)
    phase = np.pi * np.arange(nodes) / nodes
    profile = base + amplitude * np.sin(2.0 * np.pi * t[None, :] / steps + phase[:, None])
    spatial = _decay_matrix(nodes, correlation)
    temporal = _decay_matrix(steps, temporal_correlation)
    ls = np.linalg.cholesky(spatial)
    lt = np.linalg.cholesky(temporal)
    rng = RngStream(seed, STREAM_SYNTH)
    white = rng.standard_normal((samples, nodes, steps))
    noise = noise_scale * np.einsum("ij,sjt,ut->siu", ls, white, lt)
    data = (profile[None, :, :] + noise).reshape(samples, nodes * steps)
    descriptor = SyntheticDescriptor(
        nodes=nodes,
        steps=steps,
        correlation=correlation,
        temporal_correlation=temporal_correlation,
        noise_scale=noise_scale,
        mean=profile.reshape(-1),
        cov=noise_scale**2 * np.kron(spatial, temporal),
    )
    logger.info("synth_generate nodes=%s steps=%s samples=%s rho=%s", nodes, steps, samples, correlation)
    return data, descriptor


def synth_feature_names(nodes: int, steps: int) -> list[str]:
    return [f"n{i}_t{t}" for i in range(nodes) for t in range(steps)]


def load_csv(path: Path) -> tuple[np.ndarray, list[str]]:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}") from None
    except pd.errors.EmptyDataError:
        raise DataParseError(f"{path}: file is empty") from None
    except pd.errors.ParserError as exc:
        raise DataParseError(f"{path}: ragged rows: {exc}") from None
    if frame.empty:
        raise DataParseError(f"{path}: no data rows")
    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        row = int(np.argmax(short))
        col = int(np.argmax(frame.iloc[row].isna().to_numpy()))
        raise DataParseError(f"{path}: ragged row, missing fields", row=row + 2, col=col + 1)
    # to_numeric only locates bad cells; its fast parser is not correctly rounded
    bad = frame.apply(pd.to_numeric, errors="coerce").isna().to_numpy()
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        raise DataParseError(f"{path}: non-numeric cell {frame.iat[row, col]!r}", row=row + 2, col=col + 1)
    data = frame.to_numpy(dtype=object).astype(np.float64)
    if not np.all(np.isfinite(data)):
        row, col = (int(i) for i in np.argwhere(~np.isfinite(data))[0])
        raise DataParseError(f"{path}: non-finite cell", row=row + 2, col=col + 1)
    logger.info("load_csv path=%s rows=%s features=%s", path, data.shape[0], data.shape[1])
    return data, [str(c) for c in frame.columns]


def write_csv(path: Path, data: np.ndarray, names: list[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.asarray(data, dtype=np.float64).reshape(-1, len(names))
    pd.DataFrame(data, columns=names).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path
