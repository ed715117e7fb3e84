import numpy as np

from splitvae.core.numerics import as_tensor
from splitvae.errors import DimensionError


def tensor_concat(parts: list[np.ndarray]) -> np.ndarray:
    if not parts:
        raise DimensionError("tensor_concat needs at least one part")
    parts = [as_tensor(p, 2) for p in parts]
    batch = {p.shape[0] for p in parts}
    if len(batch) != 1:
        raise DimensionError(f"batch dimensions differ across parts: {sorted(batch)}")
    return np.concatenate(parts, axis=1)


def tensor_split(whole: np.ndarray, dims: list[int]) -> list[np.ndarray]:
    whole = as_tensor(whole, 2)
    if sum(dims) != whole.shape[1]:
        raise DimensionError(f"dims {list(dims)} sum to {sum(dims)}, tensor width is {whole.shape[1]}")
    bounds = np.cumsum(dims)[:-1]
    return [part.copy() for part in np.split(whole, bounds, axis=1)]
