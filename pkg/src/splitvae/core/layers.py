from dataclasses import dataclass, field

import numpy as np

from splitvae.core.numerics import RngStream, as_tensor, ensure_finite
from splitvae.errors import ConfigError, DimensionError, ProtocolOrderError


ACTIVATIONS = ("sigmoid", "relu", "identity")


def _activate(kind: str, pre: np.ndarray) -> np.ndarray:
    if kind == "sigmoid":
        # split by sign so exp never overflows
        out = np.empty_like(pre)
        pos = pre >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-pre[pos]))
        e = np.exp(pre[~pos])
        out[~pos] = e / (1.0 + e)
        return out
    if kind == "relu":
        return np.maximum(pre, 0.0)
    return pre.copy()


def _activation_grad(kind: str, pre: np.ndarray, out: np.ndarray) -> np.ndarray:
    if kind == "sigmoid":
        return out * (1.0 - out)
    if kind == "relu":
        return (pre > 0).astype(np.float64)
    return np.ones_like(pre)


@dataclass
class LayerGrads:
    weights: np.ndarray
    biases: np.ndarray


class DenseLayer:
    def __init__(self, weights, biases, activation: str = "identity"):
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        self.weights = as_tensor(weights, 2).copy()
        self.biases = as_tensor(biases, 1).copy()
        if self.biases.shape[0] != self.weights.shape[1]:
            raise DimensionError(f"bias width {self.biases.shape[0]} != weight out {self.weights.shape[1]}")
        self.activation = activation
        self._input: np.ndarray | None = None
        self._pre: np.ndarray | None = None
        self._out: np.ndarray | None = None

    @classmethod
    def init(cls, n_in: int, n_out: int, activation: str, rng: RngStream, zero: bool = False) -> "DenseLayer":
        if n_in < 1 or n_out < 1:
            raise ConfigError(f"layer dims must be >= 1, got {n_in}x{n_out}")
        if zero:
            weights = np.zeros((n_in, n_out))
        else:
            a = np.sqrt(6.0 / (n_in + n_out))
            weights = rng.uniform(-a, a, (n_in, n_out))
        return cls(weights, np.zeros(n_out), activation)

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_tensor(x, 2)
        if x.shape[1] != self.n_in:
            raise DimensionError(f"layer expects width {self.n_in}, got {x.shape[1]}")
        pre = x @ self.weights + self.biases
        out = _activate(self.activation, pre)
        self._input, self._pre, self._out = x, pre, out
        return out

    def backward(self, out_grad: np.ndarray, retain: bool = False) -> tuple[np.ndarray, LayerGrads]:
        if self._input is None:
            raise ProtocolOrderError("backward called before forward")
        out_grad = as_tensor(out_grad, 2)
        if out_grad.shape != self._out.shape:
            raise DimensionError(f"output grad shape {out_grad.shape} != forward output {self._out.shape}")
        delta = out_grad * _activation_grad(self.activation, self._pre, self._out)
        grads = LayerGrads(weights=self._input.T @ delta, biases=delta.sum(axis=0))
        in_grad = delta @ self.weights.T
        if not retain:
            self._input = self._pre = self._out = None
        return in_grad, grads


@dataclass
class MlpStack:
    layers: list[DenseLayer] = field(default_factory=list)

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise DimensionError(f"layer widths do not chain: {a.n_out} -> {b.n_in}")

    @classmethod
    def build(
        cls,
        widths: list[int],
        rng: RngStream,
        hidden_activation: str = "relu",
        output_activation: str = "sigmoid",
        zero_output: bool = False,
    ) -> "MlpStack":
        if len(widths) < 2:
            raise ConfigError(f"stack needs at least input and output widths, got {widths}")
        layers = []
        last = len(widths) - 2
        for i, (n_in, n_out) in enumerate(zip(widths, widths[1:])):
            act = output_activation if i == last else hidden_activation
            layers.append(DenseLayer.init(n_in, n_out, act, rng, zero=zero_output and i == last))
        return cls(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.weights, layer.biases])
        return out


def stack_forward(stack: MlpStack, x) -> np.ndarray:
    out = as_tensor(x, 2)
    if out.shape[1] != stack.n_in:
        raise DimensionError(f"stack expects width {stack.n_in}, got {out.shape[1]}")
    for i, layer in enumerate(stack.layers):
        out = ensure_finite(layer.forward(out), f"layer {i} of stack {stack.n_in}->{stack.n_out}")
    return out


def stack_backward(stack: MlpStack, output_grad, retain: bool = False) -> tuple[np.ndarray, list[np.ndarray]]:
    """Returns the input gradient and grads flat-aligned with ``stack.parameters()``.

    ``retain=True`` keeps the forward caches so the stack can be backpropagated again
    with a different output gradient.
    """
    grad = as_tensor(output_grad, 2)
    per_layer: list[LayerGrads] = []
    for layer in reversed(stack.layers):
        grad, g = layer.backward(grad, retain=retain)
        per_layer.append(g)
    flat = []
    for g in reversed(per_layer):
        flat.extend([g.weights, g.biases])
    return grad, flat
