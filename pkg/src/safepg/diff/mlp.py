# Minimal MLP stack: flat parameter vectors with an explicit layout, a
# deterministic forward pass, and exact reverse-mode gradients. All math is
# double precision so finite-difference checks can run at tight tolerances.
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected network: input_dim -> hidden sizes -> output_dim."""

    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.hidden) < 1:
            raise ShapeError("at least one hidden layer required")
        if self.input_dim <= 0 or self.output_dim <= 0 or min(self.hidden) <= 0:
            raise ShapeError("layer sizes must be positive")
        if self.activation not in ("relu", "tanh"):
            raise ShapeError(f"unknown activation {self.activation!r}")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.output_dim]

    def layout(self) -> list[tuple[str, tuple[int, int], int]]:
        """[(name, shape, offset)] covering the flat vector exactly."""
        out = []
        offset = 0
        sizes = self.layer_sizes
        for i in range(len(sizes) - 1):
            shape = (sizes[i], sizes[i + 1])
            out.append((f"W{i}", shape, offset))
            offset += shape[0] * shape[1]
            out.append((f"b{i}", (shape[1],), offset))
            offset += shape[1]
        return out

    @property
    def n_params(self) -> int:
        name, shape, offset = self.layout()[-1]
        return offset + int(np.prod(shape))


@dataclass
class ParamVector:
    """Flat parameter array tied to an MlpSpec layout."""

    spec: MlpSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.spec.n_params,):
            raise ShapeError(
                f"expected {self.spec.n_params} parameters, got {self.values.shape}"
            )

    def unpack(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """[(W, b)] views into the flat array, one pair per layer."""
        entries = {}
        for name, shape, offset in self.spec.layout():
            n = int(np.prod(shape))
            entries[name] = self.values[offset : offset + n].reshape(shape)
        n_layers = len(self.spec.layer_sizes) - 1
        return [(entries[f"W{i}"], entries[f"b{i}"]) for i in range(n_layers)]

    def copy(self) -> "ParamVector":
        return ParamVector(self.spec, self.values.copy())

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "safepg-params-v1",
                "spec": {
                    "input_dim": self.spec.input_dim,
                    "hidden": list(self.spec.hidden),
                    "output_dim": self.spec.output_dim,
                    "activation": self.spec.activation,
                },
                "layout": [
                    {"name": n, "shape": list(s), "offset": o}
                    for n, s, o in self.spec.layout()
                ],
                "values": self.values.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ParamVector":
        doc = json.loads(text)
        if doc.get("format") != "safepg-params-v1":
            raise ValueError(f"unknown checkpoint format {doc.get('format')!r}")
        s = doc["spec"]
        spec = MlpSpec(s["input_dim"], tuple(s["hidden"]), s["output_dim"],
                       s["activation"])
        return cls(spec, np.asarray(doc["values"], dtype=float))


def init_params(
    spec: MlpSpec, rng: np.random.Generator, zero_last_layer: bool = False
) -> ParamVector:
    """Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    With zero_last_layer the output weights start at exactly zero, so the
    network is identically zero until the output layer receives a nonzero
    gradient. The same number of random draws is consumed either way, keeping
    downstream RNG streams aligned across the two choices.
    """
    values = np.empty(spec.n_params)
    last_weight = f"W{len(spec.layer_sizes) - 2}"
    for name, shape, offset in spec.layout():
        n = int(np.prod(shape))
        fan_in = shape[0] if len(shape) == 2 else 1
        bound = 1.0 / np.sqrt(fan_in)
        if name.startswith("b"):
            values[offset : offset + n] = 0.0
        else:
            draw = rng.uniform(-bound, bound, size=n)
            if zero_last_layer and name == last_weight:
                draw = np.zeros(n)
            values[offset : offset + n] = draw
    return ParamVector(spec, values)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(z, 0.0) if kind == "relu" else np.tanh(z)


def _activate_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    return (z > 0.0).astype(float) if kind == "relu" else 1.0 - a * a


def mlp_forward(
    spec: MlpSpec, params: ParamVector, x: np.ndarray, cache: list | None = None
) -> np.ndarray:
    """Forward pass; x is (input_dim,) or (N, input_dim). Passing a list as
    cache records activations for mlp_backward."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != spec.input_dim:
        raise ShapeError(f"input dim {h.shape[1]} != spec {spec.input_dim}")
    layers = params.unpack()
    if cache is not None:
        cache.append(h)
    for i, (W, b) in enumerate(layers):
        z = h @ W + b
        h = z if i == len(layers) - 1 else _activate(z, spec.activation)
        if cache is not None:
            cache.append((z, h))
    return h[0] if squeeze else h


def mlp_backward(
    spec: MlpSpec, params: ParamVector, x: np.ndarray, output_grad: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Exact reverse-mode gradients.

    Returns (param_grad, input_grad); batched inputs sum parameter gradients
    over the batch and return per-sample input gradients.
    """
    x = np.asarray(x, dtype=float)
    gy = np.asarray(output_grad, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x, gy = x[None, :], gy[None, :]
    if gy.shape != (x.shape[0], spec.output_dim):
        raise ShapeError(f"output_grad shape {gy.shape} incompatible")
    cache: list = []
    mlp_forward(spec, params, x, cache=cache)
    layers = params.unpack()
    grad = np.zeros_like(params.values)
    gparam = ParamVector(spec, grad).unpack()
    delta = gy
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        gW, gb = gparam[i]
        h_prev = cache[0] if i == 0 else cache[i][1]
        gW += h_prev.T @ delta
        gb += delta.sum(axis=0)
        delta = delta @ W.T
        if i > 0:
            z_prev, a_prev = cache[i]
            delta = delta * _activate_grad(z_prev, a_prev, spec.activation)
    input_grad = delta[0] if squeeze else delta
    return grad, input_grad
