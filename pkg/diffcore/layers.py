"""
Dense layers and the gated recurrent cell.

Parameters live in flat dicts keyed "<prefix>.<i>.w" / "<prefix>.<i>.b" (MLP)
and "<prefix>.w_u" ... (GRU). Weights follow the x @ W convention, so a
layer mapping `n_in -> n_out` stores W with shape (n_in, n_out). Inputs may
be single vectors or (batch, n_in) matrices.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from utils.error_handler import ShapeError
from .tensor import Value, ArrayLike, as_value, matmul, add, sub, mul, tanh, sigmoid, elu, concat

ACTIVATIONS: Dict[str, Callable[[Value], Value]] = {
    "tanh": tanh,
    "elu": elu,
    "none": lambda v: v,
}


def _activation(name: str) -> Callable[[Value], Value]:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"Unknown activation '{name}', expected one of {sorted(ACTIVATIONS)}")


def mlp_forward(layers: Sequence[Tuple[ArrayLike, ArrayLike]],
                x: ArrayLike,
                activation: str = "tanh",
                output_activation: str = "none") -> Value:
    """
    Affine + activation stack.

    Args:
        layers: (W, b) pairs, W of shape (n_in, n_out), b of shape (n_out,)
        x: input vector or batch
        activation: applied after every layer but the last
        output_activation: applied after the last layer
    """
    hidden = _activation(activation)
    final = _activation(output_activation)
    out = as_value(x)
    for i, (w, b) in enumerate(layers):
        w, b = as_value(w), as_value(b)
        if out.shape[-1] != w.shape[0]:
            raise ShapeError(f"layer {i}: input dim {out.shape[-1]} != weight rows {w.shape[0]}")
        if b.shape != (w.shape[1],):
            raise ShapeError(f"layer {i}: bias shape {b.shape} != ({w.shape[1]},)")
        out = add(matmul(out, w), b)
        out = final(out) if i == len(layers) - 1 else hidden(out)
    return out


def _glorot(rng: np.random.Generator, n_in: int, n_out: int, scale: float = 1.0) -> np.ndarray:
    limit = scale * np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out))


@dataclass(frozen=True)
class MLPSpec:
    """Shape description of one MLP; `sizes` includes input and output widths."""
    prefix: str
    sizes: Tuple[int, ...]
    hidden_activation: str = "elu"
    output_activation: str = "none"

    def param_shapes(self) -> Dict[str, tuple]:
        shapes = {}
        for i, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            shapes[f"{self.prefix}.{i}.w"] = (n_in, n_out)
            shapes[f"{self.prefix}.{i}.b"] = (n_out,)
        return shapes

    def init(self, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        params = {}
        for i, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            params[f"{self.prefix}.{i}.w"] = _glorot(rng, n_in, n_out)
            params[f"{self.prefix}.{i}.b"] = np.zeros(n_out)
        return params

    def layers(self, params: Mapping[str, ArrayLike]) -> List[Tuple[ArrayLike, ArrayLike]]:
        return [(params[f"{self.prefix}.{i}.w"], params[f"{self.prefix}.{i}.b"])
                for i in range(len(self.sizes) - 1)]

    def __call__(self, params: Mapping[str, ArrayLike], x: ArrayLike) -> Value:
        return mlp_forward(self.layers(params), x, self.hidden_activation, self.output_activation)


GRU_KEYS = ("w_u", "b_u", "w_r", "b_r", "w_c", "b_c")


def gru_cell(params: Mapping[str, ArrayLike], h: ArrayLike, x: ArrayLike) -> Value:
    """
    One gated recurrent update.

        u  = sigmoid([x; h] W_u + b_u)
        r  = sigmoid([x; h] W_r + b_r)
        c  = tanh([x; r*h] W_c + b_c)
        h' = (1 - u) * h + u * c

    `params` maps the keys in GRU_KEYS to arrays; every W has shape
    (x_dim + h_dim, h_dim).
    """
    h, x = as_value(h), as_value(x)
    w_u, b_u, w_r, b_r, w_c, b_c = (as_value(params[k]) for k in GRU_KEYS)
    in_dim = x.shape[-1] + h.shape[-1]
    for name, w in (("w_u", w_u), ("w_r", w_r), ("w_c", w_c)):
        if w.shape != (in_dim, h.shape[-1]):
            raise ShapeError(f"gru_cell: {name} has shape {w.shape}, expected {(in_dim, h.shape[-1])}")

    xh = concat([x, h], axis=-1)
    u = sigmoid(add(matmul(xh, w_u), b_u))
    r = sigmoid(add(matmul(xh, w_r), b_r))
    c = tanh(add(matmul(concat([x, mul(r, h)], axis=-1), w_c), b_c))
    return add(mul(sub(1.0, u), h), mul(u, c))


@dataclass(frozen=True)
class GRUSpec:
    prefix: str
    input_dim: int
    hidden_dim: int

    def param_shapes(self) -> Dict[str, tuple]:
        shapes = {}
        for gate in ("u", "r", "c"):
            shapes[f"{self.prefix}.w_{gate}"] = (self.input_dim + self.hidden_dim, self.hidden_dim)
            shapes[f"{self.prefix}.b_{gate}"] = (self.hidden_dim,)
        return shapes

    def init(self, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        params = {}
        for gate in ("u", "r", "c"):
            params[f"{self.prefix}.w_{gate}"] = _glorot(rng, self.input_dim + self.hidden_dim, self.hidden_dim)
            params[f"{self.prefix}.b_{gate}"] = np.zeros(self.hidden_dim)
        return params

    def __call__(self, params: Mapping[str, ArrayLike], h: ArrayLike, x: ArrayLike) -> Value:
        return gru_cell({k: params[f"{self.prefix}.{k}"] for k in GRU_KEYS}, h, x)
