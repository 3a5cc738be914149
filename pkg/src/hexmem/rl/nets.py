"""Tiny fully-connected nets with hand-written forward/backward passes.

Everything is float64 and pure numpy; the architectures are small enough
that explicit backprop is both fast and exactly checkable against finite
differences.
"""

from __future__ import annotations

import numpy as np

Layer = tuple[np.ndarray, np.ndarray]  # (W: in x out, b: out)


def init_mlp(dims: tuple[int, ...], rng: np.random.Generator,
             out_scale: float = 1.0) -> list[Layer]:
    """Xavier-style init; the output layer can be shrunk so the net starts
    near zero."""
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        scale = 1.0 / np.sqrt(fan_in)
        if i == len(dims) - 2:
            scale *= out_scale
        w = rng.normal(0.0, scale, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        layers.append((w, b))
    return layers


def mlp_forward(layers: list[Layer], x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Tanh hidden layers, linear output. Returns (out, activations);
    activations[i] is the input to layer i."""
    acts = [x]
    h = x
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if i < len(layers) - 1:
            h = np.tanh(h)
        acts.append(h)
    return h, acts


def mlp_backward(layers: list[Layer], acts: list[np.ndarray],
                 dout: np.ndarray) -> list[Layer]:
    """Gradients of each layer given d(loss)/d(out); mirrors mlp_forward."""
    grads: list[Layer] = [None] * len(layers)  # type: ignore[list-item]
    delta = dout
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        if i < len(layers) - 1:
            delta = delta * (1.0 - acts[i + 1] ** 2)  # through tanh
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = delta @ w.T
    return grads


def flatten_layers(layers: list[Layer]) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in layers])


def unflatten_layers(vector: np.ndarray, dims: tuple[int, ...]) -> list[Layer]:
    layers = []
    pos = 0
    for i in range(len(dims) - 1):
        n_w = dims[i] * dims[i + 1]
        w = vector[pos:pos + n_w].reshape(dims[i], dims[i + 1]).copy()
        pos += n_w
        b = vector[pos:pos + dims[i + 1]].copy()
        pos += dims[i + 1]
        layers.append((w, b))
    if pos != len(vector):
        raise ValueError(f"vector length {len(vector)} does not match dims {dims}")
    return layers


def layer_param_count(dims: tuple[int, ...]) -> int:
    return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))
