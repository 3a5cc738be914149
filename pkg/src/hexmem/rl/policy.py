"""Gaussian policy over a squashed [0, 1] difficulty action, plus a value head.

The actor outputs the mean of a Gaussian in an unbounded "raw" space; a raw
sample u becomes the action a = (tanh(u) + 1) / 2, and log-densities carry
the change-of-variables correction for that squash.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .nets import (
    Layer,
    flatten_layers,
    init_mlp,
    layer_param_count,
    mlp_backward,
    mlp_forward,
    unflatten_layers,
)

STATE_DIM = 2
HIDDEN = 32
LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0
LOG_STD_INIT = -0.5

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG_2 = np.log(2.0)

CHECKPOINT_MAGIC = b"HXPK"
CHECKPOINT_VERSION = 1


@dataclass
class PolicyParams:
    actor: list[Layer]
    log_std: float
    critic: list[Layer]
    dims: tuple[int, ...] = (STATE_DIM, HIDDEN, HIDDEN, 1)

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            actor=[(w.copy(), b.copy()) for w, b in self.actor],
            log_std=self.log_std,
            critic=[(w.copy(), b.copy()) for w, b in self.critic],
            dims=self.dims,
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate([
            flatten_layers(self.actor),
            np.array([self.log_std]),
            flatten_layers(self.critic),
        ])

    @classmethod
    def from_vector(cls, vector: np.ndarray, dims: tuple[int, ...] = (STATE_DIM, HIDDEN, HIDDEN, 1)) -> "PolicyParams":
        n = layer_param_count(dims)
        actor = unflatten_layers(vector[:n], dims)
        log_std = float(vector[n])
        critic = unflatten_layers(vector[n + 1:], dims)
        return cls(actor=actor, log_std=log_std, critic=critic, dims=dims)

    @property
    def n_params(self) -> int:
        return 2 * layer_param_count(self.dims) + 1

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.to_vector()).all())


def init_params(seed: int = 0, dims: tuple[int, ...] = (STATE_DIM, HIDDEN, HIDDEN, 1)) -> PolicyParams:
    rng = np.random.default_rng(seed)
    # Small output scale puts the initial mean action near 0.5 (raw ~ 0).
    actor = init_mlp(dims, rng, out_scale=0.01)
    critic = init_mlp(dims, rng)
    return PolicyParams(actor=actor, log_std=LOG_STD_INIT, critic=critic, dims=dims)


def squash(raw: np.ndarray | float) -> np.ndarray | float:
    return (np.tanh(raw) + 1.0) / 2.0


def unsquash(action: np.ndarray | float) -> np.ndarray | float:
    return np.arctanh(2.0 * np.asarray(action, dtype=np.float64) - 1.0)


def log_sech2(x: np.ndarray) -> np.ndarray:
    """log(1 - tanh(x)^2), computed stably for large |x|."""
    ax = np.abs(x)
    return 2.0 * (_LOG_2 - ax - np.log1p(np.exp(-2.0 * ax)))


def action_log_prob(raw: np.ndarray, mu: np.ndarray, log_std: float) -> np.ndarray:
    """Density of the squashed action at a = squash(raw), as a log."""
    z = (raw - mu) / np.exp(log_std)
    gauss = -0.5 * z**2 - log_std - _HALF_LOG_2PI
    # da/draw = (1 - tanh(raw)^2) / 2
    return gauss - (log_sech2(raw) - _LOG_2)


def actor_mean(params: PolicyParams, states: np.ndarray) -> np.ndarray:
    mu, _ = mlp_forward(params.actor, np.atleast_2d(states))
    return mu[:, 0]


def critic_value(params: PolicyParams, states: np.ndarray) -> np.ndarray:
    v, _ = mlp_forward(params.critic, np.atleast_2d(states))
    return v[:, 0]


@dataclass(frozen=True)
class ActResult:
    action: float  # difficulty in [0, 1]
    raw: float
    log_prob: float
    value: float


def act(params: PolicyParams, state, deterministic: bool = False,
        rng: np.random.Generator | None = None) -> ActResult:
    """One action for one state. Stochastic mode samples the Gaussian;
    deterministic mode uses its mean. log_prob is always the stochastic
    density at the chosen action."""
    state = np.asarray(state, dtype=np.float64).reshape(1, STATE_DIM)
    mu = actor_mean(params, state)
    if not np.isfinite(mu).all():
        raise FloatingPointError("actor produced a non-finite mean")
    if deterministic:
        raw = mu.copy()
    else:
        if rng is None:
            rng = np.random.default_rng()
        raw = mu + np.exp(params.log_std) * rng.standard_normal(1)
    lp = action_log_prob(raw, mu, params.log_std)
    value = critic_value(params, state)
    return ActResult(
        action=float(squash(raw[0])),
        raw=float(raw[0]),
        log_prob=float(lp[0]),
        value=float(value[0]),
    )


def entropy(params: PolicyParams) -> float:
    """Entropy of the underlying Gaussian (state-independent scale)."""
    return params.log_std + 0.5 * (1.0 + np.log(2.0 * np.pi))


@dataclass
class ForwardCache:
    mu: np.ndarray
    acts_actor: list[np.ndarray]
    values: np.ndarray
    acts_critic: list[np.ndarray]


def forward_batch(params: PolicyParams, states: np.ndarray) -> ForwardCache:
    mu2d, acts_a = mlp_forward(params.actor, states)
    v2d, acts_c = mlp_forward(params.critic, states)
    return ForwardCache(mu=mu2d[:, 0], acts_actor=acts_a, values=v2d[:, 0], acts_critic=acts_c)


def backward_batch(params: PolicyParams, cache: ForwardCache,
                   d_mu: np.ndarray, d_log_std: float, d_value: np.ndarray) -> np.ndarray:
    """Assemble the full flat gradient from output-side derivatives."""
    actor_grads = mlp_backward(params.actor, cache.acts_actor, d_mu[:, None])
    critic_grads = mlp_backward(params.critic, cache.acts_critic, d_value[:, None])
    return np.concatenate([
        flatten_layers(actor_grads),
        np.array([d_log_std]),
        flatten_layers(critic_grads),
    ])


def save_checkpoint(path, params: PolicyParams, config: dict) -> None:
    """Header (version, dims, config snapshot) + flat little-endian f64 weights."""
    vector = params.to_vector()
    blob = json.dumps(config, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HB", CHECKPOINT_VERSION, len(params.dims)))
        fh.write(struct.pack(f"<{len(params.dims)}I", *params.dims))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<Q", len(vector)))
        fh.write(vector.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[PolicyParams, dict]:
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ValueError("not a policy checkpoint file")
        version, n_dims = struct.unpack("<HB", fh.read(3))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = struct.unpack(f"<{n_dims}I", fh.read(4 * n_dims))
        (blob_len,) = struct.unpack("<I", fh.read(4))
        config = json.loads(fh.read(blob_len).decode())
        (n,) = struct.unpack("<Q", fh.read(8))
        vector = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(np.float64)
    return PolicyParams.from_vector(vector, dims), config
