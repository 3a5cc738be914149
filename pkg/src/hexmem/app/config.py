"""Flat key = value configuration with HEXMEM_ environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from ..taskmodel import DifficultyWeights

ENV_PREFIX = "HEXMEM_"


@dataclass
class AppConfig:
    ddb_path: str = "hexmem.ddb"
    policy_path: str | None = None
    data_dir: str = "sessions"
    default_method: str = "rule2"
    reward: str = "r1"
    bind_host: str = "127.0.0.1"
    bind_port: int = 8000
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    session_seed: int | None = None  # fixed seed for reproducible serving; None = random
    static_dir: str | None = None  # optional browser client bundle to serve at /ui

    def difficulty_weights(self) -> DifficultyWeights:
        return DifficultyWeights(*self.weights)


_FIELD_PARSERS = {
    "ddb_path": str,
    "policy_path": str,
    "data_dir": str,
    "default_method": str,
    "reward": str,
    "bind_host": str,
    "bind_port": int,
    "weights": lambda s: tuple(float(x) for x in s.split(",")),
    "session_seed": int,
    "static_dir": str,
}


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELD_PARSERS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _FIELD_PARSERS[key](value.strip())
    return values


def load_config(path: str | None = None, env: dict | None = None) -> AppConfig:
    """File values first, then HEXMEM_<KEY> environment overrides."""
    values: dict = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    env = os.environ if env is None else env
    for key, parser in _FIELD_PARSERS.items():
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            values[key] = parser(env[env_key])
    return AppConfig(**values)
