"""Layered run configuration: file, then environment, then flags.

The resolved configuration is fully explicit (every default expanded),
hashed, and saved next to command outputs so any run can be reproduced
from its saved copy plus input hashes. Environment variables use the
``AVEMO_`` prefix with ``__`` as the nesting separator, e.g.
``AVEMO_OPTIMIZER__PEAK_LR=0.001``.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from avemo.errors import ConfigError

ENV_PREFIX = "AVEMO_"


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def env_overrides(environ: dict | None = None) -> dict:
    """Nested dict from AVEMO_* variables; values parse as YAML scalars."""
    environ = environ if environ is not None else os.environ
    out: dict = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        parts = [p.lower() for p in key[len(ENV_PREFIX) :].split("__")]
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = yaml.safe_load(raw)
    return out


def deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


@dataclass(frozen=True)
class ResolvedConfig:
    data: dict
    config_hash: str

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"config_hash": self.config_hash, "resolved": self.data}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        return path

    def section(self, name: str) -> dict:
        return self.data.get(name, {})


def resolve_config(
    defaults: dict,
    config_path: str | Path | None = None,
    flags: dict | None = None,
    environ: dict | None = None,
) -> ResolvedConfig:
    """defaults <- file <- environment <- explicit flags (later wins)."""
    def drop_nones(node):
        if isinstance(node, dict):
            return {k: drop_nones(v) for k, v in node.items() if v is not None}
        return node

    data = dict(defaults)
    if config_path:
        data = deep_merge(data, load_config_file(config_path))
    data = deep_merge(data, env_overrides(environ))
    if flags:
        data = deep_merge(data, drop_nones(flags))
    blob = json.dumps(data, sort_keys=True, default=str).encode()
    return ResolvedConfig(data=data, config_hash=hashlib.sha256(blob).hexdigest()[:16])
