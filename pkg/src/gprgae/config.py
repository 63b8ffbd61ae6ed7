"""Flat ``section.key = value`` run configuration.

Values are JSON literals (``7``, ``0.2``, ``true``, ``"tanh_margin"``, ``null``);
bare words are read as strings and lines starting with ``#`` are comments.
A ``[section]`` header prefixes the keys that follow it.  Every key has a
default, so an empty file gives the stock settings; unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, object] = {
    "data.edges": None,
    "data.features": None,
    "data.labels": None,
    "data.split": None,
    "synthetic.n_nodes": 600,
    "synthetic.n_classes": 5,
    "synthetic.p_in": 0.05,
    "synthetic.p_out": 0.003,
    "synthetic.n_features": 16,
    "synthetic.feature_noise": 1.5,
    "synthetic.seed": 0,
    "purifier.k": 7,
    "purifier.z1": 128,
    "purifier.z2": 512,
    "purifier.p": 1.5,
    "purifier.q": 0.2,
    "purifier.eta": 3.0,
    "purifier.delta": 0.2,
    "purifier.epochs": 2000,
    "purifier.lr": 0.01,
    "purifier.weight_decay": 0.0001,
    "purifier.dropout": 0.7,
    "purifier.self_loops": False,
    "purifier.reweight": True,
    "purifier.n_val_sets": 10,
    "purifier.seed": 0,
    "purify.alpha": 1.0,
    "purify.tau": 0.001,
    "purify.max_steps": 5,
    "purify.prune_eps": 0.0001,
    "purify.single_step_discretize": False,
    "classifier.hidden": 64,
    "classifier.dropout": 0.5,
    "classifier.lr": 0.01,
    "classifier.weight_decay": 0.001,
    "classifier.loss": "tanh_margin",
    "classifier.max_epochs": 3000,
    "classifier.patience": 200,
    "classifier.seed": 0,
    "attack.kind": "prbcd_lite",
    "attack.epsilon": 0.25,
    "attack.block_size": 10000,
    "attack.rounds": 20,
    "attack.seed": 0,
    "lipschitz.pairs": 100,
    "lipschitz.max_budget": 0.5,
    "lipschitz.seed": 0,
    "output.dir": "runs",
    "output.run_id": "default",
}

CHOICES = {
    "classifier.loss": ("tanh_margin", "cross_entropy"),
    "attack.kind": ("prbcd_lite", "random"),
}


def _parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _coerce(key: str, value):
    default = DEFAULTS[key]
    if value is None:
        return value
    if default is None:
        return str(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        value = float(value)
    elif isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    if key in CHOICES and value not in CHOICES[key]:
        raise ConfigError(f"{key}: must be one of {CHOICES[key]}, got {value!r}")
    return value


def parse(text: str) -> dict:
    """Parse config text into a complete key -> value mapping."""
    cfg = dict(DEFAULTS)
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if section and "." not in key:
            key = f"{section}.{key}"
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        cfg[key] = _coerce(key, _parse_value(value))
    return cfg


def override(cfg: dict, assignments) -> dict:
    """Apply ``key=value`` strings, e.g. from ``--set`` flags."""
    cfg = dict(cfg)
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        cfg[key] = _coerce(key, _parse_value(value))
    return cfg


def serialize(cfg: dict) -> str:
    lines = []
    for key in sorted(cfg):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        lines.append(f"{key} = {json.dumps(cfg[key])}")
    return "\n".join(lines) + "\n"


def load(path) -> dict:
    if path is None:
        return dict(DEFAULTS)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse(text)


def section(cfg: dict, name: str) -> dict:
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in cfg.items() if k.startswith(prefix)}
