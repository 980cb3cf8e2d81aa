"""Run configuration: JSON config files, defaults, and override precedence.

Precedence is flags > file > defaults.  Every command echoes the fully
resolved configuration it actually used into its output directory, so a run
can be reproduced from its artifacts alone.
"""

from __future__ import annotations

import copy
import json
import os
from typing import Any, Optional

from .errors import ConfigError

DEFAULTS: dict = {
    "seed": 0,
    "out": None,
    "epsilon": 16.0,
    "dataset": {"kind": "synth", "n": 1280, "classes": 10, "shape": [1, 16, 16],
                "seed": 93, "images": None, "labels": None},
    "split": {"fractions": [0.8, 0.1, 0.1], "seed": 17},
    "arch": "classifier_a",
    "train": {"epochs": 10, "lr": 1e-3, "batch_size": 64, "optimizer": "adam"},
    "adversarial_training": False,
    "adversarial_epsilon": 16.0,
    "gan": {"epochs": 60, "change_epoch": 30, "gen_steps": [2, 1],
            "disc_steps": [1, 1], "gen_lr": [1e-4, 1e-4], "disc_lr": [1e-4, 1e-4],
            "batch_size": 64, "optimizer": "adam"},
    "weights": {"adv_lambda": 10.0, "alpha": 1.0, "beta": 1.0, "c": 1.0},
    "spectral": {"sigma": 0.5, "n_samples": 10},
    "mode": "ge",
    "source_checkpoint": None,
    "generator_checkpoint": None,
    "archive": None,
    "victims": [],
    "attack_batch_size": 256,
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def apply_set_overrides(cfg: dict, assignments) -> dict:
    """Apply `--set dotted.key=json_value` overrides."""
    out = copy.deepcopy(cfg)
    for item in assignments or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw  # bare strings allowed
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value
    return out


def resolve_config(file_cfg: dict, *, seed: Optional[int] = None,
                   out: Optional[str] = None, set_overrides=None) -> dict:
    unknown = set(file_cfg) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = _deep_merge(DEFAULTS, file_cfg)
    cfg = apply_set_overrides(cfg, set_overrides)
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["out"] = out
    if cfg["out"] is None:
        raise ConfigError("an output directory is required (config 'out' or --out)")
    return cfg


def require_paths(cfg: dict, keys) -> None:
    """Fail before any output is written if a referenced path is missing."""
    for key in keys:
        node: Any = cfg
        for part in key.split("."):
            node = node[part] if isinstance(node, dict) else None
            if node is None:
                break
        if node is None:
            raise ConfigError(f"config key {key!r} must be set for this command")
        if isinstance(node, str) and not os.path.exists(node):
            raise ConfigError(f"path for {key!r} does not exist: {node}")


def write_resolved(cfg: dict, out_dir: str) -> None:
    path = os.path.join(out_dir, "resolved_config.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
