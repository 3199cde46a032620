"""Experiment configuration: a JSON key-value tree with strict keys.

Every key has a default; a config file and ``--set key=value`` overrides may
only name known keys.  Each module validates its own slice at load time.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ConfigError, LabError

DEFAULTS: dict[str, Any] = {
    "surface": {"handle1": [3.0, 3.0, 4.0], "handle2": [3.0, 3.0, 4.0], "twist": 0.0},
    "surgery": {"q": 1, "eta": 0.1, "eps": 0.003, "delta": 0.05},
    "census": {"T_max": 8.0, "window": [4.0, 8.0], "step": 0.25, "node_limit": 2_000_000},
    "orbits": {"seeds": 200, "max_returns": 3, "band_classes": None, "min_orbits": 100, "min_one_sided": 20},
    "entropy": {
        "T_grid": [4.0, 5.0, 6.0, 7.0, 8.0],
        "deltas": [0.2, 0.1, 0.05],
        "seeds": 2500,
        "arc_length": 0.0125,
        "arc_angle": 0.3,
        "rescale": 2.0,
        "orbit_delta": 0.05,
        "orbit_count": 50,
    },
    "suspension": {"matrix": [[2, 1], [1, 1]], "k_max": 20, "brute_force_k": 12, "epsilon": 0.05, "samples": 500},
    "torus": {"delta": 0.05, "K": 4.0},
    "rng_seed": 12345,
    "output_dir": "lab-out",
}


def _check_types(tree: Any, default: Any, path: str) -> None:
    if isinstance(default, dict):
        if not isinstance(tree, dict):
            raise ConfigError(f"{path or 'config'}: expected a table")
        for k in tree:
            if k not in default:
                raise ConfigError(f"unknown key {path + '.' if path else ''}{k}")
            _check_types(tree[k], default[k], f"{path + '.' if path else ''}{k}")
        return
    if default is None or tree is None:
        return
    if isinstance(default, bool):
        ok = isinstance(tree, bool)
    elif isinstance(default, int):
        ok = isinstance(tree, int) and not isinstance(tree, bool)
    elif isinstance(default, float):
        ok = isinstance(tree, (int, float)) and not isinstance(tree, bool) and math.isfinite(tree)
    elif isinstance(default, str):
        ok = isinstance(tree, str)
    elif isinstance(default, list):
        ok = isinstance(tree, list)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{path}: expected {type(default).__name__}, got {tree!r}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(item: str) -> tuple[list[str], Any]:
    """``a.b=value``; the value is read as JSON, falling back to a plain string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"bad key in override {item!r}")
    return parts, value


@dataclass(frozen=True)
class ExperimentConfig:
    tree: dict

    def __getitem__(self, key: str) -> Any:
        return self.tree[key]

    @property
    def output_dir(self) -> Path:
        return Path(self.tree["output_dir"])

    @property
    def rng_seed(self) -> int:
        return int(self.tree["rng_seed"])

    def canonical_json(self) -> str:
        data = {k: v for k, v in self.tree.items() if k != "output_dir"}
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def surface_params(self):
        from .surface import FenchelNielsen

        s = self.tree["surface"]
        return FenchelNielsen(tuple(map(float, s["handle1"])), tuple(map(float, s["handle2"])), float(s["twist"]))

    def surgery_params(self, **changes):
        from .surgery import SurgeryParams

        s = dict(self.tree["surgery"], **changes)
        return SurgeryParams(q=int(s["q"]), eta=float(s["eta"]), eps=float(s["eps"]), delta=float(s["delta"]))

    def transition_matrix(self):
        from .suspension import TransitionMatrix

        return TransitionMatrix.from_array(self.tree["suspension"]["matrix"])

    def validate(self) -> None:
        from .surgery import validate_params

        try:
            validate_params(self.surgery_params())
            self.transition_matrix()
            for h in ("handle1", "handle2"):
                if len(self.tree["surface"][h]) != 3:
                    raise ConfigError(f"surface.{h} needs three traces")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        except LabError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
        e = self.tree["entropy"]
        if len(e["T_grid"]) < 4:
            raise ConfigError("entropy.T_grid needs at least 4 values")
        if not e["deltas"] or min(e["deltas"]) <= 0:
            raise ConfigError("entropy.deltas must be positive")


def load_config(path: str | os.PathLike | None, overrides: list[str] = ()) -> ExperimentConfig:
    tree: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            tree = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
    _check_types(tree, DEFAULTS, "")
    merged = _merge(DEFAULTS, tree)
    for item in overrides:
        keys, value = parse_override(item)
        node, default = merged, DEFAULTS
        for k in keys[:-1]:
            if not isinstance(default, dict) or k not in default:
                raise ConfigError(f"unknown key {'.'.join(keys)}")
            node, default = node[k], default[k]
        if not isinstance(default, dict) or keys[-1] not in default:
            raise ConfigError(f"unknown key {'.'.join(keys)}")
        _check_types(value, default[keys[-1]], ".".join(keys))
        node[keys[-1]] = value
    cfg = ExperimentConfig(merged)
    cfg.validate()
    return cfg


def worker_count() -> int:
    """Worker cap from ``LAB_THREADS`` (default 1)."""
    raw = os.environ.get("LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"LAB_THREADS={raw!r} is not an integer") from exc
    if n < 1:
        raise ConfigError("LAB_THREADS must be at least 1")
    return n
