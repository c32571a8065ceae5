"""Experiment configuration files and path export.

A configuration is a JSON object with a ``schema_version`` and a fixed set
of sections; unknown keys anywhere are rejected so that a misspelt exponent
cannot silently fall back to a default.
"""

from __future__ import annotations

import csv
import json
import math
import numbers
from pathlib import Path as FsPath
from typing import Any, Mapping

from .exceptions import ConfigError, ParameterError
from .model import BranchingModel, model_from_dict, model_to_dict
from .simulator import Path, SimConfig

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "write_json",
    "write_path_csv",
    "read_path_csv",
]

SCHEMA_VERSION = 1

_SIM_KEYS = {"dt", "t_max", "eps_zero", "cap_explosion", "jump_delta", "record_stride"}
_SECTIONS: dict[str, dict[str, type | tuple]] = {
    "analytics": {"a": float, "u_min": float, "u_max": float, "n_u": int},
    "simulate": {"x0": float, "n_paths": int, "levels": list},
    "estimate": {"x0": float, "n_paths": int, "event": dict},
    "validate": {"criteria": list},
}
_EVENT_KEYS = {
    "ExtinctBy": {"kind", "t"},
    "ExplodedBy": {"kind", "t"},
    "HitsBelow": {"kind", "t", "level"},
    "HitsAbove": {"kind", "t", "level"},
}
_TOP_KEYS = {"schema_version", "model", "sim", "seed", *_SECTIONS}


class ExperimentConfig:
    """Parsed configuration; ``raw`` keeps the validated JSON for provenance."""

    def __init__(self, raw: dict, model: BranchingModel | None, sim: SimConfig, seed: int | None):
        self.raw = raw
        self.model = model
        self.sim = sim
        self.seed = seed

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))

    def resolved(self, seed: int | None = None) -> dict:
        """The configuration with the effective seed filled in."""
        out = json.loads(json.dumps(self.raw))
        out["schema_version"] = SCHEMA_VERSION
        out["sim"] = {k: v for k, v in self.sim.to_dict().items() if k != "seed"}
        if self.model is not None:
            out["model"] = model_to_dict(self.model)
        if seed is not None:
            out["seed"] = int(seed)
        return out


def _number(section: str, key: str, value, kind) -> Any:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigError(f"{section}.{key} must be a number")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{section}.{key} must be an integer")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{section}.{key} must be finite")
    return value


def _check_keys(where: str, data: Mapping, allowed) -> None:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def parse_config(data: Mapping) -> ExperimentConfig:
    _check_keys("config", data, _TOP_KEYS)
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    raw: dict = {"schema_version": SCHEMA_VERSION}
    model = None
    if "model" in data:
        try:
            model = model_from_dict(data["model"])
        except ParameterError as exc:
            raise ConfigError(f"invalid model: {exc}") from exc
        raw["model"] = dict(data["model"])
    sim_raw = data.get("sim", {})
    _check_keys("sim", sim_raw, _SIM_KEYS)
    sim_vals = {k: _number("sim", k, v, int if k == "record_stride" else float) for k, v in sim_raw.items()}
    seed = None
    if "seed" in data:
        seed = _number("config", "seed", data["seed"], int)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
    try:
        sim = SimConfig(**sim_vals, seed=seed or 0)
    except ParameterError as exc:
        raise ConfigError(f"invalid sim section: {exc}") from exc
    raw["sim"] = sim_vals
    if seed is not None:
        raw["seed"] = seed
    for name, fields in _SECTIONS.items():
        if name not in data:
            continue
        sec = data[name]
        _check_keys(name, sec, fields)
        clean = {}
        for k, v in sec.items():
            kind = fields[k]
            if kind in (float, int):
                clean[k] = _number(name, k, v, kind)
            elif kind is list:
                if not isinstance(v, list):
                    raise ConfigError(f"{name}.{k} must be a list")
                clean[k] = [_number(name, k, item, int if name == "validate" else float) for item in v]
            else:
                clean[k] = _parse_event(v)
        raw[name] = clean
    return ExperimentConfig(raw, model, sim, seed)


def _parse_event(ev) -> dict:
    if not isinstance(ev, Mapping) or ev.get("kind") not in _EVENT_KEYS:
        raise ConfigError(f"event.kind must be one of {sorted(_EVENT_KEYS)}")
    keys = _EVENT_KEYS[ev["kind"]]
    _check_keys("estimate.event", ev, keys)
    missing = sorted(keys - set(ev))
    if missing:
        raise ConfigError(f"estimate.event is missing {missing}")
    out = {"kind": ev["kind"]}
    for k in sorted(keys - {"kind"}):
        out[k] = _number("estimate.event", k, ev[k], float)
    return out


def load_config(path) -> ExperimentConfig:
    p = FsPath(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    return parse_config(data)


def write_json(path, payload: Any) -> None:
    """Deterministic JSON: sorted keys, no timestamps, trailing newline."""
    FsPath(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_path_csv(path, p: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x"])
        for t, x in zip(p.times, p.states):
            w.writerow([repr(float(t)), repr(float(x))])


def read_path_csv(path) -> tuple[list[float], list[float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t", "x"]:
        raise ConfigError(f"{path}: expected header t,x")
    ts = [float(r[0]) for r in rows[1:]]
    xs = [float(r[1]) for r in rows[1:]]
    return ts, xs
