"""Scenario configuration files (JSON).

Every :class:`ScenarioConfig` field is addressable; unknown keys are errors.
Only ``topology.d_ba`` and ``topology.d_ta`` are required, everything else
falls back to the defaults.  Example::

    {
      "topology": {"d_bt": 1.0, "d_ba": 0.5, "d_ta": 0.5, "label": "A1"},
      "fading": {"gamma": 2.7, "shadow_sigma_db": 8.0},
      "snr_db": 10.0,
      "train_frames": 10000,
      "test_trials": 2000,
      "arch_a": {"hidden_layers": [64, 64]},
      "train": {"epochs": 20},
      "attack": {"power_rule": "max-budget", "input_source": "r_bt"},
      "pnr_grid_db": {"min": -10, "max": 15, "step": 1},
      "master_seed": 0
    }

``snr_db`` and ``noise_power`` are alternatives; ``pnr_grid_db`` is either a
list or a ``{min, max, step}`` range.  ``pnr_reference`` is ``"transmit"``
(default) or ``"receive"``.  A run manifest (anything carrying a
``manifest_version`` key) is accepted too and yields its resolved snapshot.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .attack import InputSource, PowerRule
from .channel import FadingParams, Topology
from .experiment import AttackTemplate, ScenarioConfig, noise_power_for_snr
from .nn.model import ArchSpec, TrainConfig

REQUIRED = ("topology.d_ba", "topology.d_ta")

_SECTIONS = {
    "topology": Topology,
    "fading": FadingParams,
    "arch_t": ArchSpec,
    "arch_a": ArchSpec,
    "train": TrainConfig,
    "attack": AttackTemplate,
}
_SCALARS = {"noise_power", "snr_db", "symbol_energy", "k", "train_frames", "test_trials", "pnr_grid_db", "master_seed", "pnr_reference"}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _section(name, cls, raw):
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in fields:
            raise ConfigError(f"{name}.{key}", "unknown key")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, str(exc)) from None


def pnr_grid(spec) -> tuple:
    if isinstance(spec, dict):
        extra = set(spec) - {"min", "max", "step"}
        if extra:
            raise ConfigError(f"pnr_grid_db.{sorted(extra)[0]}", "unknown key")
        try:
            lo, hi, step = float(spec["min"]), float(spec["max"]), float(spec.get("step", 1.0))
        except KeyError as exc:
            raise ConfigError(f"pnr_grid_db.{exc.args[0]}", "missing required key") from None
        if step <= 0 or hi < lo:
            raise ConfigError("pnr_grid_db", "need step > 0 and max >= min")
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(round(lo + i * step, 10) for i in range(n))
    if isinstance(spec, (list, tuple)):
        return tuple(float(p) for p in spec)
    raise ConfigError("pnr_grid_db", "expected a list or {min, max, step}")


def config_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a JSON object")
    if "manifest_version" in raw:
        if "config" not in raw:
            raise ConfigError("config", "manifest has no config snapshot")
        raw = raw["config"]
    for key in raw:
        if key not in _SECTIONS and key not in _SCALARS:
            raise ConfigError(key, "unknown key")
    for dotted in REQUIRED:
        sec, key = dotted.split(".")
        if key not in raw.get(sec, {}):
            raise ConfigError(dotted, "missing required key")
    if "snr_db" in raw and "noise_power" in raw:
        raise ConfigError("snr_db", "give either snr_db or noise_power, not both")

    kw = {}
    for name, cls in _SECTIONS.items():
        if name in raw:
            target = "train_cfg" if name == "train" else name
            kw[target] = _section(name, cls, raw[name])
    if "topology" in kw and "label" not in raw["topology"]:
        kw["topology"] = dataclasses.replace(kw["topology"], label="custom")
    for key in ("symbol_energy", "k", "train_frames", "test_trials", "master_seed", "noise_power", "pnr_reference"):
        if key in raw:
            kw[key] = raw[key]
    if "pnr_grid_db" in raw:
        kw["pnr_grid_db"] = pnr_grid(raw["pnr_grid_db"])
    if "noise_power" not in raw:
        fading = kw.get("fading", FadingParams())
        kw["noise_power"] = noise_power_for_snr(float(raw.get("snr_db", 10.0)), fading, float(raw.get("symbol_energy", 1.0)))
    k = int(raw.get("k", 16))
    for arch in ("arch_t", "arch_a"):
        if arch in kw:
            if "k" not in raw.get(arch, {}):
                kw[arch] = dataclasses.replace(kw[arch], k=k)
        else:
            kw[arch] = ArchSpec(k=k)
    try:
        return ScenarioConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("<root>", str(exc)) from None


def load_config(path) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return config_from_dict(raw)


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (PowerRule, InputSource)):
        return obj.value
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    return obj


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Fully resolved snapshot; ``config_from_dict`` of it rebuilds ``cfg`` exactly."""
    d = _plain(cfg)
    d["train"] = d.pop("train_cfg")
    return d
