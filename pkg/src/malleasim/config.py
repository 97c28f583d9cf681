"""Run configuration shared by the CLI commands.

A config file is a YAML mapping with up to five sections; every key is
optional and falls back to the default below::

    cluster:   {total_nodes: 128, job_cap: 32}
    scheduler: {tick_s: 10, malleability: true}
    overhead:  {spawn_base_s: 1.0, spawn_per_proc_s: 0.05,
                bandwidth_bytes_per_s: 12.5e9, latency_s: 5.0e-6, bytes_per_element: 8}
    energy:    {idle_w: 100, loaded_w: 340}
    profiles:  {threshold_pct: 10, dir: null}   # null = bundled fixtures
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

import yaml

from .errors import InputError
from .metrics import IDLE_W, LOADED_W
from .profiles import DEFAULT_THRESHOLD_PCT
from .reconfig import OverheadModel
from .scheduler import DEFAULT_TICK_S
from .simulator import SimConfig


class InvalidConfig(InputError):
    pass


@dataclass(frozen=True)
class RunConfig:
    total_nodes: int = 128
    job_cap: int = 32
    tick_s: float = DEFAULT_TICK_S
    malleability: bool = True
    overhead: OverheadModel = field(default_factory=OverheadModel)
    idle_w: float = IDLE_W
    loaded_w: float = LOADED_W
    threshold_pct: float = DEFAULT_THRESHOLD_PCT
    profiles_dir: str | None = None

    def __post_init__(self):
        if self.total_nodes < 1:
            raise InvalidConfig("cluster.total_nodes must be >= 1")
        if not 1 <= self.job_cap <= self.total_nodes:
            raise InvalidConfig(
                f"cluster.job_cap must be within [1, total_nodes={self.total_nodes}], "
                f"got {self.job_cap}")
        if self.tick_s <= 0:
            raise InvalidConfig("scheduler.tick_s must be > 0")
        if self.idle_w < 0 or self.loaded_w < 0:
            raise InvalidConfig("energy wattages must be >= 0")
        if self.threshold_pct <= 0:
            raise InvalidConfig("profiles.threshold_pct must be > 0")
        o = self.overhead
        if min(o.spawn_base_s, o.spawn_per_proc_s, o.latency_s) < 0:
            raise InvalidConfig("overhead constants must be >= 0")
        if o.bandwidth_bytes_per_s <= 0 or o.bytes_per_element < 1:
            raise InvalidConfig("overhead bandwidth and bytes_per_element must be > 0")

    def sim_config(self) -> SimConfig:
        return SimConfig(self.total_nodes, self.tick_s, self.malleability, self.overhead)


# section -> {yaml key: RunConfig field}
_SECTIONS = {
    "cluster": {"total_nodes": "total_nodes", "job_cap": "job_cap"},
    "scheduler": {"tick_s": "tick_s", "malleability": "malleability"},
    "energy": {"idle_w": "idle_w", "loaded_w": "loaded_w"},
    "profiles": {"threshold_pct": "threshold_pct", "dir": "profiles_dir"},
}
_OVERHEAD_KEYS = {f.name for f in fields(OverheadModel)}


def _number(section: str, key: str, value, kind):
    if kind is bool:
        if not isinstance(value, bool):
            raise InvalidConfig(f"{section}.{key} must be true or false")
        return value
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a sign ("1.0e9") as strings
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)) or math.isnan(value):
        raise InvalidConfig(f"{section}.{key} must be a number, got {value!r}")
    if kind is int and value != int(value):
        raise InvalidConfig(f"{section}.{key} must be an integer, got {value!r}")
    return kind(value)


def config_from_dict(doc: Mapping | None) -> RunConfig:
    doc = doc or {}
    if not isinstance(doc, Mapping):
        raise InvalidConfig("config must be a mapping of sections")
    unknown = set(doc) - set(_SECTIONS) - {"overhead"}
    if unknown:
        raise InvalidConfig(f"unknown config section(s): {sorted(unknown)}")
    kinds = {f.name: f.type for f in fields(RunConfig)}
    kwargs = {}
    for section, keys in _SECTIONS.items():
        body = doc.get(section) or {}
        if not isinstance(body, Mapping):
            raise InvalidConfig(f"config section '{section}' must be a mapping")
        for key, value in body.items():
            if key not in keys:
                raise InvalidConfig(f"unknown config key '{section}.{key}'")
            name = keys[key]
            if name == "profiles_dir":
                kwargs[name] = None if value is None else str(value)
                continue
            kind = {"int": int, "float": float, "bool": bool}[kinds[name]]
            kwargs[name] = _number(section, key, value, kind)
    body = doc.get("overhead") or {}
    if not isinstance(body, Mapping):
        raise InvalidConfig("config section 'overhead' must be a mapping")
    over = {}
    for key, value in body.items():
        if key not in _OVERHEAD_KEYS:
            raise InvalidConfig(f"unknown config key 'overhead.{key}'")
        over[key] = _number("overhead", key, value,
                            int if key == "bytes_per_element" else float)
    if over:
        kwargs["overhead"] = OverheadModel(**over)
    return RunConfig(**kwargs)


def load_config(path: str | Path | None) -> RunConfig:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"{path}: not a valid YAML document ({exc})") from exc
    try:
        return config_from_dict(doc)
    except InvalidConfig as exc:
        raise InvalidConfig(f"{path}: {exc}") from exc
