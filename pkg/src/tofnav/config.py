"""JSON run configuration: one section per component, every key optional.

Unknown keys and out-of-range values raise :class:`ConfigError` naming the
offending field, e.g. ``policy.d_fear``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .perception import PerceptionConfig
from .policy import PolicyConfig
from .sensor import NoiseConfig, SensorConfig
from .sim.physics import SimConfig


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


_SET_FIELDS = {"ceiling_rows", "ground_rows", "danger_cols", "caution_cols"}


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, tuple):
        return [_to_jsonable(v) for v in value]
    return value


def section_to_dict(obj) -> dict:
    return {f.name: _to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}


def _coerce(cls, name: str, value: Any, current: Any, path: str) -> Any:
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if name in _SET_FIELDS:
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(path, "expected a list of integer indices")
        return frozenset(value)
    if isinstance(current, np.ndarray):
        arr = np.asarray(value, dtype=float) if isinstance(value, list) else None
        if arr is None or arr.shape != current.shape:
            raise ConfigError(path, f"expected a {current.shape[0]}x{current.shape[1]} array")
        return arr
    if name == "validity_knots":
        if not isinstance(value, list) or not all(isinstance(k, list) and len(k) == 2 for k in value):
            raise ConfigError(path, "expected a list of [distance_m, probability] pairs")
        return tuple((float(d), float(p)) for d, p in value)
    return value


def build_section(cls, data: Any, section: str, base=None):
    """Instantiate ``cls`` from ``base`` (or defaults) with the overrides in ``data``."""
    base = base if base is not None else cls()
    if data is None:
        return base
    if not isinstance(data, dict):
        raise ConfigError(section, "expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{section}.{key}"
        if key not in names:
            raise ConfigError(path, "unknown key")
        kwargs[key] = _coerce(cls, key, value, getattr(base, key), path)
    try:
        return dataclasses.replace(base, **kwargs)
    except (ValueError, TypeError) as exc:
        bad = next(iter(kwargs), "")
        raise ConfigError(f"{section}.{bad}" if len(kwargs) == 1 else section, str(exc)) from None


SECTIONS = {
    "sensor": SensorConfig,
    "noise": NoiseConfig,
    "perception": PerceptionConfig,
    "policy": PolicyConfig,
    "sim": SimConfig,
}


@dataclass(frozen=True)
class RunConfig:
    sensor: SensorConfig = field(default_factory=SensorConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if self.sim.control_rate_hz != self.sensor.frame_rate_hz:
            raise ConfigError("sim.control_rate_hz", "must equal sensor.frame_rate_hz")

    def to_dict(self) -> dict:
        return {name: section_to_dict(getattr(self, name)) for name in SECTIONS}

    def merged(self, data: dict | None) -> "RunConfig":
        """New config with the sections in ``data`` layered on top of this one."""
        if not data:
            return self
        if not isinstance(data, dict):
            raise ConfigError("config", "expected an object")
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown section")
        parts = {name: build_section(cls, data.get(name), name, getattr(self, name)) for name, cls in SECTIONS.items()}
        return RunConfig(**parts)

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        return cls().merged(data)


def load_json(path: str | Path, what: str = "config") -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(what, f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(what, f"invalid JSON in {path} at line {exc.lineno}: {exc.msg}") from None


def load_run_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig.from_dict(load_json(path))


def dump_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
