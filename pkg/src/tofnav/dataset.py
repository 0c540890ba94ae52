"""Flight logs as CSV time series, and offline replay of recorded ToF streams.

A log directory holds::

    tof.csv        timestamp_ms,d00,...,d77   (mm, row-major, -1 = invalid)
    state.csv      timestamp_ms,x,y,z,roll,pitch,yaw,vx,vy,vz
    commands.csv   timestamp_ms,v_forward,yaw_rate,v_vertical,mode   (optional)
    meta.json      free-form, plus "schema_version": 1

Timestamps are integer milliseconds and strictly increasing within a file.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .perception import PerceptionConfig
from .policy import MODES, Command, DeadEndHistory, PolicyConfig, decide
from .sensor import COLS, INVALID_MM, ROWS, DepthFrame, SensorConfig
from .world import DroneState

SCHEMA_VERSION = 1
TOF_HEADER = ["timestamp_ms"] + [f"d{r}{c}" for r in range(ROWS) for c in range(COLS)]
STATE_HEADER = ["timestamp_ms", "x", "y", "z", "roll", "pitch", "yaw", "vx", "vy", "vz"]
COMMAND_HEADER = ["timestamp_ms", "v_forward", "yaw_rate", "v_vertical", "mode"]


class LogError(ValueError):
    """Malformed or inconsistent log content, located by file and line."""

    def __init__(self, path, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class LogValidationError(LogError):
    pass


@dataclass(frozen=True)
class StateSample:
    timestamp_ms: int
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0

    @classmethod
    def from_state(cls, s: DroneState, timestamp_ms: int | None = None) -> "StateSample":
        ts = int(round(s.time_s * 1000)) if timestamp_ms is None else int(timestamp_ms)
        return cls(ts, s.x, s.y, s.height, 0.0, 0.0, s.yaw,
                   s.v_forward * math.cos(s.yaw), s.v_forward * math.sin(s.yaw), s.v_vertical)

    def to_state(self) -> DroneState:
        v = self.vx * math.cos(self.yaw) + self.vy * math.sin(self.yaw)
        return DroneState(x=self.x, y=self.y, height=max(0.0, self.z), yaw=self.yaw, v_forward=v,
                          v_vertical=self.vz, time_s=self.timestamp_ms / 1000.0)


@dataclass
class LogBundle:
    tof: list = field(default_factory=list)  # [DepthFrame]
    state: list = field(default_factory=list)  # [StateSample]
    commands: Optional[list] = None  # [(timestamp_ms, Command)]
    meta: dict = field(default_factory=dict)

    def validate(self, max_range_mm: float = SensorConfig().max_range_mm) -> "LogBundle":
        _check_monotone([f.timestamp_ms for f in self.tof], "tof")
        _check_monotone([s.timestamp_ms for s in self.state], "state")
        if self.commands is not None:
            _check_monotone([t for t, _ in self.commands], "commands")
            for t, c in self.commands:
                if c.mode not in MODES:
                    raise LogValidationError("commands", None, f"unknown mode {c.mode!r} at {t} ms")
        for f in self.tof:
            d = f.distance_mm[f.valid]
            if d.size and (d.min() <= 0 or d.max() > max_range_mm):
                raise LogValidationError("tof", None, f"valid distance outside (0, {max_range_mm:g}] at {f.timestamp_ms} ms")
        return self


def bundle_from_trace(trace, meta: dict | None = None) -> LogBundle:
    """Log of a simulated flight recorded with ``run_scenario(..., record_frames=True)``."""
    if trace.frames is None:
        raise ValueError("trace was run without record_frames=True")
    state = [StateSample.from_state(t.state, f.timestamp_ms) for t, f in zip(trace.ticks, trace.frames)]
    commands = [(f.timestamp_ms, t.command) for t, f in zip(trace.ticks, trace.frames)]
    return LogBundle(list(trace.frames), state, commands, dict(meta or {}))


def _check_monotone(ts: list, name: str) -> None:
    for i, (a, b) in enumerate(zip(ts, ts[1:])):
        if b <= a:
            raise LogValidationError(name, i + 3, f"timestamp {b} does not increase after {a}")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_log(bundle: LogBundle, directory) -> None:
    """Write ``bundle`` into ``directory`` (created if needed), replacing any previous log."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "tof.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TOF_HEADER)
        for f in bundle.tof:
            vals = np.where(f.valid, f.distance_mm, INVALID_MM).ravel()
            w.writerow([str(f.timestamp_ms)] + ["-1" if not ok else _fmt(v) for v, ok in zip(vals, f.valid.ravel())])
    with open(d / "state.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATE_HEADER)
        for s in bundle.state:
            w.writerow([str(s.timestamp_ms)] + [_fmt(getattr(s, k)) for k in STATE_HEADER[1:]])
    cmd_path = d / "commands.csv"
    if bundle.commands is not None:
        with open(cmd_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COMMAND_HEADER)
            for t, c in bundle.commands:
                w.writerow([str(int(t)), _fmt(c.v_forward), _fmt(c.yaw_rate), _fmt(c.v_vertical), c.mode])
    elif cmd_path.exists():
        cmd_path.unlink()
    meta = dict(bundle.meta)
    meta["schema_version"] = SCHEMA_VERSION
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _rows(path: Path, header: list):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise LogError(path, None, f"cannot open: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first != header:
            raise LogError(path, 1, f"expected header {','.join(header[:3])},... ({len(header)} columns)")
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise LogError(path, reader.line_num, f"expected {len(header)} columns, got {len(row)}")
            yield reader.line_num, row


def _int(text: str, path, line) -> int:
    try:
        return int(text)
    except ValueError:
        raise LogError(path, line, f"bad timestamp {text!r}") from None


def _float(text: str, path, line) -> float:
    try:
        v = float(text)
    except ValueError:
        raise LogError(path, line, f"bad number {text!r}") from None
    if not math.isfinite(v):
        raise LogError(path, line, f"non-finite value {text!r}")
    return v


def _read_tof(path: Path, max_range_mm: float) -> list:
    frames = []
    prev = None
    for line, row in _rows(path, TOF_HEADER):
        ts = _int(row[0], path, line)
        if prev is not None and ts <= prev:
            raise LogValidationError(path, line, f"timestamp {ts} does not increase after {prev}")
        prev = ts
        vals = np.array([_float(v, path, line) for v in row[1:]])
        valid = vals != INVALID_MM
        bad = valid & ((vals <= 0) | (vals > max_range_mm))
        if bad.any():
            k = int(np.argmax(bad))
            raise LogValidationError(path, line, f"d{k // COLS}{k % COLS}={vals[k]:g} outside (0, {max_range_mm:g}] mm")
        frames.append(DepthFrame(vals.reshape(ROWS, COLS), valid.reshape(ROWS, COLS), ts))
    return frames


def _read_state(path: Path) -> list:
    out = []
    prev = None
    for line, row in _rows(path, STATE_HEADER):
        ts = _int(row[0], path, line)
        if prev is not None and ts <= prev:
            raise LogValidationError(path, line, f"timestamp {ts} does not increase after {prev}")
        prev = ts
        out.append(StateSample(ts, *(_float(v, path, line) for v in row[1:])))
    return out


def _read_commands(path: Path) -> list:
    out = []
    prev = None
    for line, row in _rows(path, COMMAND_HEADER):
        ts = _int(row[0], path, line)
        if prev is not None and ts <= prev:
            raise LogValidationError(path, line, f"timestamp {ts} does not increase after {prev}")
        prev = ts
        if row[4] not in MODES:
            raise LogError(path, line, f"unknown mode {row[4]!r}")
        out.append((ts, Command(*(_float(v, path, line) for v in row[1:4]), row[4])))
    return out


def read_log(directory, max_range_mm: float = SensorConfig().max_range_mm) -> LogBundle:
    d = Path(directory)
    tof = _read_tof(d / "tof.csv", max_range_mm)
    state = _read_state(d / "state.csv")
    cmd_path = d / "commands.csv"
    commands = _read_commands(cmd_path) if cmd_path.exists() else None
    meta_path = d / "meta.json"
    meta = {}
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LogError(meta_path, exc.lineno, exc.msg) from None
        if not isinstance(meta, dict):
            raise LogError(meta_path, 1, "expected a JSON object")
        meta.pop("schema_version", None)
    return LogBundle(tof, state, commands, meta)


def replay(bundle: LogBundle, pcfg: PerceptionConfig = PerceptionConfig(), cfg: PolicyConfig = PolicyConfig(),
           scfg: SensorConfig = SensorConfig()) -> list:
    """Run every recorded frame through the policy; returns ``[(timestamp_ms, Command)]``.

    Each frame is paired with the latest state sample at or before its
    timestamp, or a hover at cruise height when none exists yet.
    """
    if not bundle.tof:
        return []
    stamps = [s.timestamp_ms for s in bundle.state]
    t0 = bundle.tof[0].timestamp_ms
    history = DeadEndHistory()
    out = []
    for frame in bundle.tof:
        k = bisect.bisect_right(stamps, frame.timestamp_ms) - 1
        if k >= 0:
            state = bundle.state[k].to_state()
        else:
            state = DroneState(height=cfg.cruise_height, time_s=frame.timestamp_ms / 1000.0)
        cmd, history = decide(frame, state, history, (frame.timestamp_ms - t0) / 1000.0, cfg, pcfg, scfg)
        out.append((frame.timestamp_ms, cmd))
    return out
