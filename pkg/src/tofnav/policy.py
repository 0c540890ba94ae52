"""Decision tree turning a depth frame into a flight command.

The tree checks, in order: battery budget, an in-progress 180 degree
escape turn, ceiling/ground proximity, and finally the nearest obstacle in
the central danger/caution bands. Forward speed and steering rate are
piecewise functions of the distance to that obstacle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

from .perception import ObjectGroup, PerceptionConfig, group, group_features, threshold
from .sensor import DepthFrame, SensorConfig
from .world import DroneState

CEILING, GROUND, DANGER, CAUTION, PERIPHERY = "Ceiling", "Ground", "Danger", "Caution", "Periphery"
LEFT, RIGHT, CENTER = "Left", "Right", "Center"

CRUISE = "Cruise"
SLOW_STEER = "SlowSteer"
STOP_STEER = "StopSteer"
BACKWARD = "Backward"
HEIGHT_ADJUST = "HeightAdjust"
TURN_AROUND = "TurnAround"
LAND = "Land"
MODES = (CRUISE, SLOW_STEER, STOP_STEER, BACKWARD, HEIGHT_ADJUST, TURN_AROUND, LAND)

HEIGHT_GAIN = 1.0  # 1/s, proportional height hold


@dataclass(frozen=True)
class PolicyConfig:
    d_fear: float = 0.15
    d_short: float = 0.4
    d_med: float = 0.7
    d_long: float = 1.4
    v_back: float = -0.2
    v_slow: float = 0.15
    v_med: float = 0.4
    v_fast: float = 0.85
    v_max: float = 1.0
    omega_slow: float = 0.7
    omega_fast: float = 1.0
    cruise_height: float = 0.4
    v_vertical: float = 0.2
    d_vert: float = 0.3
    ceiling_rows: frozenset = frozenset({0})
    ground_rows: frozenset = frozenset({7})
    danger_cols: frozenset = frozenset({3, 4})
    caution_cols: frozenset = frozenset({2, 5})
    deadend_flip_count: int = 4
    deadend_window_s: float = 3.0
    battery_budget_s: float = 440.0
    steering_enabled: bool = True

    def __post_init__(self):
        for name in ("ceiling_rows", "ground_rows", "danger_cols", "caution_cols"):
            object.__setattr__(self, name, frozenset(int(v) for v in getattr(self, name)))
        if not 0 < self.d_fear < self.d_short < self.d_med < self.d_long:
            raise ValueError("distance thresholds must satisfy 0 < d_fear < d_short < d_med < d_long")
        if not self.v_back < 0 <= self.v_slow < self.v_med < self.v_fast:
            raise ValueError("velocities must satisfy v_back < 0 <= v_slow < v_med < v_fast")
        if self.v_max < 0:
            raise ValueError("v_max must be >= 0")
        if not 0 < self.omega_slow <= self.omega_fast:
            raise ValueError("steering rates must satisfy 0 < omega_slow <= omega_fast")
        if self.danger_cols & self.caution_cols:
            raise ValueError("danger_cols and caution_cols must be disjoint")
        if self.deadend_flip_count < 2:
            raise ValueError("deadend_flip_count must be >= 2")
        if self.deadend_window_s <= 0 or self.battery_budget_s <= 0:
            raise ValueError("deadend_window_s and battery_budget_s must be > 0")
        if self.v_vertical < 0 or self.d_vert <= 0 or self.cruise_height < 0:
            raise ValueError("v_vertical, d_vert and cruise_height must be non-negative")


class Zone(NamedTuple):
    kind: str
    side: str


class Command(NamedTuple):
    v_forward: float
    yaw_rate: float
    v_vertical: float
    mode: str


@dataclass(frozen=True)
class DeadEndHistory:
    """Steering sign changes seen recently, plus any escape turn in progress."""

    recent_steer_signs: tuple = ()  # ((time_s, sign), ...)
    turnaround_active_until: Optional[float] = None
    turnaround_sign: int = 1


class Decision(NamedTuple):
    command: Command
    history: DeadEndHistory
    groups: list
    target: Optional[ObjectGroup]


def classify_zone(row: int, col: int, cfg: PolicyConfig = PolicyConfig()) -> Zone:
    if row in cfg.ceiling_rows:
        kind = CEILING
    elif row in cfg.ground_rows:
        kind = GROUND
    elif col in cfg.danger_cols:
        kind = DANGER
    elif col in cfg.caution_cols:
        kind = CAUTION
    else:
        kind = PERIPHERY
    return Zone(kind, LEFT if col <= 3 else RIGHT)


def forward_velocity(d: float, zone_kind: str, cfg: PolicyConfig = PolicyConfig()) -> float:
    """Commanded forward speed for an obstacle at axial distance ``d`` in a central band."""
    if d < 0:
        raise ValueError("distance must be >= 0")
    if zone_kind not in (DANGER, CAUTION):
        raise ValueError(f"zone_kind must be {DANGER!r} or {CAUTION!r}")
    if d < cfg.d_fear:
        v = cfg.v_back
    elif d < cfg.d_short:
        v = 0.0
    elif d >= cfg.d_long:
        v = cfg.v_fast
    elif zone_kind == CAUTION:
        v = _lerp(d, cfg.d_short, cfg.d_long, cfg.v_slow, cfg.v_fast)
    elif d < cfg.d_med:
        v = _lerp(d, cfg.d_short, cfg.d_med, cfg.v_slow, cfg.v_med)
    else:
        v = _lerp(d, cfg.d_med, cfg.d_long, cfg.v_med, cfg.v_fast)
    return min(v, cfg.v_max)


def _lerp(x, x0, x1, y0, y1):
    return y0 + (x - x0) / (x1 - x0) * (y1 - y0)


def steering_rate(side: str, d: float, cfg: PolicyConfig = PolicyConfig()) -> float:
    """Yaw rate away from an obstacle; positive turns left. Centred obstacles turn right."""
    side = side.capitalize()
    mag = cfg.omega_fast if d < cfg.d_med else cfg.omega_slow
    return mag if side == RIGHT else -mag


def height_hold(state: DroneState, cfg: PolicyConfig) -> float:
    return HEIGHT_GAIN * (cfg.cruise_height - state.height)


def height_adjust(groups: list, cfg: PolicyConfig = PolicyConfig()) -> float:
    """Vertical speed that moves away from a ceiling/ground obstacle (the nearest group)."""
    g = groups[0]
    if any(r in cfg.ground_rows for r, _ in g.pixels):
        return cfg.v_vertical
    return -cfg.v_vertical


def _vertical_trigger(g: ObjectGroup, cfg: PolicyConfig) -> bool:
    if g.min_distance_mm >= cfg.d_vert * 1000.0:
        return False
    rows = range(g.min_row, g.max_row + 1)  # groups are connected, so their rows are contiguous
    return all(r in cfg.ceiling_rows for r in rows) or all(r in cfg.ground_rows for r in rows)


def _band_kind(g: ObjectGroup, cfg: PolicyConfig) -> Optional[str]:
    """Danger if any zone of the group is in the danger band, else Caution, else None."""
    kind = None
    for r, c in g.pixels:
        if r in cfg.ceiling_rows or r in cfg.ground_rows:
            continue
        if c in cfg.danger_cols:
            return DANGER
        if c in cfg.caution_cols:
            kind = CAUTION
    return kind


def update_deadend(history: DeadEndHistory, commanded_sign: int, now: float,
                   cfg: PolicyConfig = PolicyConfig()) -> tuple:
    """Record a steering sign change and report whether a dead end has been detected.

    Returns ``(history, turnaround)``. On detection the history is cleared and a
    turn of pi radians at ``omega_fast`` is scheduled from ``now``.
    """
    entries = history.recent_steer_signs
    if commanded_sign != 0 and (not entries or entries[-1][1] != commanded_sign):
        entries = entries + ((now, int(commanded_sign)),)
    entries = tuple(e for e in entries if now - e[0] <= cfg.deadend_window_s)
    if len(entries) >= cfg.deadend_flip_count:
        sign = entries[-1][1]
        until = now + math.pi / cfg.omega_fast
        return DeadEndHistory((), until, sign), True
    if entries == history.recent_steer_signs:
        return history, False
    return DeadEndHistory(entries, history.turnaround_active_until, history.turnaround_sign), False


def _clamp_v(v: float, cfg: PolicyConfig) -> float:
    return min(v, cfg.v_max)


def decide_full(frame: DepthFrame, state: DroneState, history: DeadEndHistory, elapsed_s: float,
                cfg: PolicyConfig = PolicyConfig(), pcfg: PerceptionConfig = PerceptionConfig(),
                scfg: SensorConfig = SensorConfig()) -> Decision:
    """Like :func:`decide` but also returns the groups and the group steered against."""
    now = frame.timestamp_ms / 1000.0
    hold = height_hold(state, cfg)

    if elapsed_s > cfg.battery_budget_s:
        return Decision(Command(0.0, 0.0, -cfg.v_vertical, LAND), history, [], None)

    until = history.turnaround_active_until
    if until is not None:
        if now < until:
            cmd = Command(0.0, history.turnaround_sign * cfg.omega_fast, hold, TURN_AROUND)
            return Decision(cmd, history, [], None)
        history = replace(history, turnaround_active_until=None)

    groups = group(threshold(frame, pcfg), frame, pcfg)
    if not groups:
        history, _ = update_deadend(history, 0, now, cfg)
        return Decision(Command(_clamp_v(cfg.v_max, cfg), 0.0, hold, CRUISE), history, groups, None)

    nearest = groups[0]
    if _vertical_trigger(nearest, cfg):
        vz = height_adjust(groups, cfg)
        v = _clamp_v(cfg.v_slow, cfg)
        history, _ = update_deadend(history, 0, now, cfg)
        return Decision(Command(v, 0.0, vz, HEIGHT_ADJUST), history, groups, nearest)

    target = None
    kind = None
    for g in groups:
        kind = _band_kind(g, cfg)
        if kind is not None:
            target = g
            break
    if target is None:
        history, _ = update_deadend(history, 0, now, cfg)
        return Decision(Command(_clamp_v(cfg.v_max, cfg), 0.0, hold, CRUISE), history, groups, None)

    d = target.min_distance_mm / 1000.0
    v = forward_velocity(d, kind, cfg)
    if cfg.steering_enabled:
        yaw = steering_rate(group_features(target, scfg).side, d, cfg)
    else:
        yaw = 0.0
    if d < cfg.d_fear:
        mode = BACKWARD
    elif d < cfg.d_short:
        mode = STOP_STEER
    else:
        mode = SLOW_STEER

    sign = 0 if yaw == 0.0 else (1 if yaw > 0 else -1)
    history, turnaround = update_deadend(history, sign, now, cfg)
    if turnaround:
        cmd = Command(0.0, history.turnaround_sign * cfg.omega_fast, hold, TURN_AROUND)
        return Decision(cmd, history, groups, target)
    return Decision(Command(v, yaw, hold, mode), history, groups, target)


def decide(frame: DepthFrame, state: DroneState, history: DeadEndHistory, elapsed_s: float,
           cfg: PolicyConfig = PolicyConfig(), pcfg: PerceptionConfig = PerceptionConfig(),
           scfg: SensorConfig = SensorConfig()) -> tuple:
    """One control step: ``(Command, DeadEndHistory)`` for the given frame and state."""
    d = decide_full(frame, state, history, elapsed_s, cfg, pcfg, scfg)
    return d.command, d.history
