"""Scenario builders for the flight experiments and their JSON form.

Every builder places the drone at the origin heading +x at cruise height
unless stated otherwise. Geometry is fully determined by ``params``; the
run seed only drives sensor noise and the optional start-pose jitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..world import MATTE, SURFACE_CLASSES, DroneState, MovingObstacle, Segment, World, box_segments, clearance


class ScenarioError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    world: World
    start: DroneState = DroneState()
    duration_s: float = 30.0
    goal: Optional[tuple] = None  # (x_min, y_min, x_max, y_max); entering it ends the run
    ideal_sensor: bool = False
    start_jitter: tuple = (0.0, 0.0)  # (lateral sigma m, yaw sigma deg)
    random_start: Optional[tuple] = None  # (x_min, y_min, x_max, y_max) sampled per seed
    overrides: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def validate(self) -> "ScenarioConfig":
        if self.duration_s <= 0:
            raise ScenarioError("duration_s", "must be > 0")
        if not self.world.inside(self.start.x, self.start.y):
            raise ScenarioError("start", "start pose outside world bounds")
        for name, box in (("goal", self.goal), ("random_start", self.random_start)):
            if box is not None and not (len(box) == 4 and box[2] > box[0] and box[3] > box[1]):
                raise ScenarioError(name, "expected [x_min, y_min, x_max, y_max]")
        if len(self.start_jitter) != 2 or min(self.start_jitter) < 0:
            raise ScenarioError("start_jitter", "expected two non-negative sigmas")
        return self


# ---------------------------------------------------------------- builders

def _wall(x0, y0, x1, y1, z_max=2.0, surface=MATTE, z_min=0.0):
    return Segment(float(x0), float(y0), float(x1), float(y1), surface, float(z_min), float(z_max))


def _room(x0, y0, x1, y1, z_max=2.0):
    return [_wall(x0, y0, x1, y0, z_max), _wall(x1, y0, x1, y1, z_max),
            _wall(x1, y1, x0, y1, z_max), _wall(x0, y1, x0, y0, z_max)]


def _param(params: dict, key: str, default, lo=None, hi=None):
    value = params.get(key, default)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ScenarioError(f"params.{key}", f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ScenarioError(f"params.{key}", f"expected a string, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(f"params.{key}", f"expected a number, got {value!r}")
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise ScenarioError(f"params.{key}", f"must lie in [{lo}, {hi}], got {value}")
    return float(value)


def _common(params: dict) -> dict:
    return {
        "ideal_sensor": _param(params, "ideal_sensor", False),
    }


def _policy_overrides(params: dict, **extra) -> dict:
    pol = {"v_max": _param(params, "v_max", 1.0, 0.0, 5.0)}
    pol.update(extra)
    return {"policy": pol}


def wall_brake(params: dict) -> ScenarioConfig:
    """Straight flight at a 1.2 m x 1.3 m panel 3.5 m ahead, steering disabled."""
    distance = _param(params, "distance", 3.5, 0.5, 10.0)
    panel_w = _param(params, "panel_width", 1.2, 0.1, 10.0)
    panel_h = _param(params, "panel_height", 1.3, 0.1, 5.0)
    surface = _param(params, "surface", MATTE)
    if surface not in SURFACE_CLASSES:
        raise ScenarioError("params.surface", f"must be one of {SURFACE_CLASSES}")
    panel = _wall(distance, panel_w / 2, distance, -panel_w / 2, panel_h, surface)
    world = World(segments=(panel,), bounds=(-1.0, -3.0, distance + 1.0, 3.0))
    return ScenarioConfig(
        kind="wall_brake", world=world, duration_s=_param(params, "duration_s", 10.0, 0.1),
        overrides=_policy_overrides(params, steering_enabled=False), params=dict(params), **_common(params),
    )


def dynamic_person(params: dict) -> ScenarioConfig:
    """A 0.5 m wide box steps from the right into the flight path once the drone is 1.5 m away."""
    x_cross = _param(params, "crossing_x", 5.0, 2.0, 20.0)
    speed = _param(params, "person_speed", 1.5, 0.1, 10.0)
    offset = _param(params, "person_offset", 1.0, 0.3, 5.0)
    trigger = _param(params, "trigger_distance", 1.5, 0.2, 10.0)
    width = _param(params, "person_width", 0.5, 0.1, 2.0)
    depth = _param(params, "person_depth", 0.3, 0.1, 2.0)
    end = _param(params, "person_end", 2.0, -5.0, 5.0)
    t_arrive = (offset + end) / speed
    person = MovingObstacle(
        size_x=depth, size_y=width,
        waypoints=((0.0, (x_cross, -offset)), (t_arrive, (x_cross, end))),
        z_min=0.0, z_max=1.8,
        trigger_point=(x_cross - depth / 2, 0.0), trigger_distance=trigger,
    )
    world = World(moving_obstacles=(person,), bounds=(-1.0, -3.0, x_cross + 3.0, 3.0))
    return ScenarioConfig(
        kind="dynamic_person", world=world, duration_s=_param(params, "duration_s", 8.0, 0.1),
        overrides=_policy_overrides(params), params=dict(params), **_common(params),
    )


def pipe(params: dict) -> ScenarioConfig:
    """Two parallel walls ``width`` apart and ``length`` long; the drone starts just before the mouth."""
    width = _param(params, "width", 0.75, 0.15, 5.0)
    length = _param(params, "length", 4.0, 0.5, 20.0)
    height = _param(params, "height", 1.0, 0.1, 5.0)
    standoff = _param(params, "standoff", 0.3, 0.0, 5.0)
    h = width / 2
    walls = (_wall(0.0, h, length, h, height), _wall(0.0, -h, length, -h, height))
    world = World(segments=walls, bounds=(-standoff - 3.0, -3.0, length + 2.0, 3.0))
    start = DroneState(x=-standoff, y=0.0)
    jitter = (_param(params, "jitter_lateral", 0.02, 0.0, 1.0), _param(params, "jitter_yaw_deg", 1.0, 0.0, 45.0))
    return ScenarioConfig(
        kind="pipe", world=world, start=start, duration_s=_param(params, "duration_s", 20.0, 0.1),
        goal=(length + 0.2, -h, length + 2.0, h), start_jitter=jitter,
        overrides=_policy_overrides(params), params=dict(params), **_common(params),
    )


def deadend(params: dict) -> ScenarioConfig:
    """U-shaped corridor closed at the far end; the drone starts outside the mouth facing in."""
    depth = _param(params, "depth", 2.0, 0.5, 20.0)
    width = _param(params, "width", 1.0, 0.3, 5.0)
    standoff = _param(params, "standoff", 1.0, 0.0, 10.0)
    h = width / 2
    walls = (_wall(0.0, h, depth, h), _wall(depth, h, depth, -h), _wall(depth, -h, 0.0, -h))
    world = World(segments=walls, bounds=(-standoff - 3.0, -3.0, depth + 1.0, 3.0))
    start = DroneState(x=-standoff, y=0.0)
    return ScenarioConfig(
        kind="deadend", world=world, start=start, duration_s=_param(params, "duration_s", 25.0, 0.1),
        overrides=_policy_overrides(params), params=dict(params), **_common(params),
    )


def open_room(params: dict) -> ScenarioConfig:
    """Empty square room; the drone starts in the middle."""
    size = _param(params, "size", 6.0, 1.0, 50.0)
    h = size / 2
    world = World(segments=tuple(_room(-h, -h, h, h)), bounds=(-h - 0.5, -h - 0.5, h + 0.5, h + 0.5))
    return ScenarioConfig(
        kind="open_room", world=world, duration_s=_param(params, "duration_s", 30.0, 0.1),
        overrides=_policy_overrides(params), params=dict(params), **_common(params),
    )


# (centre x, centre y, size x, size y, height) in a 6 m x 5 m room
_MAZE_BOXES = (
    (-1.6, 1.0, 0.4, 1.2, 0.7),
    (-0.2, -1.0, 1.4, 0.4, 0.6),
    (1.2, 0.8, 0.4, 1.0, 0.8),
    (1.8, -1.4, 0.8, 0.4, 0.6),
    (-1.8, -1.5, 0.6, 0.6, 0.75),
    (0.2, 1.6, 1.0, 0.3, 0.65),
)


def maze(params: dict) -> ScenarioConfig:
    """Closed room with 0.6-0.8 m high cardboard obstacles and a random take-off point per seed."""
    segs = _room(-3.0, -2.5, 3.0, 2.5)
    for cx, cy, sx, sy, zh in _MAZE_BOXES:
        segs += box_segments(cx, cy, sx, sy, surface=MATTE, z_min=0.0, z_max=zh)
    world = World(segments=tuple(segs), bounds=(-3.5, -3.0, 3.5, 3.0))
    return ScenarioConfig(
        kind="maze", world=world, duration_s=_param(params, "duration_s", 60.0, 0.1),
        random_start=(-2.6, -2.1, 2.6, 2.1),
        overrides=_policy_overrides(params), params=dict(params), **_common(params),
    )


BUILDERS = {
    "wall_brake": wall_brake,
    "dynamic_person": dynamic_person,
    "pipe": pipe,
    "maze": maze,
    "deadend": deadend,
    "open_room": open_room,
}


def make_scenario(kind: str, params: dict | None = None) -> ScenarioConfig:
    if kind not in BUILDERS:
        raise ScenarioError("kind", f"unknown scenario kind {kind!r}; expected one of {sorted(BUILDERS)}")
    params = dict(params or {})
    return BUILDERS[kind](params).validate()


# ---------------------------------------------------------------- JSON

def _segment_to_dict(s: Segment) -> dict:
    return {"x0": s.x0, "y0": s.y0, "x1": s.x1, "y1": s.y1, "surface": s.surface, "z_min": s.z_min, "z_max": s.z_max}


def scenario_to_dict(sc: ScenarioConfig) -> dict:
    w = sc.world
    return {
        "kind": sc.kind,
        "params": sc.params,
        "duration_s": sc.duration_s,
        "ideal_sensor": sc.ideal_sensor,
        "start": {"x": sc.start.x, "y": sc.start.y, "height": sc.start.height, "yaw": sc.start.yaw},
        "start_jitter": list(sc.start_jitter),
        "random_start": list(sc.random_start) if sc.random_start is not None else None,
        "goal": list(sc.goal) if sc.goal is not None else None,
        "world": {
            "bounds": list(w.bounds),
            "segments": [_segment_to_dict(s) for s in w.segments],
            "moving_obstacles": [
                {
                    "size_x": m.size_x, "size_y": m.size_y, "surface": m.surface,
                    "z_min": m.z_min, "z_max": m.z_max,
                    "waypoints": [[t, list(p)] for t, p in m.waypoints],
                    "trigger_point": list(m.trigger_point) if m.trigger_point is not None else None,
                    "trigger_distance": m.trigger_distance,
                }
                for m in w.moving_obstacles
            ],
        },
        "overrides": sc.overrides,
    }


def _get(d: dict, key: str, path: str, required=True, default=None):
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected an object")
    if key not in d:
        if required:
            raise ScenarioError(f"{path}.{key}" if path else key, "missing")
        return default
    return d[key]


def _num(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(path, f"expected a finite number, got {v!r}")
    return float(v)


def _box(v, path):
    if v is None:
        return None
    if not isinstance(v, list) or len(v) != 4:
        raise ScenarioError(path, "expected [x_min, y_min, x_max, y_max]")
    return tuple(_num(x, f"{path}[{i}]") for i, x in enumerate(v))


def scenario_from_dict(data: Any) -> ScenarioConfig:
    """Parse and validate a scenario document; errors name the offending field."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario", "expected an object")
    known = {"kind", "params", "duration_s", "ideal_sensor", "start", "start_jitter", "random_start",
             "goal", "world", "overrides"}
    for key in data:
        if key not in known:
            raise ScenarioError(key, "unknown key")
    kind = _get(data, "kind", "")
    if not isinstance(kind, str):
        raise ScenarioError("kind", "expected a string")
    wd = _get(data, "world", "")
    segs = []
    for i, s in enumerate(_get(wd, "segments", "world", False, [])):
        p = f"world.segments[{i}]"
        try:
            segs.append(Segment(*(_num(_get(s, k, p), f"{p}.{k}") for k in ("x0", "y0", "x1", "y1")),
                                surface=_get(s, "surface", p, False, MATTE),
                                z_min=_num(_get(s, "z_min", p, False, 0.0), f"{p}.z_min"),
                                z_max=_num(_get(s, "z_max", p, False, 2.0), f"{p}.z_max")))
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(p, str(exc)) from None
    movers = []
    for i, m in enumerate(_get(wd, "moving_obstacles", "world", False, [])):
        p = f"world.moving_obstacles[{i}]"
        try:
            wps = tuple((_num(t, f"{p}.waypoints"), (_num(q[0], f"{p}.waypoints"), _num(q[1], f"{p}.waypoints")))
                        for t, q in _get(m, "waypoints", p))
            tp = _get(m, "trigger_point", p, False)
            movers.append(MovingObstacle(
                size_x=_num(_get(m, "size_x", p), f"{p}.size_x"), size_y=_num(_get(m, "size_y", p), f"{p}.size_y"),
                waypoints=wps, surface=_get(m, "surface", p, False, MATTE),
                z_min=_num(_get(m, "z_min", p, False, 0.0), f"{p}.z_min"),
                z_max=_num(_get(m, "z_max", p, False, 1.8), f"{p}.z_max"),
                trigger_point=tuple(tp) if tp is not None else None,
                trigger_distance=_get(m, "trigger_distance", p, False),
            ))
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(p, str(exc)) from None
    try:
        world = World(segments=tuple(segs), moving_obstacles=tuple(movers), bounds=_box(_get(wd, "bounds", "world"), "world.bounds"))
    except ValueError as exc:
        raise ScenarioError("world.bounds", str(exc)) from None
    st = _get(data, "start", "", False, {})
    try:
        start = DroneState(x=_num(st.get("x", 0.0), "start.x"), y=_num(st.get("y", 0.0), "start.y"),
                           height=_num(st.get("height", 0.4), "start.height"), yaw=_num(st.get("yaw", 0.0), "start.yaw"))
    except AttributeError:
        raise ScenarioError("start", "expected an object") from None
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("start.height", str(exc)) from None
    jitter = _get(data, "start_jitter", "", False, [0.0, 0.0])
    if not isinstance(jitter, list) or len(jitter) != 2:
        raise ScenarioError("start_jitter", "expected [lateral_sigma_m, yaw_sigma_deg]")
    ideal = _get(data, "ideal_sensor", "", False, False)
    if not isinstance(ideal, bool):
        raise ScenarioError("ideal_sensor", "expected a boolean")
    overrides = _get(data, "overrides", "", False, {})
    if not isinstance(overrides, dict):
        raise ScenarioError("overrides", "expected an object")
    params = _get(data, "params", "", False, {})
    if not isinstance(params, dict):
        raise ScenarioError("params", "expected an object")
    sc = ScenarioConfig(
        kind=kind, world=world, start=start,
        duration_s=_num(_get(data, "duration_s", "", False, 30.0), "duration_s"),
        goal=_box(_get(data, "goal", "", False), "goal"),
        ideal_sensor=ideal,
        start_jitter=(_num(jitter[0], "start_jitter[0]"), _num(jitter[1], "start_jitter[1]")),
        random_start=_box(_get(data, "random_start", "", False), "random_start"),
        overrides=overrides, params=params,
    )
    return sc.validate()


def sample_start(sc: ScenarioConfig, rng: np.random.Generator) -> DroneState:
    """Start pose for one run: jittered around ``sc.start`` or drawn from ``sc.random_start``."""
    start = sc.start
    if sc.random_start is not None:
        x0, y0, x1, y1 = sc.random_start
        for _ in range(1000):
            x, y = rng.uniform(x0, x1), rng.uniform(y0, y1)
            if clearance(x, y, sc.world.segments, z=start.height) > 0.5:
                yaw = rng.uniform(-math.pi, math.pi)
                return start.moved(x=float(x), y=float(y), yaw=float(yaw))
        raise ScenarioError("random_start", "no free take-off point found")
    lat, yaw_deg = sc.start_jitter
    if lat == 0.0 and yaw_deg == 0.0:
        return start
    dy, dyaw = rng.standard_normal(2)
    return start.moved(y=start.y + float(lat * dy), yaw=start.yaw + math.radians(yaw_deg) * float(dyaw))
