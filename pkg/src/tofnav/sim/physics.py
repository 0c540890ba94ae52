"""Unicycle-plus-height kinematics with acceleration limits, and collision checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..policy import Command
from ..world import DroneState, World, normalize_angle, point_segment_distance

MAX_CLIMB_RATE = 0.5  # m/s
HEIGHT_TOLERANCE = 0.02  # m, vertical slack when testing height-span overlap


@dataclass(frozen=True)
class SimConfig:
    control_rate_hz: float = 15.0
    physics_substeps: int = 10
    a_max: float = 1.5
    a_min: float = -20.0
    yaw_accel_limit: float = 8.0
    collision_radius: float = 0.05
    duration_s: float = 30.0

    def __post_init__(self):
        if self.control_rate_hz <= 0:
            raise ValueError("control_rate_hz must be > 0")
        if self.physics_substeps < 1:
            raise ValueError("physics_substeps must be >= 1")
        if not self.a_min < 0 < self.a_max:
            raise ValueError("need a_min < 0 < a_max")
        if self.yaw_accel_limit <= 0 or self.collision_radius <= 0 or self.duration_s <= 0:
            raise ValueError("yaw_accel_limit, collision_radius and duration_s must be > 0")


def _approach(current: float, target: float, lo: float, hi: float) -> float:
    return current + min(hi, max(lo, target - current))


def substep(state: DroneState, cmd: Command, h: float, cfg: SimConfig) -> DroneState:
    """One explicit Euler step of length ``h``."""
    x = state.x + state.v_forward * math.cos(state.yaw) * h
    y = state.y + state.v_forward * math.sin(state.yaw) * h
    yaw = normalize_angle(state.yaw + state.yaw_rate * h)
    height = max(0.0, state.height + state.v_vertical * h)

    v = _approach(state.v_forward, cmd.v_forward, cfg.a_min * h, cfg.a_max * h)
    dw = cfg.yaw_accel_limit * h
    w = _approach(state.yaw_rate, cmd.yaw_rate, -dw, dw)
    vz = min(MAX_CLIMB_RATE, max(-MAX_CLIMB_RATE, cmd.v_vertical))
    return DroneState(x=x, y=y, height=height, yaw=yaw, v_forward=v, v_vertical=vz,
                      time_s=state.time_s + h, yaw_rate=w)


def step_physics(state: DroneState, cmd: Command, dt: float, cfg: SimConfig = SimConfig()) -> DroneState:
    """Advance ``dt`` seconds under a held command, in ``cfg.physics_substeps`` substeps."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    h = dt / cfg.physics_substeps
    for _ in range(cfg.physics_substeps):
        state = substep(state, cmd, h, cfg)
    return state


def check_collision(state: DroneState, world: World, cfg: SimConfig = SimConfig()) -> bool:
    """True if the drone disc touches any surface spanning its height.

    ``world`` must be a snapshot (moving obstacles frozen into segments).
    """
    z = state.height
    r = cfg.collision_radius
    for s in world.segments:
        if s.z_max < z - HEIGHT_TOLERANCE or s.z_min > z + HEIGHT_TOLERANCE:
            continue
        if point_segment_distance(state.x, state.y, s) < r:
            return True
    return False
