"""Planar world geometry with height spans, and the drone state shared by sim and policy.

Walls are vertical line segments extruded over ``[z_min, z_max]``. Moving
obstacles are axis-aligned boxes that follow a piecewise-linear waypoint
schedule; a schedule may be armed by a trigger (the drone coming within a
given distance of a point), in which case its times are relative to the
trigger instant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

MATTE = "matte"
REFLECTIVE = "reflective"
SURFACE_CLASSES = (MATTE, REFLECTIVE)


@dataclass(frozen=True)
class Segment:
    x0: float
    y0: float
    x1: float
    y1: float
    surface: str = MATTE
    z_min: float = 0.0
    z_max: float = 2.0

    def __post_init__(self):
        if self.surface not in SURFACE_CLASSES:
            raise ValueError(f"surface must be one of {SURFACE_CLASSES}, got {self.surface!r}")
        vals = (self.x0, self.y0, self.x1, self.y1, self.z_min, self.z_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("segment geometry must be finite")
        if self.z_max < self.z_min:
            raise ValueError("z_max must be >= z_min")

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)


@dataclass(frozen=True)
class MovingObstacle:
    """Box footprint ``size_x`` x ``size_y`` centred on a scheduled position."""

    size_x: float
    size_y: float
    waypoints: tuple  # ((time_s, (x, y)), ...)
    surface: str = MATTE
    z_min: float = 0.0
    z_max: float = 1.8
    trigger_point: Optional[tuple] = None
    trigger_distance: Optional[float] = None

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("moving obstacle needs at least one waypoint")
        times = [float(t) for t, _ in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        if self.size_x <= 0 or self.size_y <= 0:
            raise ValueError("moving obstacle size must be positive")
        if (self.trigger_point is None) != (self.trigger_distance is None):
            raise ValueError("trigger_point and trigger_distance go together")

    @property
    def triggered(self) -> bool:
        return self.trigger_point is not None

    def position_at(self, t: float) -> tuple:
        """Linear interpolation along the schedule, held at both ends."""
        wps = self.waypoints
        if t <= wps[0][0]:
            return tuple(wps[0][1])
        for (t0, p0), (t1, p1) in zip(wps, wps[1:]):
            if t <= t1:
                a = (t - t0) / (t1 - t0)
                return (p0[0] + a * (p1[0] - p0[0]), p0[1] + a * (p1[1] - p0[1]))
        return tuple(wps[-1][1])

    def segments_at(self, t: float) -> list:
        cx, cy = self.position_at(t)
        hx, hy = 0.5 * self.size_x, 0.5 * self.size_y
        corners = [(cx - hx, cy - hy), (cx + hx, cy - hy), (cx + hx, cy + hy), (cx - hx, cy + hy)]
        return [
            Segment(*corners[i], *corners[(i + 1) % 4], surface=self.surface, z_min=self.z_min, z_max=self.z_max)
            for i in range(4)
        ]


@dataclass(frozen=True)
class World:
    segments: tuple = ()
    moving_obstacles: tuple = ()
    bounds: tuple = (-10.0, -10.0, 10.0, 10.0)  # (x_min, y_min, x_max, y_max)

    def __post_init__(self):
        x0, y0, x1, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError("bounds must be a non-empty rectangle")
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "moving_obstacles", tuple(self.moving_obstacles))

    def inside(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.bounds
        return x0 <= x <= x1 and y0 <= y <= y1

    def snapshot(self, t: float, trigger_times: Optional[dict] = None) -> "World":
        """Static world at time ``t`` with every moving obstacle frozen into segments.

        ``trigger_times`` maps obstacle index to the absolute trigger instant;
        a triggered obstacle that has not fired yet stays at its first waypoint.
        """
        trigger_times = trigger_times or {}
        segs = list(self.segments)
        for i, obs in enumerate(self.moving_obstacles):
            if obs.triggered:
                t0 = trigger_times.get(i)
                local_t = obs.waypoints[0][0] if t0 is None else t - t0
            else:
                local_t = t
            segs.extend(obs.segments_at(local_t))
        return World(segments=tuple(segs), bounds=self.bounds)

    def segment_array(self) -> np.ndarray:
        """(N, 6) array of x0, y0, x1, y1, z_min, z_max for static segments."""
        if not self.segments:
            return np.zeros((0, 6))
        return np.array([(s.x0, s.y0, s.x1, s.y1, s.z_min, s.z_max) for s in self.segments], dtype=float)


def box_segments(cx: float, cy: float, size_x: float, size_y: float, **kw) -> list:
    hx, hy = 0.5 * size_x, 0.5 * size_y
    c = [(cx - hx, cy - hy), (cx + hx, cy - hy), (cx + hx, cy + hy), (cx - hx, cy + hy)]
    return [Segment(*c[i], *c[(i + 1) % 4], **kw) for i in range(4)]


def normalize_angle(a: float) -> float:
    """Wrap to (-pi, pi]. Angles already in range are returned unchanged."""
    if -math.pi < a <= math.pi:
        return a
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class DroneState:
    x: float = 0.0
    y: float = 0.0
    height: float = 0.4
    yaw: float = 0.0
    v_forward: float = 0.0
    v_vertical: float = 0.0
    time_s: float = 0.0
    yaw_rate: float = 0.0

    def __post_init__(self):
        if self.height < 0:
            raise ValueError("height must be >= 0")

    def moved(self, **changes) -> "DroneState":
        return replace(self, **changes)


def point_segment_distance(px: float, py: float, seg: Segment) -> float:
    dx, dy = seg.x1 - seg.x0, seg.y1 - seg.y0
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(px - seg.x0, py - seg.y0)
    u = ((px - seg.x0) * dx + (py - seg.y0) * dy) / L2
    u = min(1.0, max(0.0, u))
    return math.hypot(px - (seg.x0 + u * dx), py - (seg.y0 + u * dy))


def clearance(px: float, py: float, segments: Sequence[Segment], z: Optional[float] = None, z_tol: float = 0.02) -> float:
    """Horizontal distance to the nearest segment (optionally only those spanning height ``z``)."""
    best = math.inf
    for s in segments:
        if z is not None and (s.z_max < z - z_tol or s.z_min > z + z_tol):
            continue
        d = point_segment_distance(px, py, s)
        if d < best:
            best = d
    return best
