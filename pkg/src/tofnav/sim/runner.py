"""Closed-loop scenario runner, trace recording and run metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from ..config import RunConfig
from ..perception import group, threshold
from ..policy import LAND, TURN_AROUND, Command, DeadEndHistory, decide_full
from ..sensor import NoiseConfig, make_stream, sense
from ..world import DroneState, World, clearance
from .physics import check_collision, substep
from .scenarios import ScenarioConfig, sample_start

CRASH = "crash"
LANDED = "landed"
TIMEOUT = "timeout"
OUT_OF_BOUNDS = "out_of_bounds"
GOAL = "goal"

LANDED_HEIGHT = 0.02  # m
STOPPED_SPEED = 0.05  # m/s

TRACE_HEADER = ("time_s", "x", "y", "height", "yaw", "v_forward", "yaw_rate", "v_vertical", "mode",
                "min_group_distance_mm")


@dataclass(frozen=True)
class Tick:
    state: DroneState
    frame_digest: str
    command: Command
    min_group_distance_mm: float  # -1 when no group


@dataclass
class Trace:
    ticks: list = field(default_factory=list)
    final_state: Optional[DroneState] = None
    terminal_cause: str = TIMEOUT
    crash_position: Optional[tuple] = None
    trigger_times: dict = field(default_factory=dict)
    frames: Optional[list] = None  # DepthFrames, only when recording

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for t in self.ticks:
            s, c = t.state, t.command
            w.writerow([f"{s.time_s:.4f}", f"{s.x:.6f}", f"{s.y:.6f}", f"{s.height:.6f}", f"{s.yaw:.6f}",
                        f"{c.v_forward:.6f}", f"{c.yaw_rate:.6f}", f"{c.v_vertical:.6f}", c.mode,
                        f"{t.min_group_distance_mm:.3f}"])
        return buf.getvalue()


@dataclass
class RunMetrics:
    crashed: bool
    crash_position: Optional[list]
    flight_time_s: float
    distance_m: float
    min_clearance_m: float
    final_stop_distance_m: Optional[float]
    turnarounds: int
    terminal_cause: str
    reached_goal: bool

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_config(scenario: ScenarioConfig, base: RunConfig | None = None) -> RunConfig:
    """Base config with the scenario's overrides applied, and the ideal sensor if requested."""
    cfg = (base or RunConfig()).merged(scenario.overrides)
    if scenario.ideal_sensor:
        cfg = RunConfig(cfg.sensor, NoiseConfig.ideal(cfg.sensor.max_range_mm / 1000.0,
                                                     reflectivity_cutoff_deg=cfg.noise.reflectivity_cutoff_deg,
                                                     rng_seed=cfg.noise.rng_seed),
                        cfg.perception, cfg.policy, cfg.sim)
    return cfg


def _update_triggers(world: World, state: DroneState, t: float, fired: dict) -> None:
    for i, obs in enumerate(world.moving_obstacles):
        if obs.triggered and i not in fired:
            px, py = obs.trigger_point
            if math.hypot(state.x - px, state.y - py) <= obs.trigger_distance:
                fired[i] = t


def _in_box(box, x, y) -> bool:
    return box is not None and box[0] <= x <= box[2] and box[1] <= y <= box[3]


def run_scenario(scenario: ScenarioConfig, seed: int, config: RunConfig | None = None,
                 record_frames: bool = False) -> tuple:
    """Fly one scenario; returns ``(Trace, RunMetrics)``. Deterministic in ``(scenario, seed, config)``.

    With ``record_frames`` the sensed frames are kept in ``trace.frames``.
    """
    scenario.validate()
    cfg = resolve_config(scenario, config)
    sim, pol = cfg.sim, cfg.policy
    noise_rng = make_stream(seed, "sensor")
    state = sample_start(scenario, make_stream(seed, "start")).moved(time_s=0.0)
    world = scenario.world
    dt = 1.0 / sim.control_rate_hz
    h = dt / sim.physics_substeps
    has_movers = bool(world.moving_obstacles)
    static_segments = world.segments

    trace = Trace(frames=[] if record_frames else None)
    fired = trace.trigger_times
    history = DeadEndHistory()
    k = 0
    while True:
        t = k * dt
        state = state.moved(time_s=t)
        if t >= scenario.duration_s - 1e-9:
            trace.terminal_cause = TIMEOUT
            break
        if not world.inside(state.x, state.y):
            trace.terminal_cause = OUT_OF_BOUNDS
            break
        if _in_box(scenario.goal, state.x, state.y):
            trace.terminal_cause = GOAL
            break
        _update_triggers(world, state, t, fired)
        snap = world.snapshot(t, fired) if has_movers else world
        ts_ms = int(round(t * 1000.0))
        frame = sense(snap, state, cfg.sensor, cfg.noise, noise_rng, ts_ms)
        dec = decide_full(frame, state, history, t, pol, cfg.perception, cfg.sensor)
        history = dec.history
        cmd = dec.command
        dmin = dec.groups[0].min_distance_mm if dec.groups else -1.0
        trace.ticks.append(Tick(state, frame.digest(), cmd, dmin))
        if record_frames:
            trace.frames.append(frame)

        if cmd.mode == LAND and state.height <= LANDED_HEIGHT:
            trace.terminal_cause = LANDED
            break

        crashed = False
        for j in range(sim.physics_substeps):
            state = substep(state, cmd, h, sim)
            ts = t + (j + 1) * h
            snap_j = world.snapshot(ts, fired) if has_movers else world
            if check_collision(state, snap_j, sim):
                crashed = True
                break
        k += 1
        if crashed:
            trace.terminal_cause = CRASH
            trace.crash_position = [state.x, state.y]
            state = state.moved(time_s=k * dt)
            break
    trace.final_state = state
    return trace, compute_metrics(trace, world, sim.collision_radius)


def compute_metrics(trace: Trace, world: World, collision_radius: float = 0.05) -> RunMetrics:
    if not trace.ticks:
        raise ValueError("cannot compute metrics of an empty trace")
    states = [t.state for t in trace.ticks]
    if trace.final_state is not None:
        states.append(trace.final_state)
    dist = sum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(states, states[1:]))

    def clear(s):
        snap = world.snapshot(s.time_s, trace.trigger_times) if world.moving_obstacles else world
        return max(0.0, clearance(s.x, s.y, snap.segments, z=s.height) - collision_radius)

    clearances = [clear(s) for s in states]
    min_clear = min(clearances)
    crashed = trace.terminal_cause == CRASH
    if crashed:
        min_clear = 0.0
    last = states[-1]
    stop = None
    if not crashed and abs(last.v_forward) < STOPPED_SPEED and math.isfinite(clearances[-1]):
        stop = clearances[-1]
    turnarounds = 0
    prev = None
    for t in trace.ticks:
        if t.command.mode == TURN_AROUND and prev != TURN_AROUND:
            turnarounds += 1
        prev = t.command.mode
    return RunMetrics(
        crashed=crashed,
        crash_position=trace.crash_position,
        flight_time_s=last.time_s - states[0].time_s,
        distance_m=dist,
        min_clearance_m=min_clear if math.isfinite(min_clear) else -1.0,
        final_stop_distance_m=stop,
        turnarounds=turnarounds,
        terminal_cause=trace.terminal_cause,
        reached_goal=trace.terminal_cause == GOAL,
    )
