import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tofnav.config import RunConfig
from tofnav.policy import CRUISE, Command
from tofnav.sim import (
    ScenarioError, SimConfig, check_collision, compute_metrics, make_scenario, run_scenario, scenario_from_dict,
    scenario_to_dict, step_physics,
)
from tofnav.sim.runner import TRACE_HEADER, Tick, Trace, resolve_config
from tofnav.sim.scenarios import BUILDERS
from tofnav.world import DroneState, MovingObstacle, Segment, World, clearance, normalize_angle

CFG = SimConfig()
HOLD = Command(0.0, 0.0, 0.0, CRUISE)


# ------------------------------------------------------------- physics

def test_step_physics_examples():
    s = step_physics(DroneState(), Command(1.0, 0.0, 0.0, CRUISE), 1 / 15)
    assert s.v_forward == pytest.approx(0.1)
    s = step_physics(DroneState(v_forward=2.0), HOLD, 0.1)
    assert s.v_forward == pytest.approx(0.0, abs=1e-12)
    s0 = DroneState(x=1.0, y=2.0, yaw=0.3)
    s = step_physics(s0, HOLD, 0.5)
    assert (s.x, s.y, s.height, s.yaw, s.v_forward) == (s0.x, s0.y, s0.height, s0.yaw, 0.0)
    assert s.time_s == pytest.approx(0.5)


def test_step_physics_rejects_bad_dt():
    for dt in (0.0, -0.1):
        with pytest.raises(ValueError):
            step_physics(DroneState(), HOLD, dt)


@settings(max_examples=300)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2), st.floats(-2, 2), st.floats(1e-3, 0.2))
def test_acceleration_clamp_and_no_overshoot(v0, v_cmd, w0, w_cmd, dt):
    cfg = SimConfig(physics_substeps=1)
    s = step_physics(DroneState(v_forward=v0, yaw_rate=w0), Command(v_cmd, w_cmd, 0.0, CRUISE), dt, cfg)
    dv = s.v_forward - v0
    assert cfg.a_min * dt - 1e-12 <= dv <= cfg.a_max * dt + 1e-12
    assert min(v0, v_cmd) - 1e-12 <= s.v_forward <= max(v0, v_cmd) + 1e-12
    assert abs(s.yaw_rate - w0) <= cfg.yaw_accel_limit * dt + 1e-12
    assert min(w0, w_cmd) - 1e-12 <= s.yaw_rate <= max(w0, w_cmd) + 1e-12


def test_climb_rate_is_clamped_and_height_non_negative():
    s = step_physics(DroneState(height=0.4), Command(0.0, 0.0, 3.0, CRUISE), 1.0)
    s = step_physics(s, Command(0.0, 0.0, 3.0, CRUISE), 1.0)
    assert s.v_vertical == 0.5
    s = step_physics(DroneState(height=0.1), Command(0.0, 0.0, -0.5, CRUISE), 1.0)
    s = step_physics(s, Command(0.0, 0.0, -0.5, CRUISE), 1.0)
    assert s.height == 0.0


def test_straight_flight_integrates_heading():
    s = DroneState(yaw=math.pi / 2, v_forward=1.0)
    for _ in range(15):
        s = step_physics(s, Command(1.0, 0.0, 0.0, CRUISE), 1 / 15)
    assert s.x == pytest.approx(0.0, abs=1e-12) and s.y == pytest.approx(1.0)


def test_normalize_angle_range():
    for a in (-10.0, -math.pi, 0.0, math.pi, 3 * math.pi, 7.0):
        b = normalize_angle(a)
        assert -math.pi < b <= math.pi
        assert math.isclose(math.cos(a), math.cos(b), abs_tol=1e-12)


def test_check_collision_examples():
    w = World(segments=(Segment(1.0, -1, 1.0, 1),))
    assert not check_collision(DroneState(x=0.0), w)
    assert check_collision(DroneState(x=0.97), w)
    low = World(segments=(Segment(1.0, -1, 1.0, 1, z_min=0.6, z_max=0.8),))
    assert not check_collision(DroneState(x=0.97, height=0.4), low)
    assert check_collision(DroneState(x=0.97, height=0.7), low)


# ----------------------------------------------------------- scenarios

def test_scenario_examples():
    p = make_scenario("pipe", {"width": 0.55})
    ys = sorted({s.y0 for s in p.world.segments})
    assert ys[1] - ys[0] == pytest.approx(0.55)
    assert all(s.length == pytest.approx(4.0) for s in p.world.segments)

    w = make_scenario("wall_brake", {"v_max": 2.5})
    (panel,) = w.world.segments
    assert panel.x0 - w.start.x == pytest.approx(3.5)
    assert panel.length == pytest.approx(1.2) and panel.z_max - panel.z_min == pytest.approx(1.3)
    assert w.overrides["policy"]["v_max"] == 2.5

    d = make_scenario("deadend", {"depth": 2.0, "width": 1.0})
    assert len(d.world.segments) == 3

    person = make_scenario("dynamic_person").world.moving_obstacles[0]
    assert person.size_y == pytest.approx(0.5) and person.trigger_distance == pytest.approx(1.5)

    m = make_scenario("maze")
    heights = {s.z_max for s in m.world.segments if s.z_max < 1.0}
    assert heights and min(heights) >= 0.6 and max(heights) <= 0.8


def test_scenario_param_errors_name_the_field():
    with pytest.raises(ScenarioError) as e:
        make_scenario("pipe", {"width": "wide"})
    assert e.value.field == "params.width"
    with pytest.raises(ScenarioError) as e:
        make_scenario("pipe", {"width": -1})
    assert "params.width" in str(e.value)
    with pytest.raises(ScenarioError):
        make_scenario("volcano")


@pytest.mark.parametrize("kind", sorted(BUILDERS))
def test_scenario_json_round_trip(kind):
    sc = make_scenario(kind)
    doc = json.loads(json.dumps(scenario_to_dict(sc)))
    back = scenario_from_dict(doc)
    assert scenario_to_dict(back) == scenario_to_dict(sc)
    assert back.world == sc.world


def test_scenario_from_dict_errors():
    doc = scenario_to_dict(make_scenario("pipe"))
    doc["world"]["segments"][0]["x0"] = "zero"
    with pytest.raises(ScenarioError) as e:
        scenario_from_dict(doc)
    assert "world.segments[0]" in str(e.value)
    doc = scenario_to_dict(make_scenario("pipe"))
    doc["colour"] = "red"
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)


def test_moving_obstacle_schedule_and_trigger():
    m = MovingObstacle(0.2, 0.2, ((0.0, (0.0, 0.0)), (2.0, (2.0, 0.0))), trigger_point=(0, 0), trigger_distance=1.0)
    assert m.position_at(-1.0) == (0.0, 0.0)
    assert m.position_at(1.0) == pytest.approx((1.0, 0.0))
    assert m.position_at(5.0) == (2.0, 0.0)
    w = World(moving_obstacles=(m,))
    assert w.snapshot(10.0).segments[0].x0 == pytest.approx(-0.1)  # not yet fired
    assert w.snapshot(10.0, {0: 9.0}).segments[0].x0 == pytest.approx(0.9)
    with pytest.raises(ValueError):
        MovingObstacle(0.2, 0.2, ((1.0, (0, 0)), (1.0, (1, 1))))


# -------------------------------------------------------------- runner

def test_run_is_deterministic():
    sc = make_scenario("maze", {"duration_s": 8.0})
    t1, m1 = run_scenario(sc, 11)
    t2, m2 = run_scenario(sc, 11)
    assert t1.to_csv() == t2.to_csv() and m1 == m2
    t3, _ = run_scenario(sc, 12)
    assert t3.to_csv() != t1.to_csv()


def test_trace_csv_layout():
    trace, _ = run_scenario(make_scenario("wall_brake", {"duration_s": 1.0}), 0)
    lines = trace.to_csv().splitlines()
    assert lines[0] == ",".join(TRACE_HEADER)
    assert len(trace.ticks) == 15 and len(lines) == 16
    assert lines[1].split(",")[-1] == "-1.000"


def test_wall_brake_ideal_stops_short():
    _, m = run_scenario(make_scenario("wall_brake", {"ideal_sensor": True}), 42)
    assert not m.crashed and 0.15 <= m.final_stop_distance_m <= 0.6


def test_open_room_cruises_without_crash():
    _, m = run_scenario(make_scenario("open_room", {"duration_s": 15.0}), 1)
    assert not m.crashed and m.min_clearance_m > 0 and m.distance_m > 3.0


def test_slanted_mirror_crashes_where_matte_is_avoided():
    from dataclasses import replace
    outcomes = {}
    for surface in ("matte", "reflective"):
        panel = Segment(1.0, -1.0, 7.0, 2.0, surface, 0.0, 2.0)
        sc = replace(make_scenario("open_room", {"duration_s": 10.0}),
                     world=World(segments=(panel,), bounds=(-1, -4, 8, 4)), ideal_sensor=True)
        outcomes[surface] = run_scenario(sc, 0)[1].crashed
    assert outcomes == {"matte": False, "reflective": True}


def test_battery_budget_lands():
    sc = make_scenario("open_room", {"duration_s": 20.0})
    cfg = RunConfig().merged({"policy": {"battery_budget_s": 2.0}})
    trace, m = run_scenario(sc, 0, cfg)
    assert m.terminal_cause == "landed" and not m.crashed
    assert trace.ticks[-1].command.mode == "Land"


def test_resolve_config_applies_overrides():
    sc = make_scenario("wall_brake", {"v_max": 2.0, "ideal_sensor": True})
    cfg = resolve_config(sc, RunConfig().merged({"policy": {"v_max": 0.3, "d_long": 1.5}}))
    assert cfg.policy.v_max == 2.0 and cfg.policy.d_long == 1.5 and not cfg.policy.steering_enabled
    assert cfg.noise.sigma_grid.max() == 0.0


# ------------------------------------------------------------- metrics

def _trace(states):
    t = Trace(ticks=[Tick(s, "", HOLD, -1.0) for s in states[:-1]], final_state=states[-1])
    return t


def test_metrics_examples():
    w = World(segments=(Segment(20.0, -1, 20.0, 1),), bounds=(-30, -30, 30, 30))
    still = _trace([DroneState(time_s=k / 15) for k in range(151)])
    m = compute_metrics(still, w)
    assert m.distance_m == 0.0 and m.flight_time_s == pytest.approx(10.0)
    straight = _trace([DroneState(x=k / 15, v_forward=1.0, time_s=k / 15) for k in range(151)])
    m = compute_metrics(straight, w)
    assert m.distance_m == pytest.approx(10.0)
    assert m.final_stop_distance_m is None
    stop = _trace([DroneState(x=19.0, time_s=0.0), DroneState(x=19.5, time_s=1.0)])
    m = compute_metrics(stop, w)
    assert m.final_stop_distance_m == pytest.approx(clearance(19.5, 0.0, w.segments) - CFG.collision_radius)
    with pytest.raises(ValueError):
        compute_metrics(Trace(), w)
