import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import frame_from
from tofnav.dataset import (
    COMMAND_HEADER, STATE_HEADER, TOF_HEADER, LogBundle, LogError, LogValidationError, StateSample,
    bundle_from_trace, read_log, replay, write_log,
)
from tofnav.policy import CRUISE, MODES, STOP_STEER, Command, PolicyConfig
from tofnav.sensor import DepthFrame
from tofnav.sim import make_scenario, run_scenario


def simple_bundle(n=3, commands=True):
    rng = np.random.default_rng(n)
    frames = []
    for k in range(n):
        d = rng.uniform(1.0, 4000.0, (8, 8))
        frames.append(frame_from(d, rng.random((8, 8)) < 0.8, ts=k * 67))
    states = [StateSample(k * 50, x=0.1 * k, z=0.4) for k in range(n)]
    cmds = [(k * 67, Command(0.5, -0.7, 0.0, CRUISE)) for k in range(n)] if commands else None
    return LogBundle(frames, states, cmds, {"name": "unit"})


def test_round_trip(tmp_path):
    b = simple_bundle()
    write_log(b, tmp_path)
    assert read_log(tmp_path) == b


def test_no_commands_means_no_file(tmp_path):
    write_log(simple_bundle(), tmp_path)
    write_log(simple_bundle(commands=False), tmp_path)
    assert not (tmp_path / "commands.csv").exists()
    assert read_log(tmp_path).commands is None


def test_invalid_pixel_uses_sentinel(tmp_path):
    b = simple_bundle(1)
    write_log(b, tmp_path)
    header, row = (tmp_path / "tof.csv").read_text().splitlines()
    assert header == ",".join(TOF_HEADER)
    cells = row.split(",")[1:]
    flags = b.tof[0].valid.ravel()
    assert all((c == "-1") == (not ok) for c, ok in zip(cells, flags))
    assert (read_log(tmp_path).tof[0].valid == b.tof[0].valid).all()


def test_headers(tmp_path):
    write_log(simple_bundle(), tmp_path)
    assert (tmp_path / "state.csv").read_text().splitlines()[0] == ",".join(STATE_HEADER)
    assert (tmp_path / "commands.csv").read_text().splitlines()[0] == ",".join(COMMAND_HEADER)
    assert '"schema_version": 1' in (tmp_path / "meta.json").read_text()


def _rewrite(path, line_no, new):
    lines = path.read_text().splitlines()
    lines[line_no - 1] = new
    path.write_text("\n".join(lines) + "\n")


def test_short_row_is_located(tmp_path):
    write_log(simple_bundle(), tmp_path)
    tof = tmp_path / "tof.csv"
    row = tof.read_text().splitlines()[2]
    _rewrite(tof, 3, ",".join(row.split(",")[:-1]))
    with pytest.raises(LogError) as e:
        read_log(tmp_path)
    assert e.value.line == 3 and "tof.csv" in e.value.path
    assert "got 64" in str(e.value)


def test_out_of_range_distance_is_rejected(tmp_path):
    write_log(simple_bundle(), tmp_path)
    tof = tmp_path / "tof.csv"
    row = tof.read_text().splitlines()[1].split(",")
    row[5] = "4500"
    _rewrite(tof, 2, ",".join(row))
    with pytest.raises(LogValidationError) as e:
        read_log(tmp_path)
    assert e.value.line == 2


def test_non_monotone_timestamps_are_rejected(tmp_path):
    write_log(simple_bundle(), tmp_path)
    state = tmp_path / "state.csv"
    row = state.read_text().splitlines()[3].split(",")
    row[0] = "0"
    _rewrite(state, 4, ",".join(row))
    with pytest.raises(LogValidationError) as e:
        read_log(tmp_path)
    assert e.value.line == 4 and "state.csv" in e.value.path


@pytest.mark.parametrize("target,line,bad", [
    ("tof.csv", 1, "time,d00"),
    ("state.csv", 2, "abc,0,0,0,0,0,0,0,0,0"),
    ("state.csv", 2, "0,nan,0,0,0,0,0,0,0,0"),
    ("commands.csv", 2, "0,0.1,0.2,0.0,Hover"),
])
def test_malformed_content_is_located(tmp_path, target, line, bad):
    write_log(simple_bundle(), tmp_path)
    _rewrite(tmp_path / target, line, bad)
    with pytest.raises(LogError) as e:
        read_log(tmp_path)
    assert e.value.line == line and target in e.value.path


def test_missing_file(tmp_path):
    with pytest.raises(LogError):
        read_log(tmp_path)


frames_st = st.lists(
    st.tuples(
        st.lists(st.floats(0.001, 4000.0), min_size=64, max_size=64),
        st.lists(st.booleans(), min_size=64, max_size=64),
    ),
    max_size=4,
)
finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(frames_st, st.lists(st.tuples(*[finite] * 9), max_size=4),
       st.one_of(st.none(), st.lists(st.tuples(finite, finite, finite, st.sampled_from(MODES)), max_size=4)),
       st.dictionaries(st.text(min_size=1, max_size=8), st.one_of(st.integers(), st.text(max_size=8)), max_size=3),
       st.integers(0, 10**9))
def test_round_trip_property(tmp_path, frames, states, cmds, meta, t0):
    meta.pop("schema_version", None)
    tof = [frame_from(np.array(d).reshape(8, 8), np.array(v).reshape(8, 8), ts=t0 + 10 * k)
           for k, (d, v) in enumerate(frames)]
    state = [StateSample(t0 + 7 * k, *vals) for k, vals in enumerate(states)]
    commands = None if cmds is None else [(t0 + 3 * k, Command(*c)) for k, c in enumerate(cmds)]
    b = LogBundle(tof, state, commands, meta).validate()
    write_log(b, tmp_path)
    assert read_log(tmp_path) == b


# ---------------------------------------------------------------- replay

def test_replay_examples():
    empty = LogBundle([DepthFrame.empty(k * 67) for k in range(5)], [])
    cmds = replay(empty, cfg=PolicyConfig(v_max=1.3))
    assert len(cmds) == 5
    assert all(c.mode == CRUISE and c.v_forward == 1.3 for _, c in cmds)

    d = np.full((8, 8), 3000.0)
    d[1:7, 2:6] = 300.0
    wall = LogBundle([frame_from(d, ts=100)], [])
    assert replay(wall)[0][1].mode == STOP_STEER

    b = simple_bundle(6)
    assert replay(b) == replay(b)


def test_replay_uses_state_at_or_before_frame():
    frames = [DepthFrame.empty(100), DepthFrame.empty(200)]
    states = [StateSample(150, z=0.2), StateSample(250, z=0.9)]
    cmds = replay(LogBundle(frames, states))
    assert cmds[0][1].v_vertical == pytest.approx(0.0)  # no state yet: hover at cruise height
    assert cmds[1][1].v_vertical == pytest.approx(0.2)


@pytest.mark.parametrize("kind", ["deadend", "dynamic_person", "pipe"])
def test_replay_of_simulated_flight_reproduces_its_commands(tmp_path, kind):
    trace, _ = run_scenario(make_scenario(kind), 5, record_frames=True)
    b = bundle_from_trace(trace, {"kind": kind})
    write_log(b, tmp_path)
    loaded = read_log(tmp_path)
    assert replay(loaded) == b.commands


def test_bundle_from_trace_requires_frames():
    trace, _ = run_scenario(make_scenario("wall_brake", {"duration_s": 0.5}), 0)
    with pytest.raises(ValueError):
        bundle_from_trace(trace)
