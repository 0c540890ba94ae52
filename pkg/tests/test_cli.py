import csv
import json

import numpy as np
import pytest

from tofnav.cli import main, parse_distances
from tofnav.config import ConfigError, RunConfig, load_run_config
from tofnav.dataset import LogBundle, write_log
from tofnav.sensor import DepthFrame


def run(*args):
    return main([str(a) for a in args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def wall_json(tmp_path):
    path = tmp_path / "wall.json"
    assert run("scenario", "gen", "wall_brake", "--param", "ideal_sensor=true", "-o", path) == 0
    return path


# --------------------------------------------------------------- config

def test_config_round_trip_and_errors(tmp_path):
    cfg = RunConfig().merged({"policy": {"v_max": 2.0, "danger_cols": [3, 4]}, "sim": {"duration_s": 5}})
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    for bad, field in [
        ({"policy": {"d_fear": "x"}}, "policy.d_fear"),
        ({"policy": {"speed": 1}}, "policy.speed"),
        ({"weather": {}}, "weather"),
        ({"sim": {"control_rate_hz": 30}}, "sim.control_rate_hz"),
        ({"noise": {"bias_grid": [[0, 1]]}}, "noise.bias_grid"),
        ({"perception": {"connectivity": 6}}, "perception.connectivity"),
    ]:
        with pytest.raises(ConfigError) as e:
            RunConfig.from_dict(bad)
        assert e.value.field == field
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_run_config(p)


# ------------------------------------------------------------- simulate

def test_simulate_wall_brake(tmp_path, wall_json):
    out = tmp_path / "run"
    assert run("simulate", wall_json, "--v-max", "1.0", "--seed", "42", "--out", out) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["crashed"] is False
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["config"]["policy"]["v_max"] == 1.0 and resolved["seed"] == 42
    assert set(resolved["config"]) == {"sensor", "noise", "perception", "policy", "sim"}
    assert read_csv(out / "trace.csv")[0][0] == "time_s"


def test_malformed_config_names_field(tmp_path, wall_json, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"policy": {"d_fear": "close"}}))
    assert run("simulate", wall_json, "--config", cfg, "--out", tmp_path / "o") == 1
    assert "policy.d_fear" in capsys.readouterr().err
    cfg.write_text("{oops")
    assert run("simulate", wall_json, "--config", cfg, "--out", tmp_path / "o") == 1


def test_bad_scenario_and_usage(tmp_path, capsys):
    bad = tmp_path / "s.json"
    bad.write_text(json.dumps({"kind": "pipe"}))
    assert run("simulate", bad) == 1
    assert "world" in capsys.readouterr().err
    assert run("simulate") == 1
    assert run("frobnicate") == 1


def test_v_max_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"policy": {"v_max": 0.3, "d_long": 1.5}}))
    scen = tmp_path / "s.json"
    run("scenario", "gen", "open_room", "--param", "v_max=0.8", "--param", "duration_s=1", "-o", scen)
    run("simulate", scen, "--config", cfg, "--out", tmp_path / "a")
    pol = json.loads((tmp_path / "a" / "resolved_config.json").read_text())["config"]["policy"]
    assert pol["v_max"] == 0.8 and pol["d_long"] == 1.5
    run("simulate", scen, "--config", cfg, "--v-max", "1.7", "--out", tmp_path / "b")
    pol = json.loads((tmp_path / "b" / "resolved_config.json").read_text())["config"]["policy"]
    assert pol["v_max"] == 1.7


def test_crash_exits_with_2(tmp_path):
    scen = tmp_path / "s.json"
    doc = {
        "kind": "custom", "duration_s": 6.0, "ideal_sensor": True,
        "start": {"x": 0.0, "y": 0.0, "height": 0.4, "yaw": 0.0},
        "world": {"bounds": [-1, -4, 8, 4], "segments": [
            {"x0": 1.0, "y0": -1.0, "x1": 7.0, "y1": 2.0, "surface": "reflective", "z_min": 0.0, "z_max": 2.0}]},
    }
    scen.write_text(json.dumps(doc))
    assert run("simulate", scen, "--out", tmp_path / "o") == 2
    assert json.loads((tmp_path / "o" / "metrics.json").read_text())["crashed"] is True


# ----------------------------------------------------------------- sweep

def test_sweep_table(tmp_path):
    out = tmp_path / "sweep.csv"
    args = ("sweep", "wall_brake", "--v-max", "2.0", "0.5", "1.0", "1.5", "--trials", "2",
            "--param", "duration_s=4", "--out", out)
    assert run(*args) == 0
    rows = read_csv(out)
    assert rows[0] == ["v_max", "trials", "crashes", "mean_flight_time_s", "mean_distance_m",
                       "mean_min_clearance_m"]
    assert [r[0] for r in rows[1:]] == ["0.5", "1", "1.5", "2"]
    first = out.read_bytes()
    assert run(*args) == 0 and out.read_bytes() == first


def test_sweep_single_trial_and_errors(tmp_path):
    out = tmp_path / "s.csv"
    assert run("sweep", "open_room", "--v-max", "1.0", "--trials", "1", "--param", "duration_s=1", "--out", out) == 0
    assert read_csv(out)[1][:3] == ["1", "1", "0"]
    assert run("sweep", "open_room", "--v-max", "1.0", "--trials", "0", "--out", out) == 1
    assert run("sweep", "open_room", "--v-max", "1.0", "--param", "size=-3", "--out", out) == 1


# ---------------------------------------------------------------- replay

def test_replay_writes_one_row_per_frame(tmp_path):
    d = np.full((8, 8), 3000.0)
    d[2:6, 3:5] = 900.0
    frames = [DepthFrame.empty(0), DepthFrame.from_distances(d, 67), DepthFrame.empty(133)]
    write_log(LogBundle(frames, []), tmp_path / "log")
    out = tmp_path / "cmds.csv"
    assert run("replay", tmp_path / "log", "--out", out) == 0
    rows = read_csv(out)
    assert rows[0] == ["timestamp_ms", "v_forward", "yaw_rate", "v_vertical", "mode"]
    assert [r[0] for r in rows[1:]] == ["0", "67", "133"]
    assert [r[4] for r in rows[1:]] == ["Cruise", "SlowSteer", "Cruise"]
    first = out.read_bytes()
    run("replay", tmp_path / "log", "--out", out)
    assert out.read_bytes() == first


def test_replay_missing_tof(tmp_path, capsys):
    (tmp_path / "log").mkdir()
    assert run("replay", tmp_path / "log", "--out", tmp_path / "c.csv") == 1
    assert "tof.csv" in capsys.readouterr().err


# ---------------------------------------------------------- characterize

def test_characterize_layout(tmp_path):
    out = tmp_path / "c.csv"
    assert run("characterize", "--samples", "3", "--out", out) == 0
    rows = read_csv(out)
    assert len(rows) == 16 and len(rows[0]) == 1 + 3 * 64
    assert [float(r[0]) for r in rows[1:]] == pytest.approx([0.2 * k for k in range(1, 16)])


def test_characterize_single_sample_validity_is_binary(tmp_path):
    out = tmp_path / "c.csv"
    assert run("characterize", "--distances", "2.6", "--samples", "1", "--out", out) == 0
    valid = [float(v) for v in read_csv(out)[1][129:]]
    assert set(valid) <= {0.0, 1.0}


def test_characterize_zero_noise(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"noise": {"bias_grid": [[0] * 8] * 8, "sigma_grid": [[0] * 8] * 8,
                                         "validity_knots": [[0, 1], [4, 1]]}}))
    out = tmp_path / "c.csv"
    assert run("characterize", "--config", cfg, "--distances", "0.5,1,3", "--samples", "20", "--out", out) == 0
    for row in read_csv(out)[1:]:
        vals = [float(v) for v in row[1:]]
        assert vals[:64] == pytest.approx([0.0] * 64, abs=1e-9)
        assert vals[64:128] == pytest.approx([0.0] * 64, abs=1e-9)
        assert vals[128:] == [1.0] * 64


def test_characterize_errors(tmp_path):
    assert run("characterize", "--samples", "0", "--out", tmp_path / "c.csv") == 1
    assert run("characterize", "--distances", "abc") == 1


def test_parse_distances():
    assert parse_distances("0.2:1.0:0.2") == pytest.approx([0.2, 0.4, 0.6, 0.8, 1.0])
    assert parse_distances("1,2.5") == [1.0, 2.5]


# -------------------------------------------------------------- scenario

def test_scenario_gen(tmp_path, capsys):
    assert run("scenario", "gen", "pipe", "--param", "width=0.55") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "pipe" and doc["params"] == {"width": 0.55}
    assert run("scenario", "gen", "pipe", "--param", "width=wide") == 1
    assert run("scenario", "gen", "pipe", "--param", "oops") == 1
