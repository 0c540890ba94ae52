"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 run ended in a crash.

Examples::

    tofnav scenario gen wall_brake -o wall.json
    tofnav simulate wall.json --v-max 1.5 --seed 42 --out runs/wall
    tofnav sweep dynamic_person --v-max 1.0 1.5 2.0 2.5 --trials 20 --out sweep.csv --workers 4
    tofnav replay logs/flight01 --out commands.csv
    tofnav characterize --distances 0.2:3.0:0.2 --samples 1000 --out char.csv
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, dump_json, load_json, load_run_config
from .dataset import LogError, read_log, replay
from .sensor import COLS, ROWS, apply_noise, make_stream, raycast_frame
from .sim.runner import resolve_config, run_scenario
from .sim.scenarios import BUILDERS, ScenarioConfig, ScenarioError, make_scenario, scenario_from_dict, scenario_to_dict
from .world import MATTE, DroneState, Segment, World

EXIT_OK, EXIT_CONFIG, EXIT_CRASH = 0, 1, 2

SWEEP_HEADER = ("v_max", "trials", "crashes", "mean_flight_time_s", "mean_distance_m", "mean_min_clearance_m")


class UsageError(ValueError):
    pass


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def _ensure_parent(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _write_text(path, text: str) -> None:
    _ensure_parent(path).write_text(text, encoding="utf-8")


def with_v_max(scenario: ScenarioConfig, v_max: float | None) -> ScenarioConfig:
    """Scenario whose policy overrides pin ``v_max`` (the command-line flag wins over everything)."""
    if v_max is None:
        return scenario
    if not math.isfinite(v_max) or v_max < 0:
        raise UsageError("--v-max must be a finite number >= 0")
    overrides = copy.deepcopy(scenario.overrides)
    overrides.setdefault("policy", {})["v_max"] = float(v_max)
    return dataclasses.replace(scenario, overrides=overrides)


def load_scenario(path) -> ScenarioConfig:
    return scenario_from_dict(load_json(path, "scenario"))


# ------------------------------------------------------------ simulate

def cmd_simulate(scenario_path, config_path=None, v_max=None, seed=0, out_dir=".") -> int:
    try:
        base = load_run_config(config_path)
        scenario = with_v_max(load_scenario(scenario_path), v_max)
        resolved = resolve_config(scenario, base)
    except (ConfigError, ScenarioError, UsageError) as exc:
        return _fail(str(exc))
    trace, metrics = run_scenario(scenario, seed, base)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "trace.csv", trace.to_csv())
    dump_json(metrics.to_dict(), out / "metrics.json")
    dump_json({"seed": int(seed), "scenario": scenario_to_dict(scenario), "config": resolved.to_dict()},
              out / "resolved_config.json")
    if metrics.crashed:
        x, y = metrics.crash_position
        print(f"crash at ({x:.3f}, {y:.3f}) after {metrics.flight_time_s:.2f} s", file=sys.stderr)
        return EXIT_CRASH
    return EXIT_OK


# --------------------------------------------------------------- sweep

def _sweep_job(args):
    kind, params, v_max, seed, cfg_dict = args
    scenario = with_v_max(make_scenario(kind, params), v_max)
    _, m = run_scenario(scenario, seed, RunConfig.from_dict(cfg_dict))
    return v_max, seed, m.crashed, m.flight_time_s, m.distance_m, m.min_clearance_m


def sweep_table(rows: list, trials: int) -> str:
    """CSV summary of ``(v_max, seed, crashed, flight_time, distance, min_clearance)`` tuples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    by_v = {}
    for r in sorted(rows, key=lambda r: (r[0], r[1])):
        by_v.setdefault(r[0], []).append(r)
    for v, runs in sorted(by_v.items()):
        crashes = sum(1 for r in runs if r[2])
        means = [math.fsum(r[k] for r in runs) / len(runs) for k in (3, 4, 5)]
        w.writerow([f"{v:g}", trials, crashes] + [f"{m:.6f}" for m in means])
    return buf.getvalue()


def cmd_sweep(scenario_kind, v_max_list, trials, base_seed=0, out_path="sweep.csv", config_path=None,
              workers=1, params=None) -> int:
    try:
        if trials < 1:
            raise UsageError("--trials must be >= 1")
        if not v_max_list:
            raise UsageError("--v-max needs at least one value")
        if len(set(v_max_list)) != len(v_max_list):
            raise UsageError("--v-max values must be distinct")
        cfg = load_run_config(config_path)
        for v in v_max_list:
            with_v_max(make_scenario(scenario_kind, params), v)
    except (ConfigError, ScenarioError, UsageError) as exc:
        return _fail(str(exc))
    cfg_dict = cfg.to_dict()
    jobs = [(scenario_kind, params, float(v), base_seed + i, cfg_dict) for v in v_max_list for i in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    _write_text(out_path, sweep_table(rows, trials))
    return EXIT_OK


# -------------------------------------------------------------- replay

def commands_csv(commands: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("timestamp_ms", "v_forward", "yaw_rate", "v_vertical", "mode"))
    for t, c in commands:
        w.writerow([t, repr(float(c.v_forward)), repr(float(c.yaw_rate)), repr(float(c.v_vertical)), c.mode])
    return buf.getvalue()


def cmd_replay(log_dir, config_path=None, out_path="commands.csv") -> int:
    try:
        cfg = load_run_config(config_path)
        bundle = read_log(log_dir, cfg.sensor.max_range_mm)
        if not bundle.tof:
            raise UsageError(f"{Path(log_dir) / 'tof.csv'}: no frames")
    except (ConfigError, LogError, UsageError) as exc:
        return _fail(str(exc))
    cmds = replay(bundle, cfg.perception, cfg.policy, cfg.sensor)
    _write_text(out_path, commands_csv(cmds))
    return EXIT_OK


# -------------------------------------------------------- characterize

def flat_wall(distance_m: float, half_width: float = 50.0) -> World:
    """A matte wall facing a sensor at the origin, far wider and taller than the field of view."""
    wall = Segment(distance_m, -half_width, distance_m, half_width, MATTE, -half_width, half_width)
    return World(segments=(wall,), bounds=(-1.0, -half_width - 1, distance_m + 1.0, half_width + 1))


def characterize(cfg: RunConfig, distance_m: float, samples: int, seed: int) -> tuple:
    """Per-zone ``(mean_error_mm, sigma_mm, valid_fraction)`` over ``samples`` frames of a flat wall.

    Statistics use valid samples only; NaN where too few samples are valid.
    """
    pose = DroneState(x=0.0, y=0.0, height=0.0, yaw=0.0)
    ideal = raycast_frame(flat_wall(distance_m), pose, cfg.sensor, cfg.noise.reflectivity_cutoff_deg)
    rng = make_stream(seed, f"characterize:{distance_m!r}")
    meas = np.empty((samples, ROWS, COLS))
    valid = np.empty((samples, ROWS, COLS), dtype=bool)
    for k in range(samples):
        f = apply_noise(ideal, cfg.noise, rng, k, cfg.sensor)
        meas[k], valid[k] = f.distance_mm, f.valid
    truth = np.where(ideal.returning, ideal.distance_mm, np.nan)
    err = np.where(valid, meas - truth, np.nan)
    n = valid.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(n > 0, np.nansum(err, axis=0) / np.maximum(n, 1), np.nan)
        dev = np.where(valid, err - mean, 0.0)
        sigma = np.where(n > 1, np.sqrt((dev ** 2).sum(axis=0) / np.maximum(n - 1, 1)), np.nan)
    return mean, sigma, n / samples


def characterize_header() -> list:
    zones = [f"{r}{c}" for r in range(ROWS) for c in range(COLS)]
    return (["distance_m"] + [f"err_{z}" for z in zones] + [f"sigma_{z}" for z in zones]
            + [f"valid_{z}" for z in zones])


def _cell(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


def cmd_characterize(config_path=None, distances_list=(1.0,), samples=1000, out_path="characterize.csv",
                     seed=None) -> int:
    try:
        if samples < 1:
            raise UsageError("--samples must be >= 1")
        if not distances_list or any(not math.isfinite(d) or d <= 0 for d in distances_list):
            raise UsageError("--distances must be positive")
        cfg = load_run_config(config_path)
    except (ConfigError, UsageError) as exc:
        return _fail(str(exc))
    seed = cfg.noise.rng_seed if seed is None else seed
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(characterize_header())
    for d in distances_list:
        mean, sigma, frac = characterize(cfg, d, samples, seed)
        w.writerow([f"{d:g}"] + [_cell(v) for v in mean.ravel()] + [_cell(v) for v in sigma.ravel()]
                   + [f"{v:.6f}" for v in frac.ravel()])
    _write_text(out_path, buf.getvalue())
    return EXIT_OK


# ------------------------------------------------------------ scenario

def _parse_param(text: str) -> tuple:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise UsageError(f"--param expects key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def cmd_scenario_gen(kind, params=None, out_path=None) -> int:
    try:
        sc = make_scenario(kind, params)
    except ScenarioError as exc:
        return _fail(str(exc))
    text = json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        _write_text(out_path, text)
    return EXIT_OK


# ------------------------------------------------------------- parsing

def parse_distances(text: str) -> list:
    """``"0.5,1,2"`` or ``"start:stop:step"`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 10) for i in range(max(n, 0))]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad distance list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tofnav", description="ToF obstacle-avoidance simulator and tools.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario")
    s.add_argument("scenario", help="scenario JSON file")
    s.add_argument("--config", help="run configuration JSON")
    s.add_argument("--v-max", type=float, help="maximum forward speed (m/s); overrides config and scenario")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".", help="output directory")

    s = sub.add_parser("sweep", help="repeat a scenario over several speeds and seeds")
    s.add_argument("kind", choices=sorted(BUILDERS))
    s.add_argument("--v-max", type=float, nargs="+", required=True)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--base-seed", type=int, default=0)
    s.add_argument("--config")
    s.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="scenario parameter")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", default="sweep.csv")

    s = sub.add_parser("replay", help="run a recorded ToF stream through the policy")
    s.add_argument("log_dir")
    s.add_argument("--config")
    s.add_argument("--out", default="commands.csv")

    s = sub.add_parser("characterize", help="Monte-Carlo sensor statistics against a flat wall")
    s.add_argument("--config")
    s.add_argument("--distances", type=parse_distances, default=parse_distances("0.2:3.0:0.2"))
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default="characterize.csv")

    s = sub.add_parser("scenario", help="scenario utilities")
    ssub = s.add_subparsers(dest="scenario_command", required=True)
    g = ssub.add_parser("gen", help="write a scenario JSON for a built-in kind")
    g.add_argument("kind", choices=sorted(BUILDERS))
    g.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    g.add_argument("-o", "--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        params = dict(_parse_param(t) for t in getattr(args, "param", []))
    except UsageError as exc:
        return _fail(str(exc))
    if args.command == "simulate":
        return cmd_simulate(args.scenario, args.config, args.v_max, args.seed, args.out)
    if args.command == "sweep":
        return cmd_sweep(args.kind, args.v_max, args.trials, args.base_seed, args.out, args.config,
                         args.workers, params)
    if args.command == "replay":
        return cmd_replay(args.log_dir, args.config, args.out)
    if args.command == "characterize":
        return cmd_characterize(args.config, args.distances, args.samples, args.out, args.seed)
    return cmd_scenario_gen(args.kind, params, args.out)


if __name__ == "__main__":
    sys.exit(main())
