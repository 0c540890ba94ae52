"""Flying straight at a wall: how close does the drone get before it stops?

The drone starts 3.5 m in front of a 1.2 m wide panel with steering switched
off, so the only thing protecting it is the forward-velocity curve.
"""
from tofnav.sim import make_scenario, run_scenario

# %% Sweep the speed cap and look at the final stand-off distance.
for v_max in (0.5, 1.0, 1.5, 2.0, 2.5):
    for ideal in (True, False):
        scenario = make_scenario("wall_brake", {"v_max": v_max, "ideal_sensor": ideal})
        trace, metrics = run_scenario(scenario, seed=42)
        label = "ideal" if ideal else "noisy"
        print(f"v_max={v_max:<4} {label}: stopped {metrics.final_stop_distance_m:.3f} m from the panel, "
              f"crashed={metrics.crashed}")

# %% The speed profile of one run shows the ramp-down as the wall approaches.
trace, _ = run_scenario(make_scenario("wall_brake", {"v_max": 2.0, "ideal_sensor": True}), seed=42)
for tick in trace.ticks[::10]:
    s = tick.state
    print(f"t={s.time_s:5.2f}s  x={s.x:5.2f} m  v={s.v_forward:5.2f} m/s  mode={tick.command.mode}")
