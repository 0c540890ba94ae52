"""A person steps into the flight path once the drone gets close.

Faster flight leaves less time to react, so the closest approach should
shrink as the speed cap grows.
"""
from tofnav.sim import make_scenario, run_scenario

# %%
for v_max in (1.0, 1.5, 2.0, 2.5):
    _, m = run_scenario(make_scenario("dynamic_person", {"v_max": v_max}), seed=0)
    print(f"v_max={v_max}: min clearance {m.min_clearance_m:.3f} m, crashed={m.crashed}, "
          f"ended by {m.terminal_cause}")
