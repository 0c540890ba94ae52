"""Threading a straight pipe.

A 0.75 m pipe leaves enough room for the central danger band to stay clear.
At 0.55 m both walls sit inside the band, so the drone refuses to enter.
"""
from tofnav.sim import make_scenario, run_scenario

# %%
for width in (0.55, 0.65, 0.75, 0.9):
    results = []
    for seed in range(3):
        _, m = run_scenario(make_scenario("pipe", {"width": width, "ideal_sensor": True}), seed)
        results.append("through" if m.reached_goal else ("crash" if m.crashed else "refused"))
    print(f"width {width:.2f} m: {', '.join(results)}")
