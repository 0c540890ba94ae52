"""Escaping a dead end.

Inside a closed corridor the steering direction keeps flipping. Once enough
flips land inside the detection window the drone turns around and leaves.
"""
from tofnav.policy import TURN_AROUND
from tofnav.sim import make_scenario, run_scenario

# %%
trace, m = run_scenario(make_scenario("deadend"), seed=0)
turn = next(t for t in trace.ticks if t.command.mode == TURN_AROUND)
print(f"turnaround triggered at t={turn.state.time_s:.2f} s, x={turn.state.x:.2f} m")
out = next((t for t in trace.ticks if t.state.time_s > turn.state.time_s and t.state.x < 0), None)
print("left the corridor at", f"t={out.state.time_s:.2f} s" if out else "never")
print("crashed:", m.crashed)

# %% Mode histogram for the whole flight.
counts = {}
for t in trace.ticks:
    counts[t.command.mode] = counts.get(t.command.mode, 0) + 1
for mode, n in sorted(counts.items(), key=lambda kv: -kv[1]):
    print(f"{mode:<12}{n}")
