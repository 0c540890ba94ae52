"""Record a simulated flight to disk and replay it through the controller.

Replaying the logged frames and states must reproduce the commands that were
issued during flight, which makes logs a regression fixture for the policy.
"""
import tempfile
from pathlib import Path

from tofnav.dataset import bundle_from_trace, read_log, replay, write_log
from tofnav.sim import make_scenario, run_scenario

# %%
trace, _ = run_scenario(make_scenario("deadend"), seed=5, record_frames=True)
bundle = bundle_from_trace(trace, {"scenario": "deadend", "seed": 5})

with tempfile.TemporaryDirectory() as tmp:
    write_log(bundle, tmp)
    print("files:", sorted(p.name for p in Path(tmp).iterdir()))
    loaded = read_log(tmp)

# %%
replayed = replay(loaded)
same = sum(a == b for a, b in zip(replayed, bundle.commands))
print(f"{same}/{len(replayed)} replayed commands match the recorded ones")
