"""Speed-versus-safety sweep over several seeds, run in parallel.

The table is byte-identical whatever the worker count.
"""
import tempfile
from pathlib import Path

from tofnav.cli import cmd_sweep

# %%
if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "sweep.csv"
        cmd_sweep("dynamic_person", [1.0, 1.5, 2.0, 2.5], trials=5, out_path=out, workers=4)
        print(out.read_text())
