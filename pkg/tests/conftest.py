import numpy as np
import pytest

from tofnav.sensor import DepthFrame

ACCEPTANCE = {}  # criterion number -> (title, passed, detail)


def frame_from(distances, valid=None, ts=0):
    d = np.asarray(distances, dtype=float)
    v = np.ones(d.shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    return DepthFrame(np.where(v, d, -1.0), v, ts)


def blank_frame(ts=0):
    return DepthFrame.empty(ts)


@pytest.fixture
def make_frame():
    return frame_from


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {n:>2}: {title} -- {detail}")
