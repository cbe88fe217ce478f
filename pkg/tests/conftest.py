import pytest

from catsim.config import paper_preset
from catsim.experiment import simulate

# Reference per-priority completion times (ms) for the five-group page on the
# 2 Mbit/s, 50 ms dumbbell, as published for the original prototype.
REFERENCE_BASELINE = {0: 1327, 1: 1293, 2: 1187, 3: 1018, 4: 764}
REFERENCE_CATS = {0: 130, 1: 282, 2: 523, 3: 815, 4: 1327}


@pytest.fixture(scope="session")
def paper_runs():
    """Both schemes on the default preset, seed 1: {scheme: (report, stack)}."""
    cfg = paper_preset()
    return {s: simulate(cfg, s) for s in ("cats", "baseline")}


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
