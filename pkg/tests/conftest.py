import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from livres.volume import BinaryMask, VoxelGrid

_ACCEPTANCE_RESULTS = []


def mask(data, spacing=(1.0, 1.0, 1.0)) -> BinaryMask:
    return BinaryMask(VoxelGrid(np.asarray(data, dtype=bool), spacing))


@pytest.fixture
def make_mask():
    return mask


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _ACCEPTANCE_RESULTS.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in _ACCEPTANCE_RESULTS:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"  {status}  {name}")
