import sys
from pathlib import Path

import pytest

from hybridrir.pipeline import StationPipeline
from hybridrir.scene import (Environment, Material, Point3, ReceiverSpec, SceneConfig, SourceSpec,
                             shoebox_room)

sys.path.insert(0, str(Path(__file__).parent))

BOX_DIMS = (7.0, 5.0, 3.0)
BOX_ABSORPTION = {
    "floor": (0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08),
    "ceiling": (0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60),
    "wall_x0": (0.10, 0.10, 0.10, 0.10, 0.10, 0.10, 0.10),
    "wall_x1": (0.20, 0.18, 0.16, 0.14, 0.12, 0.10, 0.08),
    "wall_y0": (0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65),
    "wall_y1": (0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07),
}
BOX_SOURCE = (2.3, 1.7, 1.4)
BOX_RECEIVER = (4.9, 3.1, 1.6)


def make_box(source=BOX_SOURCE, receiver=BOX_RECEIVER, environment=None):
    room = shoebox_room(BOX_DIMS)
    mats = {k: Material(v) for k, v in BOX_ABSORPTION.items()}
    return SceneConfig(room, mats, {1: SourceSpec(Point3.of(source))},
                       ReceiverSpec(Point3.of(receiver)), environment or Environment())


@pytest.fixture
def box():
    return make_box()


@pytest.fixture(scope="session")
def station():
    """Calibrated station hall, default pipeline settings (renders are cached)."""
    return StationPipeline()


# -- acceptance summary ------------------------------------------------------------------

N_CRITERIA = 11
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """``record(n, ok, detail)`` logs one acceptance line and returns ``ok``."""
    def record(n, ok, detail):
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        ok, detail = ACCEPTANCE.get(n, (False, "not run or errored before reporting"))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
