import numpy as np
import pytest

from motbench.model import BBox, Detection, Trajectory
from motbench.synth import SceneConfig, generate_scene

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}

CLEAN = SceneConfig(n_targets=5, frame_count=200, noise_sigma=1.0, seed=0, name="clean")
DEGRADED = SceneConfig(
    n_targets=5, frame_count=200, miss_rate=0.2, clutter_rate=2.0, noise_sigma=3.0, seed=0, name="degraded"
)


@pytest.fixture(scope="session")
def clean_scene():
    return CLEAN, *generate_scene(CLEAN)


@pytest.fixture(scope="session")
def degraded_scene():
    return DEGRADED, *generate_scene(DEGRADED)


def box(x, y, w=20.0, h=50.0):
    return BBox(float(x), float(y), float(w), float(h))


def straight_track(frames, x0=100.0, y0=200.0, vx=3.0, vy=1.0, conf=0.9):
    """Noise-free detections of one target moving at constant velocity."""
    return [Detection(f, box(x0 + vx * (f - 1), y0 + vy * (f - 1)), conf) for f in frames]


def random_cost(rng, rows, cols, inf_rate=0.0, integer=False):
    c = rng.integers(0, 6, (rows, cols)).astype(float) if integer else rng.uniform(-5, 20, (rows, cols))
    if inf_rate:
        c[rng.random((rows, cols)) < inf_rate] = np.inf
    return c


def gt_as_detections(gt: list[Trajectory]) -> list[Detection]:
    return [Detection(f, b, 1.0) for t in gt for f, b in t.boxes.items()]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
