import numpy as np
import pytest
from hypothesis import settings

from goodfeat.geometry import CameraIntrinsics, se3_exp

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def report(criterion, passed, detail):
    line = f"{criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def cam():
    return CameraIntrinsics()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_pose(rng, max_t=0.1, max_rot=0.1):
    return se3_exp(np.concatenate([rng.uniform(-max_t, max_t, 3),
                                   rng.uniform(-max_rot, max_rot, 3)]))


def random_visible_points(rng, pose, cam, n, depth=(0.5, 20.0)):
    uv = rng.uniform([1.0, 1.0], [cam.width - 1.0, cam.height - 1.0], size=(n, 2))
    pc = cam.back_project(uv, rng.uniform(*depth, size=n))
    return pc @ pose.rotation.T + pose.translation
