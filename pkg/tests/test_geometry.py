import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from goodfeat.geometry import (BehindCameraError, CameraIntrinsics, DegenerateFeatureError,
                               Pose, combined_block, compose, inverse, jacobian_blocks,
                               point_jacobian, pose_jacobian, project, se3_exp, se3_log,
                               so3_exp, so3_log)

from conftest import random_pose, random_visible_points

FD_STEP = 1e-6
FD_RTOL = 1e-5

finite = st.floats(-1.0, 1.0, allow_nan=False)
twists = st.lists(finite, min_size=6, max_size=6).map(np.array)


def fd_pose_jacobian(pose, lm, cam, h=FD_STEP):
    out = np.zeros((2, 6))
    for j in range(6):
        d = np.zeros(6)
        d[j] = h
        out[:, j] = (project(pose @ se3_exp(d), lm, cam)
                     - project(pose @ se3_exp(-d), lm, cam)) / (2 * h)
    return out


def fd_point_jacobian(pose, lm, cam, h=FD_STEP):
    out = np.zeros((2, 3))
    for j in range(3):
        d = np.zeros(3)
        d[j] = h
        out[:, j] = (project(pose, lm + d, cam) - project(pose, lm - d, cam)) / (2 * h)
    return out


def assert_fd_close(analytic, fd):
    assert np.all(np.abs(analytic - fd) <= FD_RTOL * np.maximum(np.abs(fd), 1.0))


def test_project_on_axis():
    # principal point must lie strictly inside the image, so it cannot be (0, 0)
    cam = CameraIntrinsics(1.0, 1.0, 0.5, 0.5, 1, 1)
    np.testing.assert_array_equal(project(Pose.identity(), [0.0, 0.0, 2.0], cam), [0.5, 0.5])


def test_project_pinhole_value(cam):
    np.testing.assert_allclose(project(Pose.identity(), [1.0, 0.0, 2.0], cam), [570.0, 240.0])


def test_project_behind_camera(cam):
    with pytest.raises(BehindCameraError):
        project(Pose.identity(), [0.0, 0.0, -1.0], cam)
    with pytest.raises(BehindCameraError):
        pose_jacobian(Pose.identity(), [0.0, 0.0, 0.0], cam)


def test_intrinsics_validated():
    with pytest.raises(ValueError):
        CameraIntrinsics(fx=-1.0)
    with pytest.raises(ValueError):
        CameraIntrinsics(cx=700.0)


def test_jacobians_match_finite_differences(cam, rng):
    for _ in range(50):
        pose = random_pose(rng, 1.0, 1.0)
        lm = random_visible_points(rng, pose, cam, 1)[0]
        assert_fd_close(pose_jacobian(pose, lm, cam), fd_pose_jacobian(pose, lm, cam))
        assert_fd_close(point_jacobian(pose, lm, cam), fd_point_jacobian(pose, lm, cam))


def test_on_axis_translation_block_has_no_cross_terms(cam):
    H = pose_jacobian(Pose.identity(), [0.0, 0.0, 3.0], cam)
    assert H[0, 1] == 0.0 and H[1, 0] == 0.0


def test_pose_jacobian_linear_in_focal_length(rng):
    pose = random_pose(rng)
    lm = np.array([0.3, -0.2, 4.0])
    a = CameraIntrinsics(400.0, 300.0, 320.0, 240.0, 640, 480)
    b = CameraIntrinsics(800.0, 600.0, 320.0, 240.0, 640, 480)
    np.testing.assert_array_equal(pose_jacobian(pose, lm, b), 2 * pose_jacobian(pose, lm, a))


def test_point_jacobian_identity_pose_by_hand(cam):
    x, y, z = 0.4, -0.7, 3.0
    expected = np.array([[cam.fx / z, 0.0, -cam.fx * x / z**2],
                         [0.0, cam.fy / z, -cam.fy * y / z**2]])
    np.testing.assert_allclose(point_jacobian(Pose.identity(), [x, y, z], cam), expected,
                               rtol=1e-14)


def test_point_jacobian_translation_invariant(cam, rng):
    pose = random_pose(rng)
    lm = random_visible_points(rng, pose, cam, 1)[0]
    offset = rng.normal(size=3)
    moved = Pose(pose.rotation, pose.translation + offset)
    np.testing.assert_allclose(point_jacobian(moved, lm + offset, cam),
                               point_jacobian(pose, lm, cam), rtol=1e-9, atol=1e-12)


def test_combined_block_identity_augmentation(rng):
    Hx = rng.normal(size=(2, 6))
    Hc = combined_block(Hx, [[1, 0, 0], [0, 1, 0]])
    np.testing.assert_array_equal(Hc, np.vstack([Hx, np.zeros(6)]))


def test_combined_block_definition(rng):
    for _ in range(100):
        Hx, Hp = rng.normal(size=(2, 6)), rng.normal(size=(2, 3))
        A = np.vstack([Hp, [0, 0, 1]])
        if np.linalg.cond(A) >= 1e8:
            continue
        Hc = combined_block(Hx, Hp)
        np.testing.assert_allclose(A @ Hc, np.vstack([Hx, np.zeros(6)]), atol=1e-10)
        assert np.linalg.matrix_rank(Hc) <= 2


def test_combined_block_degenerate():
    with pytest.raises(DegenerateFeatureError):
        combined_block(np.ones((2, 6)), [[0, 1, 2], [0, 3, 4]])


def test_jacobian_blocks_shapes(cam, rng):
    pose = random_pose(rng)
    P = random_visible_points(rng, pose, cam, 7)
    b = jacobian_blocks(pose, P, cam)
    assert b.stacked_Hx().shape == (14, 6)
    assert b.block_diag_Hp().shape == (14, 21)
    assert b.stacked_Hc().shape == (21, 6)
    assert b.valid.all()


def test_projection_round_trip(cam, rng):
    pose = random_pose(rng)
    P = random_visible_points(rng, pose, cam, 100)
    for p in P:
        uv = project(pose, p, cam)
        depth = pose.to_camera(p)[2]
        pc = cam.back_project(uv, [depth])[0]
        np.testing.assert_allclose(pose.rotation @ pc + pose.translation, p, atol=1e-9)


def test_exp_zero_is_identity():
    P = se3_exp(np.zeros(6))
    np.testing.assert_array_equal(P.rotation, np.eye(3))
    np.testing.assert_array_equal(P.translation, np.zeros(3))


def test_log_exp_round_trip_fixed_angle(rng):
    for _ in range(200):
        phi = rng.normal(size=3)
        phi *= 0.3 / np.linalg.norm(phi)
        xi = np.concatenate([rng.normal(size=3), phi])
        np.testing.assert_allclose(se3_log(se3_exp(xi)), xi, atol=1e-9)


@given(twists)
def test_log_exp_round_trip(xi):
    np.testing.assert_allclose(se3_log(se3_exp(xi)), xi, atol=1e-9)


@given(twists)
def test_exp_inverse(xi):
    P = se3_exp(xi) @ se3_exp(-xi)
    np.testing.assert_allclose(P.rotation, np.eye(3), atol=1e-9)
    np.testing.assert_allclose(P.translation, np.zeros(3), atol=1e-9)


@given(twists)
def test_pose_invariants(xi):
    P = se3_exp(xi * 3.0)
    R = P.rotation
    assert np.linalg.norm(R.T @ R - np.eye(3)) < 1e-9
    assert abs(np.linalg.det(R) - 1.0) < 1e-9
    I = compose(P, inverse(P))
    np.testing.assert_allclose(I.matrix(), np.eye(4), atol=1e-9)


@given(twists, twists, twists)
def test_compose_associative(a, b, c):
    A, B, C = se3_exp(a), se3_exp(b), se3_exp(c)
    np.testing.assert_allclose(((A @ B) @ C).matrix(), (A @ (B @ C)).matrix(), atol=1e-12)


def test_so3_log_near_pi():
    axis = np.array([1.0, 2.0, -0.5])
    axis /= np.linalg.norm(axis)
    for angle in (np.pi - 1e-2, np.pi - 1e-4, np.pi - 1e-7):
        phi = so3_log(so3_exp(angle * axis))
        np.testing.assert_allclose(so3_exp(phi), so3_exp(angle * axis), atol=1e-9)
        assert abs(np.linalg.norm(phi) - angle) < 1e-6
