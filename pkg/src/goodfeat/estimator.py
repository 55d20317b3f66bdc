"""Gauss-Newton pose refinement and first-order error propagation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (CameraIntrinsics, JacobianBlockSet, Pose, pose_jacobians,
                       se3_exp, so3_log)

MIN_CORRESPONDENCES = 3
RANK_DEFICIENT_RCOND = 1e-14


class DegenerateGeometryError(np.linalg.LinAlgError):
    """The pose is not determined by the available correspondences."""


@dataclass(frozen=True)
class GaussNewtonConfig:
    max_iters: int = 20
    update_norm_tol: float = 1e-10
    # scale of the one-shot diagonal loading: damping * trace(A) / 6
    damping: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.update_norm_tol > 0 and self.damping > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class NoiseModel:
    """Pixel noise ``sigma_z`` and (possibly biased) per-axis map noise."""

    sigma_z: float = 0.0
    mu_p: float = 0.0
    sigma_p: float = 0.0

    def __post_init__(self):
        if self.sigma_z < 0 or self.sigma_p < 0:
            raise ValueError("noise standard deviations must be non-negative")


@dataclass(frozen=True)
class PoseError:
    translational: float  # meters
    rotational: float  # degrees


def _is_singular(A, rcond=1e-12):
    w = np.linalg.eigvalsh(A)
    return not np.all(np.isfinite(w)) or w[0] <= rcond * max(w[-1], 0.0)


def _solve_normal(A, b, damping):
    if _is_singular(A):
        # rank deficient at machine precision: no damping can make this well posed
        if _is_singular(A, RANK_DEFICIENT_RCOND):
            raise DegenerateGeometryError("normal equations are rank deficient")
        A = A + damping * np.trace(A) / 6.0 * np.eye(6)
        if _is_singular(A):
            raise DegenerateGeometryError("normal equations are singular")
    return np.linalg.solve(A, b)


def gauss_newton_pose(initial: Pose, landmarks, observations, cam: CameraIntrinsics,
                      cfg: GaussNewtonConfig = GaussNewtonConfig(),
                      weights=None) -> tuple[Pose, int]:
    """Minimise the reprojection error over the camera pose.

    Each iteration solves ``Hx d = z - h(pose)`` in the least-squares sense and
    applies ``pose <- pose @ exp(d)``.  Features that fall behind the camera
    during an iteration are skipped for that iteration only.

    ``weights`` optionally holds one 2x2 information matrix per feature; the
    default is the plain unweighted objective.

    Returns
    -------
    pose, iterations
    """
    P = np.atleast_2d(np.asarray(landmarks, dtype=float))
    Z = np.atleast_2d(np.asarray(observations, dtype=float))
    if len(P) != len(Z):
        raise ValueError("landmarks and observations differ in length")
    if len(P) < MIN_CORRESPONDENCES:
        raise DegenerateGeometryError(
            f"need at least {MIN_CORRESPONDENCES} correspondences, got {len(P)}")

    W = None if weights is None else np.asarray(weights, dtype=float).reshape(len(P), 2, 2)
    pose = initial
    it = 0
    for it in range(1, cfg.max_iters + 1):
        front = pose.to_camera(P)[:, 2] > 0
        if front.sum() < MIN_CORRESPONDENCES:
            raise DegenerateGeometryError("too few landmarks in front of the camera")
        Pf, Zf = P[front], Z[front]
        pc = pose.to_camera(Pf)
        h = np.column_stack([cam.cx + cam.fx * pc[:, 0] / pc[:, 2],
                             cam.cy + cam.fy * pc[:, 1] / pc[:, 2]])
        r = Zf - h
        H = pose_jacobians(pose, Pf, cam)
        if W is None:
            A = np.einsum("nij,nik->jk", H, H)
            b = np.einsum("nij,ni->j", H, r)
        else:
            WH = W[front] @ H
            A = np.einsum("nij,nik->jk", H, WH)
            b = np.einsum("nij,ni->j", WH, r)
        step = _solve_normal(A, b, cfg.damping)
        pose = pose @ se3_exp(step)
        if np.linalg.norm(step) < cfg.update_norm_tol:
            break
    return pose, it


def reprojection_cost(pose: Pose, landmarks, observations, cam: CameraIntrinsics) -> float:
    P = np.atleast_2d(np.asarray(landmarks, dtype=float))
    pc = pose.to_camera(P)
    h = np.column_stack([cam.cx + cam.fx * pc[:, 0] / pc[:, 2],
                         cam.cy + cam.fy * pc[:, 1] / pc[:, 2]])
    return float(np.sum((np.asarray(observations) - h) ** 2))


def pose_error(estimate: Pose, truth: Pose) -> PoseError:
    dt = float(np.linalg.norm(estimate.translation - truth.translation))
    c = 0.5 * (np.trace(estimate.rotation @ truth.rotation.T) - 1.0)
    angle = np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))
    if angle < 1e-4:
        # arccos loses precision near zero; the log map does not
        angle = np.degrees(np.linalg.norm(so3_log(estimate.rotation @ truth.rotation.T)))
    return PoseError(dt, float(angle))


# ---------------------------------------------------------------------------
# Error propagation
# ---------------------------------------------------------------------------

def _checked_inv(A, what):
    if _is_singular(A):
        raise DegenerateGeometryError(f"{what} is singular")
    return np.linalg.inv(A)


def _symmetrize(A):
    return 0.5 * (A + A.T)


def covariance_from_measurement(blocks: JacobianBlockSet, sigma_z: float) -> np.ndarray:
    """Pose covariance induced by i.i.d. pixel noise of std ``sigma_z``."""
    info = np.einsum("nij,nik->jk", blocks.Hx, blocks.Hx)
    return _symmetrize(sigma_z**2 * _checked_inv(info, "pose information matrix"))


def covariance_from_map(blocks: JacobianBlockSet, sigma_p: float) -> np.ndarray:
    """Pose covariance of the unweighted solve under i.i.d. landmark noise.

    ``sigma_p^2 pinv(Hx) Hp Hp^T pinv(Hx)^T``, accumulated block by block.
    """
    info = np.einsum("nij,nik->jk", blocks.Hx, blocks.Hx)
    inv = _checked_inv(info, "pose information matrix")
    meat = np.zeros((6, 6))
    for Hx_i, Hp_i in zip(blocks.Hx, blocks.Hp):
        M = Hx_i.T @ Hp_i
        meat += M @ M.T
    return _symmetrize(sigma_p**2 * inv @ meat @ inv)


def map_noise_weights(blocks: JacobianBlockSet) -> np.ndarray:
    """Per-feature ``(Hp_i Hp_i^T)^-1``, the pixel-space information of map noise."""
    out = np.empty((len(blocks), 2, 2))
    for i, Hp_i in enumerate(blocks.Hp):
        out[i] = _checked_inv(Hp_i @ Hp_i.T, "projection block product")
    return out


def covariance_from_map_weighted(blocks: JacobianBlockSet, sigma_p: float) -> np.ndarray:
    """``sigma_p^2 {sum Hx_i^T (Hp_i Hp_i^T)^-1 Hx_i}^-1``.

    This is the covariance when each residual is whitened with
    :func:`map_noise_weights`; it lower-bounds :func:`covariance_from_map`.
    """
    W = map_noise_weights(blocks)
    info = np.einsum("nji,njk,nkl->il", blocks.Hx, W, blocks.Hx)
    return _symmetrize(sigma_p**2 * _checked_inv(info, "map information matrix"))


def expected_bias_from_map(blocks: JacobianBlockSet, mu_p) -> np.ndarray:
    """First-order mean of the pose error twist under biased map noise.

    ``mu_p`` is the per-axis landmark offset (scalar or 3-vector), shared by
    every landmark.  The estimate compensates the shifted map, so the
    returned twist is ``-pinv(Hx) @ Hp @ tile(mu_p)``, expressed as
    ``log(truth^-1 @ estimate)``.
    """
    mu = np.broadcast_to(np.asarray(mu_p, dtype=float), (3,))
    Hx = blocks.stacked_Hx()
    if np.linalg.matrix_rank(Hx) < 6:
        raise DegenerateGeometryError("pose Jacobian is rank deficient")
    shift = blocks.Hp @ mu  # (n, 2): Hp @ (1_n mu) evaluated block-wise
    return -np.linalg.pinv(Hx) @ shift.reshape(-1)
