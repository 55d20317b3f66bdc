"""Sampling-based verification suites behind ``goodfeat verify``.

The covariance and bias checks push noise through full Gauss-Newton solves
and compare the empirical error statistics against the closed forms in
:mod:`goodfeat.estimator`.  The submodularity and bound checks probe the
regularised logdet objective on random block sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimator import (GaussNewtonConfig, covariance_from_map,
                        covariance_from_measurement, expected_bias_from_map,
                        gauss_newton_pose)
from .geometry import CameraIntrinsics, jacobian_blocks, project_points, se3_exp, se3_log
from .selector import (DEFAULT_DELTA, block_grams, brute_force_select, greedy_select,
                       logdet_gain, logdet_spd)

SUITES = ("covariance", "bias", "submodular", "bound")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def random_rank2_blocks(rng, n: int) -> np.ndarray:
    """Standard-normal 3x6 blocks with one row zeroed, like real combined blocks."""
    B = rng.standard_normal((n, 3, 6))
    B[np.arange(n), rng.integers(0, 3, n), :] = 0.0
    return B


def random_pnp_scene(rng, n: int = 50, depth=(2.0, 10.0), cam=CameraIntrinsics()):
    """True pose and world landmarks, all visible from that pose."""
    pose = se3_exp(np.concatenate([rng.uniform(-0.1, 0.1, 3), rng.uniform(-0.05, 0.05, 3)]))
    uv = rng.uniform([0.0, 0.0], [cam.width, cam.height], size=(n, 2))
    pc = cam.back_project(uv, rng.uniform(*depth, size=n))
    world = pc @ pose.rotation.T + pose.translation
    return pose, world


def monte_carlo_pose_errors(pose, landmarks, cam, samples, rng, sigma_z=0.0,
                            mu_p=0.0, sigma_p=0.0, gn=GaussNewtonConfig()):
    """Error twists ``log(truth^-1 @ estimate)`` of repeated noisy solves."""
    Z0 = project_points(pose, landmarks, cam)
    inv = pose.inverse()
    out = np.empty((samples, 6))
    for s in range(samples):
        Z = Z0 + rng.normal(0.0, sigma_z, Z0.shape) if sigma_z > 0 else Z0
        P = landmarks
        if sigma_p > 0 or mu_p:
            P = landmarks + rng.normal(mu_p, sigma_p, landmarks.shape)
        est, _ = gauss_newton_pose(pose, P, Z, cam, gn)
        out[s] = se3_log(inv @ est)
    return out


def _rel_frobenius(empirical, analytic):
    den = np.linalg.norm(analytic)
    num = np.linalg.norm(empirical - analytic)
    if den <= 1e-15:
        return 0.0 if num <= 1e-12 else math.inf
    return float(num / den)


def check_covariance(samples=10_000, seed=0, n=50, sigma_z=1.0, sigma_p=0.01,
                     tol=0.10, cam=CameraIntrinsics()):
    rng = np.random.default_rng(seed)
    pose, P = random_pnp_scene(rng, n, cam=cam)
    blocks = jacobian_blocks(pose, P, cam)
    results = []
    for name, analytic, kwargs in (
            ("measurement covariance", covariance_from_measurement(blocks, sigma_z),
             {"sigma_z": sigma_z}),
            ("map covariance", covariance_from_map(blocks, sigma_p), {"sigma_p": sigma_p})):
        errs = monte_carlo_pose_errors(pose, P, cam, samples, rng, **kwargs)
        empirical = np.cov(errs, rowvar=False) if samples > 1 else np.zeros((6, 6))
        rel = _rel_frobenius(empirical, analytic)
        results.append(CheckResult(name, rel <= tol,
                                   f"relative Frobenius error {rel:.4f} (tol {tol})"))
    return results


def check_bias(samples=10_000, seed=0, n=50, mu_p=0.05, sigma_p=0.01, tol=0.05,
               floor=1e-4, cam=CameraIntrinsics()):
    rng = np.random.default_rng(seed)
    pose, P = random_pnp_scene(rng, n, cam=cam)
    analytic = expected_bias_from_map(jacobian_blocks(pose, P, cam), mu_p)
    errs = monte_carlo_pose_errors(pose, P, cam, samples, rng, mu_p=mu_p, sigma_p=sigma_p)
    mean = errs.mean(axis=0)
    big = np.abs(analytic) > floor
    rel = np.abs(mean[big] - analytic[big]) / np.abs(analytic[big])
    worst = float(rel.max()) if big.any() else 0.0
    return [CheckResult("map bias", worst <= tol,
                        f"max relative error {worst:.4f} over {int(big.sum())} "
                        f"components (tol {tol})")]


def check_submodular(probes=1000, seed=0, n=12, delta=DEFAULT_DELTA, slack=1e-9):
    """Diminishing returns and monotonicity of the ridge-regularised logdet."""
    rng = np.random.default_rng(seed)
    ridge = delta * np.eye(6)
    worst_dr, worst_mono = math.inf, math.inf
    for _ in range(probes):
        G = block_grams(random_rank2_blocks(rng, n))
        perm = rng.permutation(n)
        b = int(rng.integers(0, n))
        a = int(rng.integers(0, b + 1))
        A, B, i = perm[:a], perm[:b], perm[b]
        QA = G[A].sum(axis=0) + ridge
        QB = G[B].sum(axis=0) + ridge
        gain_a = logdet_spd(QA + G[i]) - logdet_spd(QA)
        gain_b = logdet_spd(QB + G[i]) - logdet_spd(QB)
        worst_dr = min(worst_dr, gain_a - gain_b)
        worst_mono = min(worst_mono, gain_b, logdet_spd(QB) - logdet_spd(QA))
    return [
        CheckResult("submodularity", worst_dr >= -slack,
                    f"min gain(A,i) - gain(B,i) = {worst_dr:.3e} over {probes} probes"),
        CheckResult("monotonicity", worst_mono >= -slack,
                    f"min logdet increment = {worst_mono:.3e} over {probes} probes"),
    ]


def check_bound(instances=100, seed=0, n=10, k=4, delta=DEFAULT_DELTA):
    """Greedy logdet gain against the brute-force optimum."""
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(instances):
        B = random_rank2_blocks(rng, n)
        g = logdet_gain(B, greedy_select(B, k, "logdet", delta).chosen, delta)
        opt = logdet_gain(B, brute_force_select(B, k, "logdet", delta).chosen, delta)
        ratios.append(g / opt)
    bound = 1.0 - 1.0 / math.e
    worst = min(ratios)
    return [CheckResult("greedy 1-1/e bound", worst >= bound,
                        f"min observed ratio {worst:.6f} over {instances} instances "
                        f"(bound {bound:.6f})")]


def run_suite(name: str, **kwargs):
    try:
        fn = {"covariance": check_covariance, "bias": check_bias,
              "submodular": check_submodular, "bound": check_bound}[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}") from None
    return fn(**kwargs)
