"""Monte-Carlo accuracy-vs-subset-size experiment on synthetic PnP scenes.

A camera starts at the world origin, ``n_points`` landmarks are scattered
in its view, and a small random rigid motion is applied.  The moved camera
observes the true landmarks with pixel noise while the estimator only sees
a map corrupted by biased noise.  Each method picks ``k`` features, and a
Gauss-Newton solve from the origin is scored against the true motion.
"""
from __future__ import annotations

import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimator import (DegenerateGeometryError, GaussNewtonConfig, NoiseModel,
                        gauss_newton_pose, pose_error)
from .geometry import (BehindCameraError, CameraIntrinsics, Pose, jacobian_blocks,
                       project_points, so3_exp)
from .selector import (DEFAULT_DELTA, MetricKind, greedy_select, random_select,
                       stochastic_greedy_logdet)

ALL = "ALL"
RANDOM = "Random"
STOCHASTIC_LOGDET = "StochasticLogDet"
GREEDY_METHODS = {
    "MaxLogDet": MetricKind.MAX_LOGDET,
    "MaxTrace": MetricKind.MAX_TRACE,
    "MinCond": MetricKind.MIN_COND,
    "MaxMinEig": MetricKind.MAX_MIN_EIG,
}
METHODS = (ALL, RANDOM, STOCHASTIC_LOGDET, *GREEDY_METHODS)
SCENE_RETRIES = 100


@dataclass(frozen=True)
class PosePerturbation:
    max_rotation_deg: float = 5.0
    max_translation_m: float = 0.1


@dataclass(frozen=True)
class SimConfig:
    n_points: int = 200
    depth_range: tuple = (1.0, 10.0)
    pose_perturbation: PosePerturbation = field(default_factory=PosePerturbation)
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(1.0, 0.05, 0.05))
    subset_sizes: tuple = (80, 100, 120, 140, 160, 180, 200)
    methods: tuple = (ALL, RANDOM, "MaxLogDet")
    trials: int = 300
    base_seed: int = 0
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    gn: GaussNewtonConfig = field(default_factory=GaussNewtonConfig)
    delta: float = DEFAULT_DELTA
    epsilon: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "depth_range", tuple(float(d) for d in self.depth_range))
        object.__setattr__(self, "subset_sizes", tuple(int(k) for k in self.subset_sizes))
        object.__setattr__(self, "methods", tuple(self.methods))
        self.validate()

    def validate(self):
        if self.n_points < 3:
            raise ValueError("n_points: need at least 3 landmarks")
        lo, hi = self.depth_range
        if not 0 < lo <= hi:
            raise ValueError("depth_range: need 0 < min <= max")
        if not self.subset_sizes:
            raise ValueError("subset_sizes: must not be empty")
        if min(self.subset_sizes) < 1 or max(self.subset_sizes) > self.n_points:
            raise ValueError("subset_sizes: every k must satisfy 1 <= k <= n_points")
        if self.trials < 1:
            raise ValueError("trials: must be >= 1")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise ValueError(f"methods: unknown {unknown}, choose from {list(METHODS)}")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon: must lie in (0, 1)")


@dataclass
class Scene:
    landmarks: np.ndarray  # true world points, (n, 3)
    perturbed: np.ndarray  # map handed to the estimator, (n, 3)
    true_pose: Pose  # camera-to-world pose of the moved camera
    observations: np.ndarray  # noisy pixels, (n, 2)
    valid: np.ndarray  # (n,) bool


@dataclass
class TrialRecord:
    trial: int
    method: str
    k: int
    trans_err_m: float
    rot_err_deg: float
    select_time_us: float
    solve_iters: int
    failed: bool = False

    def sort_key(self):
        return (self.method, self.k, self.trial)


def derive_seed(base_seed: int, trial: int, purpose: str, *extra: int) -> np.random.SeedSequence:
    """Independent stream per (base seed, trial, purpose, extra...)."""
    return np.random.SeedSequence([base_seed, trial, zlib.crc32(purpose.encode()), *extra])


def _random_pose(rng, pert: PosePerturbation) -> Pose:
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    angle = np.radians(rng.uniform(0.0, pert.max_rotation_deg))
    t = rng.uniform(-pert.max_translation_m, pert.max_translation_m, 3)
    return Pose(so3_exp(angle * axis), t)


def _visible(pose, points, cam):
    depth = pose.to_camera(points)[:, 2]
    ok = depth > 0
    if ok.any():
        ok[ok] = cam.in_image(project_points(pose, points[ok], cam))
    return ok


def generate_scene(cfg: SimConfig, rng_seed) -> Scene:
    rng = np.random.default_rng(rng_seed)
    cam = cfg.camera
    n = cfg.n_points
    true_pose = _random_pose(rng, cfg.pose_perturbation)

    def sample(m):
        uv = rng.uniform([0.0, 0.0], [cam.width, cam.height], size=(m, 2))
        depth = rng.uniform(*cfg.depth_range, size=m)
        return cam.back_project(uv, depth)  # initial camera sits at the origin

    P = sample(n)
    for _ in range(SCENE_RETRIES):
        bad = ~_visible(true_pose, P, cam)
        if not bad.any():
            break
        P[bad] = sample(int(bad.sum()))
    else:
        raise RuntimeError("could not place all landmarks inside the moved camera's view")

    noise = cfg.noise
    Z = project_points(true_pose, P, cam) + rng.normal(0.0, noise.sigma_z, size=(n, 2))
    perturbed = P + rng.normal(noise.mu_p, noise.sigma_p, size=(n, 3))
    return Scene(P, perturbed, true_pose, Z, np.ones(n, dtype=bool))


def _solve(scene: Scene, indices, cfg: SimConfig):
    idx = np.sort(np.asarray(indices, dtype=int))
    est, iters = gauss_newton_pose(Pose.identity(), scene.perturbed[idx],
                                   scene.observations[idx], cfg.camera, cfg.gn)
    return pose_error(est, scene.true_pose), iters


def _failed(trial, method, k, select_us=math.nan):
    return TrialRecord(trial, method, k, math.nan, math.nan, select_us, 0, failed=True)


def _candidates(scene: Scene, cfg: SimConfig):
    """Indices of usable features and their combined blocks at the initial guess."""
    blocks = jacobian_blocks(Pose.identity(), scene.perturbed, cfg.camera)
    usable = np.flatnonzero(blocks.valid & scene.valid)
    return usable, blocks.Hc[usable]


def _select(method, usable, Hc, k, cfg, trial):
    """Run one selection; returns (chosen original indices, time in us)."""
    if method == ALL:
        return usable, 0.0
    if method == RANDOM:
        seed = int(derive_seed(cfg.base_seed, trial, RANDOM, k).generate_state(1)[0])
        t0 = time.perf_counter_ns()
        picked = random_select(len(usable), k, seed)
        return usable[picked], (time.perf_counter_ns() - t0) / 1e3
    if method == STOCHASTIC_LOGDET:
        seed = int(derive_seed(cfg.base_seed, trial, STOCHASTIC_LOGDET, k).generate_state(1)[0])
        res = stochastic_greedy_logdet(Hc, k, cfg.epsilon, cfg.delta, seed)
        return usable[res.chosen], res.time_us
    res = greedy_select(Hc, k, GREEDY_METHODS[method], cfg.delta)
    return usable[res.chosen], res.time_us


def run_trial(scene: Scene, k: int, method: str, cfg: SimConfig, trial: int = 0) -> TrialRecord:
    """Select ``k`` features with ``method`` and solve for the pose on them."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    try:
        usable, Hc = _candidates(scene, cfg)
    except BehindCameraError:
        return _failed(trial, method, k)
    if k > len(usable):
        raise ValueError(f"k={k} exceeds the {len(usable)} usable features")
    chosen, select_us = _select(method, usable, Hc, k, cfg, trial)
    return _finish(scene, chosen, select_us, trial, method, k, cfg)


def _finish(scene, chosen, select_us, trial, method, k, cfg):
    try:
        err, iters = _solve(scene, chosen, cfg)
    except (DegenerateGeometryError, BehindCameraError, np.linalg.LinAlgError):
        return _failed(trial, method, k, select_us)
    return TrialRecord(trial, method, k, err.translational, err.rotational,
                       select_us, iters)


def _trial_records(cfg: SimConfig, trial: int) -> list:
    """All (method, k) records for one scene.

    Greedy selections are nested in k, so one run up to ``max(k)`` serves
    every subset size; each prefix reports the time its own rounds took.
    ALL does not depend on k and is solved once.
    """
    scene = generate_scene(cfg, derive_seed(cfg.base_seed, trial, "scene"))
    out = []
    try:
        usable, Hc = _candidates(scene, cfg)
    except BehindCameraError:
        return [_failed(trial, m, k) for m in cfg.methods for k in cfg.subset_sizes]
    k_max = max(cfg.subset_sizes)
    if k_max > len(usable):
        return [_failed(trial, m, k) for m in cfg.methods for k in cfg.subset_sizes]

    for method in cfg.methods:
        if method == ALL:
            rec = _finish(scene, usable, 0.0, trial, method, len(usable), cfg)
            for k in cfg.subset_sizes:
                out.append(TrialRecord(**{**rec.__dict__, "k": k}))
        elif method in GREEDY_METHODS:
            res = greedy_select(Hc, k_max, GREEDY_METHODS[method], cfg.delta)
            for k in cfg.subset_sizes:
                chosen = usable[res.chosen[:k]]
                out.append(_finish(scene, chosen, res.round_time_us[k - 1],
                                   trial, method, k, cfg))
        else:
            for k in cfg.subset_sizes:
                chosen, select_us = _select(method, usable, Hc, k, cfg, trial)
                out.append(_finish(scene, chosen, select_us, trial, method, k, cfg))
    return out


def _trial_worker(args):
    cfg, trial = args
    return _trial_records(cfg, trial)


def run_sweep(cfg: SimConfig, workers: int = 1, progress=None) -> list:
    """Every (method, k, trial) record, sorted by that key."""
    jobs = [(cfg, t) for t in range(cfg.trials)]
    records = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for recs in pool.map(_trial_worker, jobs, chunksize=4):
                records.extend(recs)
                if progress:
                    progress(1)
    else:
        for job in jobs:
            records.extend(_trial_worker(job))
            if progress:
                progress(1)
    records.sort(key=TrialRecord.sort_key)
    return records


@dataclass
class RmsRow:
    method: str
    k: int
    rms_trans_m: float
    rms_rot_deg: float
    n_ok: int
    n_failed: int


def aggregate(records) -> dict:
    """RMS translational / rotational error per (method, k), failures excluded."""
    groups = {}
    for r in records:
        groups.setdefault((r.method, r.k), []).append(r)
    table = {}
    for (method, k), recs in sorted(groups.items()):
        ok = [r for r in recs if not r.failed]
        t = np.array([r.trans_err_m for r in ok])
        a = np.array([r.rot_err_deg for r in ok])
        table[(method, k)] = RmsRow(
            method, k,
            float(np.sqrt(np.mean(t**2))) if ok else math.nan,
            float(np.sqrt(np.mean(a**2))) if ok else math.nan,
            len(ok), len(recs) - len(ok))
    return table
