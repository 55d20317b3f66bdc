import dataclasses
import math

import numpy as np
import pytest

from goodfeat.estimator import NoiseModel
from goodfeat.geometry import project_points
from goodfeat.simulator import (ALL, METHODS, SimConfig, TrialRecord, aggregate,
                                derive_seed, generate_scene, run_sweep, run_trial)

QUIET = NoiseModel(0.0, 0.0, 0.0)
PAPER_NOISE = NoiseModel(1.0, 0.05, 0.05)


def small_cfg(**kw):
    base = dict(n_points=40, subset_sizes=(10, 25, 40), trials=3,
                methods=METHODS, noise=PAPER_NOISE)
    base.update(kw)
    return SimConfig(**base)


def strip_time(records):
    return [dataclasses.replace(r, select_time_us=0.0) for r in records]


def test_zero_noise_scene_is_exact():
    cfg = small_cfg(noise=QUIET)
    s = generate_scene(cfg, 5)
    np.testing.assert_array_equal(s.perturbed, s.landmarks)
    np.testing.assert_array_equal(s.observations, project_points(s.true_pose, s.landmarks, cfg.camera))


def test_scene_counts_and_visibility():
    cfg = SimConfig(n_points=200, depth_range=(1.0, 10.0), trials=1)
    s = generate_scene(cfg, 0)
    assert s.valid.sum() == 200 and len(s.observations) == 200
    clean = project_points(s.true_pose, s.landmarks, cfg.camera)
    assert cfg.camera.in_image(clean).all()
    assert (s.landmarks[:, 2] >= 1.0).all() and (s.landmarks[:, 2] <= 10.0).all()


def test_scene_is_deterministic():
    cfg = small_cfg()
    a, b = generate_scene(cfg, 9), generate_scene(cfg, 9)
    np.testing.assert_array_equal(a.observations, b.observations)
    np.testing.assert_array_equal(a.perturbed, b.perturbed)


def test_true_pose_within_perturbation_bounds():
    cfg = small_cfg()
    for seed in range(50):
        T = generate_scene(cfg, seed).true_pose
        assert np.all(np.abs(T.translation) <= 0.1)
        angle = np.degrees(np.arccos(np.clip((np.trace(T.rotation) - 1) / 2, -1, 1)))
        assert angle <= 5.0 + 1e-9


def test_map_noise_mean_law_of_large_numbers():
    cfg = SimConfig(n_points=200, noise=NoiseModel(1.0, 0.05, 0.05), trials=1)
    diffs = [generate_scene(cfg, derive_seed(0, t, "scene")).perturbed
             - generate_scene(cfg, derive_seed(0, t, "scene")).landmarks for t in range(300)]
    means = np.concatenate(diffs).mean(axis=0)
    assert np.all(np.abs(means - 0.05) <= 0.002)


def test_all_method_zero_noise_is_exact():
    cfg = small_cfg(noise=QUIET)
    rec = run_trial(generate_scene(cfg, 1), 40, ALL, cfg)
    assert not rec.failed and rec.trans_err_m < 1e-8 and rec.rot_err_deg < 1e-8


@pytest.mark.parametrize("method", ["Random", "MaxLogDet", "MaxTrace", "StochasticLogDet"])
def test_full_subset_reproduces_all(method):
    cfg = small_cfg()
    scene = generate_scene(cfg, 2)
    ref = run_trial(scene, 40, ALL, cfg)
    rec = run_trial(scene, 40, method, cfg)
    assert (rec.trans_err_m, rec.rot_err_deg) == (ref.trans_err_m, ref.rot_err_deg)


def test_run_trial_rejects_oversized_k_and_unknown_method():
    cfg = small_cfg()
    scene = generate_scene(cfg, 0)
    with pytest.raises(ValueError):
        run_trial(scene, 41, "MaxLogDet", cfg)
    with pytest.raises(ValueError):
        run_trial(scene, 5, "Nope", cfg)


def test_degenerate_subset_is_flagged():
    cfg = small_cfg(subset_sizes=(2,), methods=("MaxLogDet", "Random"), trials=2)
    records = run_sweep(cfg)
    assert len(records) == 4 and all(r.failed for r in records)
    table = aggregate(records)
    assert all(row.n_failed == 2 and row.n_ok == 0 for row in table.values())


def test_single_record_sweep():
    cfg = small_cfg(trials=1, methods=("MaxLogDet",), subset_sizes=(20,))
    assert len(run_sweep(cfg)) == 1


def test_sweep_row_count_and_order():
    cfg = small_cfg()
    records = run_sweep(cfg)
    assert len(records) == len(cfg.methods) * len(cfg.subset_sizes) * cfg.trials
    assert records == sorted(records, key=TrialRecord.sort_key)


def test_sweep_matches_per_trial_runs():
    # prefix reuse inside the sweep must agree with independent trials
    cfg = small_cfg()
    sweep = {r.sort_key(): r for r in run_sweep(cfg)}
    for trial in range(cfg.trials):
        scene = generate_scene(cfg, derive_seed(cfg.base_seed, trial, "scene"))
        for method in cfg.methods:
            for k in cfg.subset_sizes:
                rec = run_trial(scene, k, method, cfg, trial)
                ref = sweep[(method, k, trial)]
                assert (rec.trans_err_m, rec.rot_err_deg, rec.solve_iters) == \
                    (ref.trans_err_m, ref.rot_err_deg, ref.solve_iters)


def test_sweep_deterministic_across_schedules():
    cfg = small_cfg(trials=4)
    serial = strip_time(run_sweep(cfg))
    assert serial == strip_time(run_sweep(cfg))
    assert serial == strip_time(run_sweep(cfg, workers=2))


def test_adding_methods_keeps_existing_streams():
    a = run_sweep(small_cfg(methods=("Random",)))
    b = [r for r in run_sweep(small_cfg(methods=("MaxTrace", "Random"))) if r.method == "Random"]
    assert strip_time(a) == strip_time(b)


def test_aggregate_rms_matches_naive():
    records = run_sweep(small_cfg())
    table = aggregate(records)
    for (method, k), row in table.items():
        errs = [r.trans_err_m for r in records if r.method == method and r.k == k]
        rots = [r.rot_err_deg for r in records if r.method == method and r.k == k]
        assert row.rms_trans_m == pytest.approx(math.sqrt(sum(e * e for e in errs) / len(errs)))
        assert row.rms_rot_deg == pytest.approx(math.sqrt(sum(e * e for e in rots) / len(rots)))


@pytest.mark.parametrize("kw", [dict(subset_sizes=(50,)), dict(trials=0),
                                dict(depth_range=(0.0, 5.0)), dict(methods=("Best",)),
                                dict(epsilon=1.5)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        small_cfg(**kw)
