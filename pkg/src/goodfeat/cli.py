"""Command-line front end: ``simulate``, ``select``, ``bench`` and ``verify``.

Exit codes: 0 success, 2 usage or validation error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import checks
from .estimator import GaussNewtonConfig, NoiseModel
from .geometry import CameraIntrinsics
from .selector import (DEFAULT_DELTA, MetricKind, block_grams, brute_force_select,
                       greedy_select, logdet_gain, metric_value, random_select,
                       stochastic_greedy_logdet)
from .simulator import PosePerturbation, SimConfig, aggregate, run_sweep

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3
SIM_COLUMNS = ("trial", "method", "k", "trans_err_m", "rot_err_deg",
               "select_time_us", "solve_iters", "failed")
BENCH_COLUMNS = ("trial", "n", "k", "epsilon", "method", "time_us",
                 "logdet_gain", "evaluations")
DEFAULT_SEED = 0


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


# ---------------------------------------------------------------------------
# Config JSON <-> SimConfig
# ---------------------------------------------------------------------------

_NESTED = {"pose_perturbation": PosePerturbation, "noise": NoiseModel,
           "camera": CameraIntrinsics, "gn": GaussNewtonConfig}


def _build(cls, data, prefix=""):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: expected a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{prefix}{key}: unknown field")
    kwargs = {}
    for key, value in data.items():
        if key in _NESTED and cls is SimConfig:
            kwargs[key] = _build(_NESTED[key], value, f"{key}.")
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        # validation messages already start with the field name
        if prefix or ":" not in msg:
            msg = f"{prefix.rstrip('.') or cls.__name__}: {msg}"
        raise ConfigError(msg) from None


def config_from_dict(data) -> SimConfig:
    """Build a :class:`SimConfig`; missing fields take the defaults."""
    return _build(SimConfig, data)


def config_to_dict(cfg: SimConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["depth_range"] = list(cfg.depth_range)
    d["subset_sizes"] = list(cfg.subset_sizes)
    d["methods"] = list(cfg.methods)
    return d


def write_sim_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIM_COLUMNS)
        for r in sorted(records, key=lambda r: r.sort_key()):
            w.writerow([fmt(getattr(r, c)) for c in SIM_COLUMNS])


def summary_path(out_path) -> Path:
    return Path(out_path).with_suffix(".summary.json")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _fail(code, msg):
    print(f"error: {msg}", file=sys.stderr)
    return code


def cmd_simulate(config_path, out_path, seed=None, workers=1) -> int:
    try:
        raw = json.loads(Path(config_path).read_text())
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        return _fail(EXIT_USAGE, f"config is not valid JSON: {exc}")
    if seed is not None and isinstance(raw, dict):
        raw["base_seed"] = seed
    try:
        cfg = config_from_dict(raw)
    except ConfigError as exc:
        return _fail(EXIT_USAGE, f"invalid config: {exc}")

    records = run_sweep(cfg, workers=workers)
    table = aggregate(records)
    summary = {
        "config": config_to_dict(cfg),
        "rms": [dataclasses.asdict(row) for row in table.values()],
    }
    try:
        write_sim_csv(records, out_path)
        summary_path(out_path).write_text(json.dumps(summary, indent=2) + "\n")
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write output: {exc}")
    return EXIT_OK


def load_blocks(path) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or "blocks" not in data:
        raise ValueError('expected an object with a "blocks" list')
    rows = data["blocks"]
    if not isinstance(rows, list) or not rows:
        raise ValueError('"blocks" must be a non-empty list')
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 18:
            raise ValueError(f"blocks[{i}]: expected 18 numbers (row-major 3x6)")
    B = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(B)):
        raise ValueError("blocks contain non-finite values")
    return B.reshape(-1, 3, 6)


def cmd_select(blocks_path, k, metric, method, epsilon=0.1, seed=DEFAULT_SEED,
               out=None) -> int:
    try:
        B = load_blocks(blocks_path)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read blocks: {exc}")
    except (ValueError, TypeError) as exc:
        return _fail(EXIT_USAGE, f"malformed blocks file: {exc}")
    n = len(B)
    if not 1 <= k <= n:
        return _fail(EXIT_USAGE, f"--k must satisfy 1 <= k <= {n}")
    metric = MetricKind.parse(metric)
    if method == "stochastic" and metric is not MetricKind.MAX_LOGDET:
        return _fail(EXIT_USAGE, "the stochastic method only supports --metric logdet")
    if method == "stochastic" and not 0 < epsilon < 1:
        return _fail(EXIT_USAGE, "--epsilon must lie in (0, 1)")

    if method == "greedy":
        res = greedy_select(B, k, metric)
        chosen, value, t_us = res.chosen, res.metric_value, res.time_us
    elif method == "stochastic":
        res = stochastic_greedy_logdet(B, k, epsilon, rng_seed=seed)
        chosen, value, t_us = res.chosen, res.metric_value, res.time_us
    elif method == "bruteforce":
        try:
            res = brute_force_select(B, k, metric)
        except OverflowError as exc:
            return _fail(EXIT_USAGE, str(exc))
        chosen, value, t_us = res.chosen, res.metric_value, res.time_us
    else:
        t0 = time.perf_counter_ns()
        chosen = random_select(n, k, seed)
        t_us = (time.perf_counter_ns() - t0) / 1e3
        value = metric_value(block_grams(B)[chosen].sum(axis=0), metric, DEFAULT_DELTA)
    print(json.dumps({"chosen": [int(i) for i in chosen],
                      "metric_value": float(value), "time_us": float(t_us)}),
          file=out or sys.stdout)
    return EXIT_OK


def bench_blocks(n, trial, seed=DEFAULT_SEED) -> np.ndarray:
    rng = np.random.default_rng([seed, trial])
    return checks.random_rank2_blocks(rng, n)


def run_bench(n, k, epsilon, trials, seed=DEFAULT_SEED, delta=DEFAULT_DELTA):
    """Paired greedy / stochastic runs; returns (records, summary)."""
    records, speedups, ratios = [], [], []
    for trial in range(trials):
        B = bench_blocks(n, trial, seed)
        g = greedy_select(B, k, MetricKind.MAX_LOGDET, delta)
        s = stochastic_greedy_logdet(B, k, epsilon, delta, rng_seed=int(
            np.random.SeedSequence([seed, trial, 1]).generate_state(1)[0]))
        gain_g = logdet_gain(B, g.chosen, delta)
        gain_s = logdet_gain(B, s.chosen, delta)
        for name, res, gain in (("greedy", g, gain_g), ("stochastic", s, gain_s)):
            records.append({"trial": trial, "n": n, "k": k, "epsilon": float(epsilon),
                            "method": name, "time_us": max(res.time_us, 1e-3),
                            "logdet_gain": gain, "evaluations": res.total_evaluations})
        speedups.append(g.time_us / max(s.time_us, 1e-3))
        ratios.append(gain_s / gain_g if gain_g > 0 else 1.0)
    summary = {"n": n, "k": k, "epsilon": epsilon, "trials": trials,
               "median_speedup": statistics.median(speedups),
               "median_gain_ratio": statistics.median(ratios),
               "min_gain_ratio": min(ratios)}
    return records, summary


def cmd_bench(n, k, epsilon, trials, out_path, seed=DEFAULT_SEED) -> int:
    if not 1 <= k <= n:
        return _fail(EXIT_USAGE, "need 1 <= k <= n")
    if not 0 < epsilon < 1:
        return _fail(EXIT_USAGE, "--epsilon must lie in (0, 1)")
    if trials < 1:
        return _fail(EXIT_USAGE, "--trials must be >= 1")
    records, summary = run_bench(n, k, epsilon, trials, seed)
    try:
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BENCH_COLUMNS)
            for r in records:
                w.writerow([fmt(r[c]) for c in BENCH_COLUMNS])
        summary_path(out_path).write_text(json.dumps(summary, indent=2) + "\n")
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write output: {exc}")
    print(json.dumps(summary))
    return EXIT_OK


def cmd_verify(suite, samples=10_000, seed=0, sigma_z=None, sigma_p=None, mu_p=None,
               out=None) -> int:
    if suite not in checks.SUITES:
        return _fail(EXIT_USAGE, f"unknown suite {suite!r}; choose from {', '.join(checks.SUITES)}")
    kwargs = {"seed": seed}
    if suite in ("covariance", "bias"):
        kwargs["samples"] = samples
    overrides = {"sigma_z": sigma_z, "sigma_p": sigma_p, "mu_p": mu_p}
    allowed = {"covariance": ("sigma_z", "sigma_p"), "bias": ("sigma_p", "mu_p")}.get(suite, ())
    for name, value in overrides.items():
        if value is None:
            continue
        if name not in allowed:
            return _fail(EXIT_USAGE, f"--{name.replace('_', '-')} does not apply to suite {suite}")
        kwargs[name] = value
    results = checks.run_suite(suite, **kwargs)
    for r in results:
        print(r.line(), file=out or sys.stdout)
    return EXIT_OK if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="goodfeat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the subset-size sweep and write a CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None, help="override base_seed")
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("select", help="select k blocks from a JSON block file")
    s.add_argument("--blocks", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--metric", required=True, choices=[m.value for m in MetricKind])
    s.add_argument("--method", required=True,
                   choices=["greedy", "stochastic", "random", "bruteforce"])
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)

    s = sub.add_parser("bench", help="time greedy against stochastic greedy")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)

    s = sub.add_parser("verify", help="run a verification suite")
    s.add_argument("--suite", required=True)
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sigma-z", type=float, default=None)
    s.add_argument("--sigma-p", type=float, default=None)
    s.add_argument("--mu-p", type=float, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out, args.seed, args.workers)
    if args.command == "select":
        return cmd_select(args.blocks, args.k, args.metric, args.method,
                          args.epsilon, args.seed)
    if args.command == "bench":
        return cmd_bench(args.n, args.k, args.epsilon, args.trials, args.out, args.seed)
    if args.suite not in checks.SUITES:
        parser.print_usage(sys.stderr)
    return cmd_verify(args.suite, args.samples, args.seed, args.sigma_z,
                      args.sigma_p, args.mu_p)


if __name__ == "__main__":
    sys.exit(main())
