"""Row-block subset selection on the combined Jacobian.

Every selector works on a list of ``(3, 6)`` blocks and scores a candidate
set ``S`` through ``Q_S = sum_{i in S} Hc_i^T Hc_i``, evaluated with a fixed
ridge ``delta * I`` so that scores are finite before ``Q_S`` has full rank.
"""
from __future__ import annotations

import enum
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DELTA = 1e-6
BRUTE_FORCE_LIMIT = 10**6
SYMMETRY_TOL = 1e-9


class MetricKind(enum.Enum):
    MAX_TRACE = "trace"
    MIN_COND = "cond"
    MAX_MIN_EIG = "mineig"
    MAX_LOGDET = "logdet"

    @property
    def maximize(self) -> bool:
        return self is not MetricKind.MIN_COND

    @classmethod
    def parse(cls, name) -> "MetricKind":
        if isinstance(name, cls):
            return name
        aliases = {"maxtrace": "trace", "mincond": "cond", "maxmineig": "mineig",
                   "maxlogdet": "logdet"}
        key = str(name).lower().replace("-", "").replace("_", "")
        return cls(aliases.get(key, key))


@dataclass
class SelectionState:
    """Running accumulator of a selection."""

    Q: np.ndarray = field(default_factory=lambda: np.zeros((6, 6)))
    chosen: list = field(default_factory=list)
    delta: float = DEFAULT_DELTA

    def add(self, index: int, gram: np.ndarray) -> None:
        if index in self.chosen:
            raise ValueError(f"block {index} already chosen")
        self.chosen.append(index)
        self.Q = self.Q + gram


@dataclass
class SelectionResult:
    chosen: list
    metric_value: float
    evaluations: list  # candidate evaluations per round
    time_us: float
    # cumulative wall time after each round, so a prefix of a greedy run
    # can report its own cost
    round_time_us: list = field(default_factory=list)

    @property
    def total_evaluations(self) -> int:
        return int(sum(self.evaluations))


def _as_blocks(blocks) -> np.ndarray:
    B = np.asarray(blocks, dtype=float)
    if B.ndim == 2 and B.shape[1] == 18:
        B = B.reshape(-1, 3, 6)
    if B.ndim != 3 or B.shape[1:] != (3, 6):
        raise ValueError(f"expected (n, 3, 6) blocks, got shape {B.shape}")
    return B


def block_grams(blocks) -> np.ndarray:
    B = _as_blocks(blocks)
    return np.einsum("nij,nik->njk", B, B)


def logdet_spd(A: np.ndarray) -> float:
    """log det of a symmetric positive-definite matrix; ``-inf`` if it is not."""
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return -math.inf
    return 2.0 * float(np.sum(np.log(np.diagonal(L))))


def metric_value(Q, metric, delta: float = DEFAULT_DELTA) -> float:
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (6, 6):
        raise ValueError(f"expected a 6x6 matrix, got {Q.shape}")
    if not np.allclose(Q, Q.T, rtol=0.0, atol=SYMMETRY_TOL):
        raise ValueError("information matrix is not symmetric")
    return _score(Q + delta * np.eye(6), MetricKind.parse(metric))


def _score(A, metric):
    # A already carries the ridge
    if metric is MetricKind.MAX_LOGDET:
        return logdet_spd(A)
    if metric is MetricKind.MAX_TRACE:
        return float(np.trace(A))
    w = np.linalg.eigvalsh(A)
    if metric is MetricKind.MAX_MIN_EIG:
        return float(w[0])
    return float(w[-1] / w[0]) if w[0] > 0 else math.inf


def logdet_gain(blocks, chosen, delta: float = DEFAULT_DELTA) -> float:
    """``logdet(Q_S + delta I) - logdet(delta I)``, non-negative and zero for S = {}."""
    G = block_grams(blocks)
    Q = G[list(chosen)].sum(axis=0) if len(chosen) else np.zeros((6, 6))
    return logdet_spd(Q + delta * np.eye(6)) - 6.0 * math.log(delta)


def _check_k(n, k):
    if not 1 <= k <= n:
        raise ValueError(f"subset size k={k} must satisfy 1 <= k <= n={n}")


def _better(value, best, maximize):
    return value > best if maximize else value < best


def _run_rounds(grams, k, metric, delta, candidates_for_round):
    """Shared greedy loop; ``candidates_for_round(remaining)`` picks the pool."""
    n = len(grams)
    ridge = delta * np.eye(6)
    state = SelectionState(delta=delta)
    remaining = list(range(n))
    evaluations, round_time = [], []
    best_value = math.nan
    t0 = time.perf_counter_ns()
    for _ in range(k):
        pool = candidates_for_round(remaining)
        best_i, best_value = -1, -math.inf if metric.maximize else math.inf
        base = state.Q + ridge
        for i in pool:  # ascending order, strict comparison => lowest index wins ties
            value = _score(base + grams[i], metric)
            if best_i < 0 or _better(value, best_value, metric.maximize):
                best_i, best_value = i, value
        evaluations.append(len(pool))
        state.add(best_i, grams[best_i])
        remaining.remove(best_i)
        round_time.append((time.perf_counter_ns() - t0) / 1e3)
    return SelectionResult(state.chosen, float(best_value), evaluations,
                           round_time[-1], round_time)


def greedy_select(blocks, k: int, metric=MetricKind.MAX_LOGDET,
                  delta: float = DEFAULT_DELTA) -> SelectionResult:
    """Add, one per round, the block that most improves the metric."""
    grams = block_grams(blocks)
    _check_k(len(grams), k)
    return _run_rounds(grams, k, MetricKind.parse(metric), delta, lambda rem: rem)


def stochastic_sample_size(n: int, k: int, epsilon: float) -> int:
    """Candidates drawn per round, ``ceil(n / k * ln(1 / epsilon))``."""
    return math.ceil(n / k * math.log(1.0 / epsilon))


def stochastic_greedy_logdet(blocks, k: int, epsilon: float = 0.1,
                             delta: float = DEFAULT_DELTA,
                             rng_seed: int = 0) -> SelectionResult:
    """Greedy logdet maximisation over a random candidate sample per round.

    Each round draws ``min(remaining, ceil(n / k * ln(1 / epsilon)))``
    distinct not-yet-chosen blocks and keeps the best of them.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    grams = block_grams(blocks)
    n = len(grams)
    _check_k(n, k)
    s = stochastic_sample_size(n, k, epsilon)
    rng = np.random.default_rng(rng_seed)

    def sample(remaining):
        if s >= len(remaining):
            return remaining
        picked = rng.choice(len(remaining), size=s, replace=False)
        return [remaining[j] for j in np.sort(picked)]

    return _run_rounds(grams, k, MetricKind.MAX_LOGDET, delta, sample)


def brute_force_select(blocks, k: int, metric=MetricKind.MAX_LOGDET,
                       delta: float = DEFAULT_DELTA,
                       limit: int = BRUTE_FORCE_LIMIT) -> SelectionResult:
    """Exact optimum by enumerating every k-subset (lexicographic tie-break)."""
    grams = block_grams(blocks)
    n = len(grams)
    _check_k(n, k)
    total = math.comb(n, k)
    if total > limit:
        raise OverflowError(f"C({n}, {k}) = {total} subsets exceeds limit {limit}")
    metric = MetricKind.parse(metric)
    ridge = delta * np.eye(6)
    t0 = time.perf_counter_ns()
    best, best_value = None, None
    for combo in itertools.combinations(range(n), k):
        value = _score(grams[list(combo)].sum(axis=0) + ridge, metric)
        if best is None or _better(value, best_value, metric.maximize):
            best, best_value = combo, value
    elapsed = (time.perf_counter_ns() - t0) / 1e3
    return SelectionResult(list(best), float(best_value), [total], elapsed, [elapsed])


def random_select(n: int, k: int, rng_seed: int = 0) -> list:
    """Uniform k-subset of ``range(n)``, returned sorted."""
    if not 0 <= k <= n:
        raise ValueError(f"subset size k={k} must satisfy 0 <= k <= n={n}")
    rng = np.random.default_rng(rng_seed)
    return sorted(int(i) for i in rng.choice(n, size=k, replace=False))
