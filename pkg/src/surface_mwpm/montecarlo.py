"""Monte Carlo estimation of logical error rates and thresholds.

Every trial draws from its own Philox stream keyed by the master seed and the
trial index, so results do not depend on how trials are split across workers,
and the same trial index sees the same random numbers at every ``(d, p)``.
Trials are grouped in fixed-size blocks; a block result is a pair of counters
and blocks are merged by addition.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .decoder import check_logical_failure, decode_2d
from .errors import NoCrossing
from .lattice import ErrorState, LatticeConfig, Mode, NoiseParams, NoisyMemory, Syndrome, sample_flips, syndrome_array
from .streaming import StreamingDecoder
from .syndrome_graph import Pruning

log = logging.getLogger(__name__)

BLOCK_SIZE = 1000
DEFAULT_ROUNDS = 100
DEFAULT_VERIFY_EVERY = 10

CSV_FIELDS = ("mode", "d", "p", "q", "pruning", "trials", "rounds", "failures",
              "p_l", "ci_lo", "ci_hi", "seed")


@dataclass(frozen=True)
class FixedTrials:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("trial count must be at least 1")


@dataclass(frozen=True)
class FixedFailures:
    """Run until ``f`` failures are seen (or ``max_trials`` trials, if given)."""

    f: int
    max_trials: int | None = None

    def __post_init__(self):
        if self.f < 1:
            raise ValueError("failure target must be at least 1")


def wilson_interval(failures: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    lo, hi = proportion_confint(failures, n, alpha=alpha, method="wilson")
    return max(0.0, float(lo)), min(1.0, float(hi))


@dataclass
class TrialStats:
    """Counts for one ``(d, p)`` point.

    In 2-D a trial is one decode and ``rounds == trials``.  In 3-D a trial is
    one stream and ``rounds`` counts the noisy rounds over all streams.
    """

    mode: Mode
    d: int
    p: float
    q: float
    pruning: Pruning
    seed: int
    trials: int = 0
    rounds: int = 0
    failures: int = 0
    matchings: int = 0

    def __post_init__(self):
        if self.failures > max(self.trials, self.rounds):
            raise ValueError("more failures than samples")

    @property
    def samples(self) -> int:
        return self.rounds if self.mode is Mode.THREE_D else self.trials

    @property
    def p_l(self) -> float:
        return self.failures / self.samples if self.samples else 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.failures, self.samples)

    def merge(self, other: "TrialStats") -> "TrialStats":
        return replace(self, trials=self.trials + other.trials, rounds=self.rounds + other.rounds,
                       failures=self.failures + other.failures,
                       matchings=self.matchings + other.matchings)

    def csv_row(self) -> dict[str, str]:
        lo, hi = self.interval
        return {
            "mode": self.mode.value, "d": str(self.d), "p": _fmt(self.p), "q": _fmt(self.q),
            "pruning": self.pruning.value, "trials": str(self.trials), "rounds": str(self.rounds),
            "failures": str(self.failures), "p_l": _fmt(self.p_l), "ci_lo": _fmt(lo),
            "ci_hi": _fmt(hi), "seed": str(self.seed),
        }


def _fmt(x: float) -> str:
    return np.format_float_positional(float(x), precision=10, trim="-")


@dataclass
class SweepSpec:
    ds: Sequence[int]
    ps: Sequence[float]
    stop: FixedTrials | FixedFailures
    seed: int = 0
    mode: Mode = Mode.TWO_D
    q: float | None = None
    pruning: Pruning = Pruning.SHADOWED
    rounds: int = DEFAULT_ROUNDS
    verify_every: int = DEFAULT_VERIFY_EVERY

    def __post_init__(self):
        if not self.ds or not self.ps:
            raise ValueError("a sweep needs at least one distance and one error rate")
        self.mode = Mode(self.mode)
        self.pruning = Pruning(self.pruning)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial: Philox keyed by ``seed``, counter offset by ``trial``."""
    key = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, trial]))


def run_trial_2d(config: LatticeConfig, p: float, rng: np.random.Generator,
                 pruning: Pruning = Pruning.SHADOWED) -> int:
    data = sample_flips(config, p, rng)
    syndrome = Syndrome.from_array(syndrome_array(data))
    correction = decode_2d(syndrome, config, pruning, verify=True)
    return check_logical_failure(ErrorState(config, data), correction, restore=False)


def run_stream_3d(config: LatticeConfig, params: NoiseParams, rounds: int,
                  rng: np.random.Generator, verify_every: int = DEFAULT_VERIFY_EVERY) -> int:
    """Decode one stream of ``rounds`` noisy rounds; returns the number of logical flips seen."""
    mem = NoisyMemory(config, params, rng)
    dec = StreamingDecoder(config)
    failures = last = 0
    for t in range(rounds):
        dec.process_round(mem.step())
        if (t + 1) % verify_every == 0 or t + 1 == rounds:
            bit = dec.verify_logical(mem.perfect_events(), mem.state.data)
            failures += bit != last
            last = bit
    return failures


def _run_block(args) -> tuple[int, int, int, int]:
    mode, d, p, q, pruning, seed, start, count, rounds, verify_every = args
    failures = total_rounds = 0
    if mode is Mode.TWO_D:
        cfg = LatticeConfig(d, Mode.TWO_D)
        for trial in range(start, start + count):
            failures += run_trial_2d(cfg, p, trial_rng(seed, trial), pruning)
        return count, count, failures, count
    cfg = LatticeConfig(d, Mode.THREE_D)
    params = NoiseParams(p, q)
    for trial in range(start, start + count):
        failures += run_stream_3d(cfg, params, rounds, trial_rng(seed, trial), verify_every)
        total_rounds += rounds
    return count, total_rounds, failures, 0


def worker_count() -> int:
    env = os.environ.get("LB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"LB_THREADS must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"LB_THREADS must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


class _Pool:
    def __init__(self, workers: int):
        self.workers = workers
        self._ex = ProcessPoolExecutor(workers) if workers > 1 else None

    def map(self, fn, jobs):
        if self._ex is None:
            return [fn(j) for j in jobs]
        return list(self._ex.map(fn, jobs))

    def close(self):
        if self._ex is not None:
            self._ex.shutdown()


def run_point(d: int, p: float, stop: FixedTrials | FixedFailures, seed: int, *,
              mode: Mode | str = Mode.TWO_D, q: float | None = None,
              pruning: Pruning | str = Pruning.SHADOWED, rounds: int = DEFAULT_ROUNDS,
              verify_every: int = DEFAULT_VERIFY_EVERY, workers: int | None = None,
              block_size: int | None = None, pool: _Pool | None = None) -> TrialStats:
    """Estimate the logical error rate at one ``(d, p)``.

    2-D: each trial samples fresh bit flips, decodes and records the logical
    failure bit.  3-D: each trial is a stream of ``rounds`` noisy rounds with
    a logical check every ``verify_every`` rounds, and ``p_l`` is failures per
    round.  With :class:`FixedFailures` blocks are consumed in index order and
    the result is the shortest block prefix reaching the target, so it does
    not depend on the worker count.
    """
    mode = Mode(mode)
    pruning = Pruning(pruning)
    params = NoiseParams(p, q)
    qv = params.measurement_rate(mode)
    if mode is Mode.THREE_D and (rounds < 1 or verify_every < 1):
        raise ValueError("rounds and verify_every must be positive")
    if block_size is None:
        block_size = BLOCK_SIZE if mode is Mode.TWO_D else max(1, 10_000 // rounds)
    stats = TrialStats(mode, d, p, qv, pruning, seed)
    own_pool = pool is None
    pool = pool or _Pool(workers or worker_count())
    limit = stop.n if isinstance(stop, FixedTrials) else stop.max_trials
    try:
        next_start = 0
        while True:
            if isinstance(stop, FixedFailures) and stats.failures >= stop.f:
                break
            if limit is not None and next_start >= limit:
                break
            jobs = []
            for _ in range(pool.workers):
                if limit is not None and next_start >= limit:
                    break
                count = block_size if limit is None else min(block_size, limit - next_start)
                jobs.append((mode, d, p, qv, pruning, seed, next_start, count, rounds, verify_every))
                next_start += count
            for trials, nrounds, failures, matchings in pool.map(_run_block, jobs):
                if isinstance(stop, FixedFailures) and stats.failures >= stop.f:
                    break
                stats = stats.merge(TrialStats(mode, d, p, qv, pruning, seed, trials, nrounds,
                                               failures, matchings))
            log.info("d=%d p=%s: %d trials, %d failures", d, _fmt(p), stats.trials, stats.failures)
    finally:
        if own_pool:
            pool.close()
    return stats


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[TrialStats]:
    pool = _Pool(workers or worker_count())
    try:
        out = []
        for d in spec.ds:
            for p in spec.ps:
                t0 = time.perf_counter()
                out.append(run_point(d, p, spec.stop, spec.seed, mode=spec.mode, q=spec.q,
                                     pruning=spec.pruning, rounds=spec.rounds,
                                     verify_every=spec.verify_every, pool=pool))
                log.info("finished d=%d p=%s in %.1fs", d, _fmt(p), time.perf_counter() - t0)
        return out
    finally:
        pool.close()


@dataclass
class ThresholdEstimate:
    p_th: float
    error: float
    crossings: list[tuple[int, int, float, float]] = field(default_factory=list)


def _log_rate(failures: int, n: int) -> tuple[float, float]:
    """Smoothed log rate and its approximate standard error."""
    rate = (failures + 0.5) / (n + 1)
    se = math.sqrt((1.0 - rate) / (rate * (n + 1)))
    return math.log(rate), se


def _fit(ps, ys, ses):
    x = np.asarray(ps, dtype=float)
    coef, cov = np.polyfit(x, np.asarray(ys), 1, w=1.0 / np.asarray(ses), cov="unscaled")
    return coef, cov


def estimate_threshold(results: Sequence[TrialStats], window: int = 1) -> ThresholdEstimate:
    """Average crossing point of ``log p_L(p)`` curves for adjacent distances.

    For each adjacent pair the sign change of ``log p_L(d2) - log p_L(d1)``
    is located on the shared ``p`` grid, straight lines are fitted to each
    curve over the bracketing points plus ``window`` neighbours on each side,
    and the lines are intersected.  Pairs that never cross are skipped.
    """
    by_d: dict[int, dict[float, TrialStats]] = {}
    for s in results:
        by_d.setdefault(s.d, {})[s.p] = s
    ds = sorted(by_d)
    if len(ds) < 2:
        raise ValueError("need at least two distances")
    crossings = []
    for d1, d2 in zip(ds, ds[1:]):
        ps = sorted(set(by_d[d1]) & set(by_d[d2]))
        if len(ps) < 3:
            raise ValueError(f"need at least three shared p values for d={d1}, {d2}")
        curves = []
        for d in (d1, d2):
            pts = [_log_rate(by_d[d][p].failures, by_d[d][p].samples) for p in ps]
            curves.append(([y for y, _ in pts], [se for _, se in pts]))
        diff = [b - a for a, b in zip(curves[0][0], curves[1][0])]
        bracket = next((i for i in range(len(ps) - 1) if diff[i] < 0 <= diff[i + 1]), None)
        if bracket is None:
            continue
        lo = max(0, bracket - window)
        hi = min(len(ps), bracket + 2 + window)
        xs = ps[lo:hi]
        (a1, b1), c1 = _fit(xs, curves[0][0][lo:hi], curves[0][1][lo:hi])
        (a2, b2), c2 = _fit(xs, curves[1][0][lo:hi], curves[1][1][lo:hi])
        if a1 == a2:
            continue
        x = (b2 - b1) / (a1 - a2)
        # Delta method over the two independent fits.
        g1 = np.array([-x, -1.0]) / (a1 - a2)
        g2 = np.array([x, 1.0]) / (a1 - a2)
        var = float(g1 @ c1 @ g1 + g2 @ c2 @ g2)
        crossings.append((d1, d2, float(x), math.sqrt(max(var, 0.0))))
    if not crossings:
        raise NoCrossing("no adjacent pair of curves crosses in the sampled range")
    xs = np.array([c[2] for c in crossings])
    errs = np.array([c[3] for c in crossings])
    err = math.sqrt(float((errs ** 2).sum())) / len(xs)
    if len(xs) > 1:
        err = math.hypot(err, float(xs.std(ddof=1)) / math.sqrt(len(xs)))
    return ThresholdEstimate(float(xs.mean()), err, crossings)


def benchmark_rounds(d: int, p: float, rounds: int, seed: int = 0) -> float:
    """Mean wall time per round (seconds) for streaming 3-D decoding with ``q = p``."""
    cfg = LatticeConfig(d, Mode.THREE_D)
    mem = NoisyMemory(cfg, NoiseParams(p), trial_rng(seed, 0))
    dec = StreamingDecoder(cfg)
    events = [mem.step() for _ in range(rounds)]
    t0 = time.perf_counter()
    for evs in events:
        dec.process_round(evs)
    return (time.perf_counter() - t0) / rounds
