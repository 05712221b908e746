"""Acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL verdict that is printed in the pytest
terminal summary.  Every matching in criteria 1-4 goes through the dual
certificate check; a violation raises inside the run and fails that test
(and, through the shared counter, criterion 5).
"""

import itertools
import math
import subprocess
import sys

import numpy as np
import pytest

from surface_mwpm.blossom import Journal, Matcher, mwpm
from surface_mwpm.decoder import check_logical_failure, decode_2d
from surface_mwpm.lattice import (ErrorState, LatticeConfig, Mode, NoiseParams, NoisyMemory, measure_z_stabilizers,
                                  sample_flips, sample_record, syndrome_array, Syndrome)
from surface_mwpm.montecarlo import FixedTrials, SweepSpec, estimate_threshold, run_point, run_sweep
from surface_mwpm.oracle import brute_force_mwpm
from surface_mwpm.streaming import StreamingDecoder, decode_record_batch, decode_record_streaming
from surface_mwpm.syndrome_graph import Pruning, build_graph

from conftest import random_syndrome

RESULTS: dict[int, str] = {}
CERTIFIED = {"matchings": 0, "violations": 0}

THRESHOLD_DS = (3, 5, 7, 11)
THRESHOLD_PS = (0.08, 0.09, 0.095, 0.10, 0.105, 0.11, 0.12)
TRIALS = int(__import__("os").environ.get("ACCEPT_TRIALS", 100_000))


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(RESULTS[n])


@pytest.fixture(autouse=True)
def _fail_line(request):
    yield
    n = getattr(request.function, "criterion", None)
    if n is not None and n not in RESULTS:
        RESULTS[n] = f"criterion {n}: FAIL (raised before completing)"


def criterion(n):
    def wrap(fn):
        fn.criterion = n
        return fn
    return wrap


def _certified(fn, *args, **kw):
    try:
        out = fn(*args, **kw)
    except AssertionError:
        CERTIFIED["violations"] += 1
        raise
    return out


@criterion(1)
def test_threshold_reproduction():
    spec = SweepSpec(THRESHOLD_DS, THRESHOLD_PS, FixedTrials(TRIALS), seed=2024, pruning=Pruning.SHADOWED)
    results = _certified(run_sweep, spec)
    CERTIFIED["matchings"] += sum(s.matchings for s in results)
    est = estimate_threshold(results)
    for s in results:
        print(f"d={s.d} p={s.p} p_L={s.p_l:.5f} ({s.failures}/{s.trials})")
    pairs = ", ".join(f"{a}-{b}:{x:.4f}" for a, b, x, _ in est.crossings)
    ok = 0.0975 <= est.p_th <= 0.1075
    record(1, ok, f"threshold {est.p_th:.4f} +/- {est.error:.4f}, target [0.0975, 0.1075]; pairs {pairs}")
    assert ok


@criterion(2)
def test_subthreshold_ordering():
    stats = [_certified(run_point, d, 0.05, FixedTrials(TRIALS), seed=77) for d in THRESHOLD_DS]
    CERTIFIED["matchings"] += sum(s.matchings for s in stats)
    text = "; ".join(f"d={s.d} p_L={s.p_l:.2e} [{s.interval[0]:.2e}, {s.interval[1]:.2e}]" for s in stats)
    ok = all(b.p_l < a.p_l and b.interval[1] < a.interval[0] for a, b in zip(stats, stats[1:]))
    record(2, ok, text)
    assert ok


@criterion(3)
def test_oracle_equivalence():
    rng = np.random.default_rng(3)
    n, mismatches = 10_000, 0
    for _ in range(n):
        d = int(rng.choice([3, 5, 7, 9, 11, 13, 15]))
        k = int(rng.integers(4, min(12, (d - 1) * d) + 1))
        syn = random_syndrome(rng, d, k)
        g = build_graph(syn, LatticeConfig(d), rng.choice(["complete", "shadowed"]))
        res = _certified(mwpm, g, verify=True)
        CERTIFIED["matchings"] += 1
        mismatches += res.weight != brute_force_mwpm(build_graph(syn, LatticeConfig(d), "complete"))[0]
    record(3, mismatches == 0, f"{n - mismatches}/{n} weights equal the exhaustive optimum")
    assert mismatches == 0


@criterion(4)
def test_pruning_equivalence():
    rng = np.random.default_rng(4)
    n, mismatches = 100_000, 0
    ds = (5, 7, 9, 11, 13, 15)
    ps = (0.05, 0.10, 0.15)
    pruned_edges = total_edges = 0
    for i in range(n):
        d, p = ds[i % len(ds)], ps[(i // len(ds)) % len(ps)]
        cfg = LatticeConfig(d)
        syn = Syndrome.from_array(syndrome_array(sample_flips(cfg, p, rng)))
        full = build_graph(syn, cfg, Pruning.COMPLETE)
        pruned = build_graph(syn, cfg, Pruning.SHADOWED)
        total_edges += len(full.edges)
        pruned_edges += len(pruned.edges)
        a = _certified(mwpm, full, verify=True)
        b = _certified(mwpm, pruned, verify=True)
        CERTIFIED["matchings"] += 2
        mismatches += a.weight != b.weight
    record(4, mismatches == 0, f"{n - mismatches}/{n} equal weights at d in {ds}, p in {ps}; "
                               f"shadowing kept {pruned_edges / max(total_edges, 1):.1%} of edges")
    assert mismatches == 0


@criterion(5)
def test_optimality_certificates():
    m, v = CERTIFIED["matchings"], CERTIFIED["violations"]
    ran = all(k in RESULTS for k in (1, 2, 3, 4))
    ok = ran and v == 0 and m > 0
    record(5, ok, f"{m} certified matchings from criteria 1-4, {v} violations"
                  + ("" if ran else "; some of criteria 1-4 did not run"))
    assert ok


@criterion(6)
def test_exhaustive_small_code():
    cfg = LatticeConfig(3)
    grid = [(i, j) for i in range(0, cfg.n, 2) for j in range(0, cfg.n, 2)]

    def fails(sites):
        state = ErrorState.from_flips(cfg, sites)
        return check_logical_failure(state, decode_2d(measure_z_stabilizers(state), cfg))

    single = sum(fails([s]) for s in grid)
    double = sum(fails(p) for p in itertools.combinations(grid, 2))
    single_all = sum(fails([s]) for s in cfg.data_sites())
    double_all = sum(fails(p) for p in itertools.combinations(cfg.data_sites(), 2))
    ok = len(grid) == 9 and single == 0 and double >= 1 and single_all == 0 and double_all >= 1
    record(6, ok, f"singles {single}/9 failed, pairs {double}/36 failed; whole lattice: singles "
                  f"{single_all}/{cfg.num_data}, pairs {double_all}/{math.comb(cfg.num_data, 2)}")
    assert ok


@criterion(7)
def test_streaming_equals_batch():
    rng = np.random.default_rng(7)
    n, mismatches, rollbacks = 1000, 0, 0
    for i in range(n):
        d = (3, 5)[i % 2]
        p = (0.01, 0.03)[(i // 2) % 2]
        rounds = int(rng.integers(100, 301))
        rec = sample_record(LatticeConfig(d, Mode.THREE_D), NoiseParams(p, p), rounds, rng)
        fb, _ = decode_record_batch(rec)
        fs, dec = decode_record_streaming(rec, trim=True, multiple=4)
        rollbacks += dec.rollbacks
        mismatches += fb != fs
    record(7, mismatches == 0, f"{n - mismatches}/{n} records give the same failure bit; {rollbacks} rollbacks")
    assert mismatches == 0


@criterion(8)
def test_rollback_exactness():
    rng = np.random.default_rng(8)
    cycles, bad = 0, 0
    for _ in range(600):
        d = int(rng.choice([5, 9, 15]))
        g = build_graph(random_syndrome(rng, d, int(rng.integers(1, min(40, (d - 1) * d) + 1))), LatticeConfig(d))
        m = Matcher.from_graph(g, journal=Journal())
        # undo from a random point partway through the decode as well as from the end
        for _ in range(int(rng.integers(0, 3))):
            root = m.next_root()
            if root is not None:
                m.grow_from(root)
        snap = m.snapshot()
        mark = m.mark()
        m.solve()
        m.undo_to_mark(mark)
        bad += m.snapshot() != snap
        cycles += 1
    for _ in range(40):
        cfg = LatticeConfig(int(rng.choice([3, 5])), Mode.THREE_D)
        mem = NoisyMemory(cfg, NoiseParams(0.03), rng)
        dec = StreamingDecoder(cfg)
        for t in range(100):
            dec.process_round(mem.step())
            if t % 10 == 9:
                snap = (dec.matcher.snapshot(), dict(dec.history.coords), dec.history.newest,
                        dec.history.final, dec.deferred, dec.max_depth)
                dec.verify_logical(mem.perfect_events(), mem.state.data)
                bad += snap != (dec.matcher.snapshot(), dict(dec.history.coords), dec.history.newest,
                                dec.history.final, dec.deferred, dec.max_depth)
                cycles += 1
    ok = cycles >= 1000 and bad == 0
    record(8, ok, f"{cycles - bad}/{cycles} mark/decode/undo cycles restored identical state")
    assert ok


@criterion(9)
def test_cli_determinism(tmp_path):
    runs = [
        ["sim", "--mode", "2d", "--d", "3,5", "--p", "0.05,0.1", "--trials", "2000", "--seed", "9"],
        ["sim", "--mode", "3d", "--d", "3", "--p", "0.02", "--trials", "3", "--rounds", "60", "--seed", "9"],
        ["sim", "--mode", "2d", "--d", "3", "--p", "0.1", "--failures", "50", "--seed", "9"],
    ]
    identical = 0
    for k, argv in enumerate(runs):
        outs = []
        for rep in range(2):
            path = tmp_path / f"{k}_{rep}.csv"
            proc = subprocess.run([sys.executable, "-m", "surface_mwpm", "-q"] + argv + ["--out", str(path)],
                                  capture_output=True)
            assert proc.returncode == 0, proc.stderr
            outs.append(path.read_bytes())
        identical += outs[0] == outs[1]
    ok = identical == len(runs)
    record(9, ok, f"{identical}/{len(runs)} sim invocations byte-identical on repeat")
    assert ok
