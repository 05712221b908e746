import numpy as np
import pytest

from surface_mwpm.blossom import BOUNDARY, Journal, mwpm
from surface_mwpm.errors import FutureDataNeeded, OutOfOrderRound
from surface_mwpm.lattice import LatticeConfig, Mode, NoiseParams, NoisyMemory, RoundRecord, sample_record
from surface_mwpm.streaming import (MIN_WINDOW, LazyMatcher, StreamingDecoder, decode_record_batch,
                                    decode_record_streaming, match_space_time)
from surface_mwpm.syndrome_graph import DetectionHistory, build_graph


def cfg3(d):
    return LatticeConfig(d, Mode.THREE_D)


def stream_record(rec, **kw):
    dec = StreamingDecoder(rec.config, **kw)
    for evs in rec.events[:-1]:
        dec.process_round(evs)
    dec.finish(rec.events[-1])
    return dec


def test_batch_weight_matches_complete_graph(rng):
    for _ in range(60):
        d = int(rng.choice([3, 5, 7]))
        rec = sample_record(cfg3(d), NoiseParams(0.03), int(rng.integers(1, 25)), rng)
        _, m = decode_record_batch(rec, debug=True)
        g = build_graph(rec.vertices, rec.config)
        assert m.result().weight == mwpm(g).weight


def test_measurement_only_stream_matches_batch(rng):
    for _ in range(30):
        rec = sample_record(cfg3(5), NoiseParams(0.02, 0.0), 40, rng)
        fb, mb = decode_record_batch(rec)
        dec = stream_record(rec, trim=False)
        assert dec.matcher.result().weight == mb.result().weight
        # with q = 0 nothing ever waits for later rounds beyond the boundary reach
        assert dec.deferred is None


def test_single_measurement_flip():
    cfg = cfg3(7)
    rec = RoundRecord(cfg, [[], [], [(2, 3)], [(2, 3)], [], []], np.zeros((cfg.n, cfg.n), dtype=bool))
    dec = stream_record(rec, trim=False)
    res = dec.matcher.result()
    assert res.pairs == [(0, 1)] and res.weight == 1 and res.doubled_weight == 2
    assert not dec.correction().any()


@pytest.mark.parametrize("d,p", [(3, 0.03), (5, 0.03), (5, 0.01)])
def test_stream_correction_equals_batch(d, p):
    rng = np.random.default_rng(d * 100 + int(p * 1000))
    for _ in range(5):
        rec = sample_record(cfg3(d), NoiseParams(p), 200, rng)
        fb, mb = decode_record_batch(rec)
        dec = stream_record(rec)
        assert np.array_equal(dec.correction(), mb.matched_flips())


def test_trimming_does_not_change_output(rng):
    for _ in range(10):
        rec = sample_record(cfg3(5), NoiseParams(0.02), 150, rng)
        a = stream_record(rec, trim=True)
        b = stream_record(rec, trim=False)
        assert np.array_equal(a.correction(), b.correction())
        assert len(a.matcher.vertices) <= len(b.matcher.vertices)


def test_out_of_order_round():
    dec = StreamingDecoder(cfg3(3))
    dec.process_round([], round_index=0)
    with pytest.raises(OutOfOrderRound):
        dec.process_round([], round_index=5)
    dec.finish()
    with pytest.raises(OutOfOrderRound):
        dec.process_round([])


def test_rollback_leaves_no_trace():
    cfg = cfg3(9)
    hist = DetectionHistory(cfg)
    m = LazyMatcher(hist, Journal())
    for vid in hist.add_round([(4, 4)]):
        m.add_detection(vid)
    snap = m.snapshot()
    mark = m.mark()
    with pytest.raises(FutureDataNeeded):
        m.grow_from(m.next_root())
    m.undo_to_mark(mark)
    assert m.snapshot() == snap


def test_deferred_root_blocks_until_data_arrives():
    dec = StreamingDecoder(cfg3(9), trim=False)
    dec.process_round([(4, 4)])
    assert dec.deferred == 0 and dec.rollbacks >= 1
    for _ in range(3):
        dec.process_round([])
    assert dec.deferred == 0
    for _ in range(3):
        dec.process_round([])
    # boundary distance 4 is reached once enough quiet rounds have been seen
    assert dec.deferred is None
    assert dec.matcher.vertices[0].mate is BOUNDARY


def test_quiet_stream_window():
    dec = StreamingDecoder(cfg3(5))
    for _ in range(50):
        dec.process_round([])
    assert dec.window == MIN_WINDOW
    assert dec.history.newest - dec.history.oldest == MIN_WINDOW


def test_deep_traversal_widens_window():
    cfg = cfg3(15)
    dec = StreamingDecoder(cfg)
    dec.process_round([(7, 7)])
    for _ in range(4):
        dec.process_round([])
    dec.process_round([(7, 7)])
    for _ in range(60):
        dec.process_round([])
    assert dec.max_depth >= 5
    assert dec.window >= 20
    assert dec.history.newest - dec.history.oldest >= 20
    assert not dec.correction().any()


def test_memory_bound_each_round(rng):
    cfg = cfg3(5)
    mem = NoisyMemory(cfg, NoiseParams(0.03), rng)
    dec = StreamingDecoder(cfg)
    for _ in range(300):
        dec.process_round(mem.step())
        live = [v.coord[2] for v in dec.matcher.vertices.values()]
        span = dec.history.newest - min(live) if live else 0
        assert dec.history.retained_rounds() <= max(dec.window, span) + 1
        oldest_live = min(live, default=dec.history.newest)
        assert oldest_live >= dec.history.oldest


def test_verify_logical_idempotent(rng):
    cfg = cfg3(5)
    mem = NoisyMemory(cfg, NoiseParams(0.03), rng)
    dec = StreamingDecoder(cfg)
    for t in range(60):
        dec.process_round(mem.step())
        if t % 7 == 0:
            snap = (dec.matcher.snapshot(), dec.deferred, dec.max_depth, dict(dec.history.coords),
                    dec.history.newest, dec.history.final)
            a = dec.verify_logical(mem.perfect_events(), mem.state.data)
            b = dec.verify_logical(mem.perfect_events(), mem.state.data)
            assert a == b
            assert snap == (dec.matcher.snapshot(), dec.deferred, dec.max_depth, dict(dec.history.coords),
                            dec.history.newest, dec.history.final)


def test_verify_error_free_and_single_error():
    cfg = cfg3(5)
    dec = StreamingDecoder(cfg)
    for _ in range(5):
        dec.process_round([])
    data = np.zeros((cfg.n, cfg.n), dtype=bool)
    assert dec.verify_logical([], data) == 0
    data[4, 4] = True  # couples stabilizers (1, 2) and (2, 2)
    dec.process_round([(1, 2), (2, 2)])
    for _ in range(3):
        dec.process_round([])
    assert dec.verify_logical([], data) == 0


def test_verify_matches_closing_the_record(rng):
    """The virtual check agrees with finishing the stream for real."""
    for _ in range(20):
        cfg = cfg3(3)
        mem = NoisyMemory(cfg, NoiseParams(0.04), rng)
        dec = StreamingDecoder(cfg)
        events = [mem.step() for _ in range(30)]
        for evs in events:
            dec.process_round(evs)
        bit = dec.verify_logical(mem.perfect_events(), mem.state.data)
        rec = RoundRecord(cfg, events + [mem.perfect_events()], mem.state.data.copy())
        assert bit == decode_record_batch(rec)[0] == decode_record_streaming(rec)[0]


def test_explored_regions_cover_matching(rng):
    for _ in range(20):
        rec = sample_record(cfg3(5), NoiseParams(0.04), 30, rng)
        _, m = decode_record_batch(rec)
        for u in m.vertices.values():
            v = u.mate
            if v is not None and v is not BOUNDARY:
                dist = sum(abs(a - b) for a, b in zip(u.coord, v.coord))
                assert dist <= max(u.radius, v.radius)


def test_match_space_time_gaps():
    m = match_space_time([(0, 0, 0), (0, 0, 3)], LatticeConfig(5))
    assert m.result().boundary == [(0, 0), (1, 0)]
