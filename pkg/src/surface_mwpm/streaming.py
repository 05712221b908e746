"""Space-time decoding for the phenomenological 3-D model.

Detection events arrive one round at a time.  Edges are never enumerated up
front: each vertex knows the other vertices within its exploration radius and
the radius is doubled whenever a dual step could make an unseen edge tight.

The newest measured round is a moving temporal boundary.  Before every dual
step the tree checks whether an edge to a not-yet-measured vertex could become
tight; if so the whole tree is undone through the journal and retried after
the next round.  Roots are always taken in id order and a deferred root blocks
the ones after it, so the streaming run performs exactly the operations of a
batch run over the finished record.

Matched structure that falls far enough behind the newest round is committed
to a running correction and discarded, keeping memory bounded.
"""

from __future__ import annotations

import logging

import numpy as np

from .blossom import BOUNDARY, OUTER, Journal, Matcher, Vertex, effective_radius
from .decoder import path_between, path_to_boundary
from .errors import FutureDataNeeded, OutOfOrderRound
from .lattice import LatticeConfig, RoundRecord, syndrome_array
from .syndrome_graph import DetectionHistory, explore_region, nearest_boundary

log = logging.getLogger(__name__)

INITIAL_RADIUS = 2
TRIM_MULTIPLE = 4
MIN_WINDOW = 8


class LazyMatcher(Matcher):
    """Blossom matcher over a :class:`DetectionHistory`, exploring edges on demand."""

    def __init__(self, history: DetectionHistory, journal: Journal | None = None,
                 initial_radius: int = INITIAL_RADIUS, debug: bool = False):
        super().__init__(journal=journal, debug=debug)
        self.history = history
        self.initial_radius = initial_radius
        cfg = history.config
        self._bmax2 = 2 * max(nearest_boundary((r, 0), cfg)[1] for r in range(cfg.d - 1))
        self.max_radius = initial_radius
        self.last_tree_min_round = None
        self.explorations = []

    def add_detection(self, vid: int) -> Vertex:
        """Create the matcher vertex for history vertex ``vid`` and link it to known neighbours."""
        r, c, t = self.history.coords[vid]
        v = self.add_vertex(vid, (r, c, t))
        b, dist = nearest_boundary((r, c), self.history.config)
        v.bnd = (b, 2 * dist)
        v.radius = self.initial_radius
        region = explore_region(vid, self.max_radius, self.history, clip_future=True)
        verts = self.vertices
        for fid, dist in region.neighbours:
            f = verts.get(fid)
            if f is None or dist > max(v.radius, f.radius):
                continue
            if 2 * dist < v.bnd[1] + f.bnd[1]:
                self.add_edge(v, f, 2 * dist)
        return v

    def explore(self, u: Vertex, radius: int) -> None:
        """Grow ``u``'s known neighbourhood to Manhattan ``radius``."""
        region = explore_region(u.id, radius, self.history, clip_future=True)
        verts = self.vertices
        for fid, dist in region.neighbours:
            f = verts.get(fid)
            if f is None or dist <= max(u.radius, f.radius):
                continue
            if 2 * dist < u.bnd[1] + f.bnd[1]:
                self.add_edge(u, f, 2 * dist)
        self._set(u, "radius", radius)
        if radius > self.max_radius:
            self._set(self, "max_radius", radius)
        if self.explorations is not None:
            self.explorations.append((u.id, radius))

    def _extend_graph(self, delta: int) -> bool:
        hist = self.history
        newest, final = hist.newest, hist.final
        bmax2 = self._bmax2
        to_explore = []
        future = False
        for node in self._tree:
            if node.label != OUTER:
                continue
            for u in node.leaves:
                ru = effective_radius(u)
                # Edges of doubled weight >= reach are dominated by two boundary edges.
                reach = u.bnd[1] + bmax2
                known = 2 * (u.radius + 1)
                if known < reach and 2 * delta >= known - ru - bmax2:
                    to_explore.append(u)
                if not final:
                    ahead = 2 * (newest + 1 - u.coord[2])
                    if ahead < reach and delta >= ahead - ru:
                        future = True
        if to_explore:
            for u in to_explore:
                self.explore(u, max(2 * u.radius, 1))
            return True
        if future:
            raise FutureDataNeeded(f"tree growth needs rounds after {newest}")
        return False

    def augment(self, u, target) -> None:
        tmin = min(leaf.coord[2] for node in self._tree for leaf in node.leaves)
        if target is not BOUNDARY:
            tmin = min(tmin, min(leaf.coord[2] for leaf in target.top.leaves))
        self.last_tree_min_round = tmin
        super().augment(u, target)

    def matched_flips(self, vertices=None) -> np.ndarray:
        """Data flips implied by the current matching of ``vertices`` (default: all)."""
        cfg = self.history.config
        flips = np.zeros((cfg.n, cfg.n), dtype=bool)
        for v in (self.vertices.values() if vertices is None else vertices):
            m = v.mate
            if m is BOUNDARY:
                for site in path_to_boundary(v.coord, v.bnd[0], cfg):
                    flips[site] ^= True
            elif m is not None and v.id < m.id:
                for site in path_between(v.coord, m.coord):
                    flips[site] ^= True
        return flips


class StreamingDecoder:
    """Round-by-round decoder with rollback, logical verification and bounded history."""

    def __init__(self, config: LatticeConfig, *, trim: bool = True, multiple: int = TRIM_MULTIPLE,
                 min_window: int = MIN_WINDOW, initial_radius: int = INITIAL_RADIUS,
                 debug: bool = False):
        self.config = config
        self.history = DetectionHistory(config)
        self.journal = Journal()
        self.matcher = LazyMatcher(self.history, self.journal, initial_radius, debug)
        self.matcher.explorations = None
        self.trim = trim
        self.multiple = multiple
        self.min_window = min_window
        self.max_depth = 0
        self.deferred: int | None = None
        self.committed = np.zeros((config.n, config.n), dtype=bool)
        self.rollbacks = 0

    @property
    def newest(self) -> int:
        return self.history.newest

    @property
    def window(self) -> int:
        return max(self.min_window, self.multiple * self.max_depth)

    def process_round(self, events, round_index: int | None = None) -> list:
        """Add one round of detection events and match as far as the data allows.

        Returns the matched pairs committed (and forgotten) this round, as
        coordinate pairs with ``None`` standing for a boundary.
        """
        if self.history.final:
            raise OutOfOrderRound("the record has been closed")
        if round_index is not None and round_index != self.history.newest + 1:
            raise OutOfOrderRound(f"expected round {self.history.newest + 1}, got {round_index}")
        for vid in self.history.add_round(events):
            self.matcher.add_detection(vid)
        self._resume()
        return self.trim_history() if self.trim else []

    def finish(self, final_events=()) -> None:
        """Close the record with a noiseless round and match everything left."""
        for vid in self.history.add_round(final_events):
            self.matcher.add_detection(vid)
        self.history.final = True
        self._resume()

    def _resume(self) -> None:
        m = self.matcher
        while True:
            root = m.next_root()
            if root is None:
                m._set(self, "deferred", None)
                return
            mark = self.journal.mark()
            try:
                m.grow_from(root)
            except FutureDataNeeded:
                m.undo_to_mark(mark)
                self.rollbacks += 1
                m._set(self, "deferred", root.id)
                return
            self.journal.release(mark)
            depth = self.history.newest - m.last_tree_min_round
            if depth > self.max_depth:
                m._set(self, "max_depth", depth)

    def trim_history(self) -> list:
        """Commit and forget matched structure older than the retention window."""
        if self.journal.recording:
            raise RuntimeError("cannot trim while a journal mark is outstanding")
        cutoff = self.history.newest - self.window
        if cutoff <= self.history.oldest:
            return []
        m = self.matcher
        old = {}
        for v in m.vertices.values():
            node = v.top
            if id(node) in old:
                continue
            old[id(node)] = (node, all(leaf.coord[2] < cutoff for leaf in node.leaves))
        drop = []
        for node, is_old in old.values():
            if not is_old:
                continue
            mate = node.base.mate
            if mate is None:
                continue
            if mate is not BOUNDARY and not old[id(mate.top)][1]:
                continue
            drop.extend(node.leaves)
        finalized = []
        if drop:
            self.committed ^= m.matched_flips(drop)
            gone = {v.id for v in drop}
            for v in drop:
                mate = v.mate
                if mate is BOUNDARY:
                    finalized.append((v.coord, None))
                elif v.id < mate.id:
                    finalized.append((v.coord, mate.coord))
            for vid in gone:
                del m.vertices[vid]
                self.history.discard(vid)
            for v in m.vertices.values():
                if any(f.id in gone for f, _ in v.adj):
                    v.adj = [(f, w) for f, w in v.adj if f.id not in gone]
            m._order = list(m.vertices)
            m._cursor = 0
        live = [t for t, ids in self.history.by_round.items() if ids and t < cutoff]
        self.history.drop_rounds_before(min(live + [cutoff]))
        return finalized

    def correction(self) -> np.ndarray:
        return self.committed ^ self.matcher.matched_flips()

    def verify_logical(self, perfect_events, data: np.ndarray) -> int:
        """Logical X failure bit after a virtual noiseless round; all changes are undone.

        ``perfect_events`` are the detection events a noiseless measurement
        would produce now and ``data`` the true accumulated data flips.
        """
        m = self.matcher
        mark = self.journal.mark()
        try:
            t = self.history.newest + 1
            self.history.add_round(perfect_events)
            m._on_undo(lambda: self.history.remove_round(t))
            m._set(self.history, "final", True)
            for vid in self.history.by_round[t]:
                m.add_detection(vid)
            self._resume()
            residual = data ^ self.correction()
            return logical_x_parity_array(residual)
        finally:
            m.undo_to_mark(mark)

    def retained_span(self) -> int:
        return self.history.retained_rounds()


def logical_x_parity_array(data: np.ndarray) -> int:
    if syndrome_array(data).any():
        raise AssertionError("correction left a residual syndrome")
    return int(np.count_nonzero(data[0, 0::2]) & 1)


def match_space_time(vertices, config: LatticeConfig, *, debug: bool = False) -> LazyMatcher:
    """Solve a finished set of ``(row, col, round)`` detection events in one batch."""
    by_round: dict[int, list] = {}
    for r, c, t in vertices:
        by_round.setdefault(int(t), []).append((r, c))
    hist = DetectionHistory(config)
    for t in range(max(by_round, default=-1) + 1):
        hist.add_round(by_round.get(t, ()))
    hist.final = True
    m = LazyMatcher(hist, debug=debug)
    for vid in sorted(hist.coords):
        m.add_detection(vid)
    m.solve()
    return m


def decode_record_batch(record: RoundRecord, *, debug: bool = False):
    """Match a whole finished record at once; returns ``(failure_bit, matcher)``."""
    m = match_space_time(record.vertices, record.config, debug=debug)
    residual = record.data ^ m.matched_flips()
    return logical_x_parity_array(residual), m


def decode_record_streaming(record: RoundRecord, *, trim: bool = True, multiple: int = TRIM_MULTIPLE,
                            debug: bool = False):
    """Feed a finished record round by round; returns ``(failure_bit, decoder)``."""
    dec = StreamingDecoder(record.config, trim=trim, multiple=multiple, debug=debug)
    for evs in record.events[:-1]:
        dec.process_round(evs)
    dec.finish(record.events[-1])
    residual = record.data ^ dec.correction()
    return logical_x_parity_array(residual), dec
