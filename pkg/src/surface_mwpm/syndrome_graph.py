"""Weighted matching graphs built from syndromes.

Vertex-vertex weights are Manhattan separations between stabilizer
coordinates; every vertex also gets an edge to its nearest smooth boundary.
All weights handed to the matcher are doubled so that dual updates stay
integral.

The shadowed graph drops an edge when each endpoint is deeply shadowed as seen
from the other, and drops a boundary edge when another vertex sits on the
straight path to that boundary.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import FutureDataNeeded, SyndromeParseError
from .lattice import LatticeConfig, Syndrome


class Boundary(enum.IntEnum):
    TOP = 0
    BOTTOM = 1


class ShadowClass(enum.Enum):
    UNSHADOWED = "unshadowed"
    SHADOWED = "shadowed"
    DEEPLY_SHADOWED = "deeply_shadowed"


class Pruning(str, enum.Enum):
    COMPLETE = "complete"
    SHADOWED = "shadowed"


def manhattan_weight(a: Sequence[int], b: Sequence[int]) -> int:
    if len(a) != len(b):
        raise ValueError("coordinates must have the same dimension")
    return sum(abs(x - y) for x, y in zip(a, b))


def nearest_boundary(v: Sequence[int], config: LatticeConfig) -> tuple[Boundary, int]:
    """Closest smooth boundary of a stabilizer coordinate and its distance (ties go to the top)."""
    row = v[0]
    top = row + 1
    bottom = (config.d - 1) - row
    if bottom < top:
        return Boundary.BOTTOM, bottom
    return Boundary.TOP, top


@dataclass
class SyndromeGraph:
    """Matching graph over detection vertices.

    ``edges`` holds ``(i, j, w)`` with ``i < j``; ``boundary_edges`` holds
    ``(i, boundary, w)``.  Weights are doubled Manhattan lengths.
    """

    coords: list[tuple[int, ...]]
    edges: list[tuple[int, int, int]] = field(default_factory=list)
    boundary_edges: list[tuple[int, Boundary, int]] = field(default_factory=list)

    @property
    def num_vertices(self) -> int:
        return len(self.coords)

    def edge_weights(self) -> dict[tuple[int, int], int]:
        return {(i, j): w for i, j, w in self.edges}

    def boundary_map(self) -> dict[int, tuple[Boundary, int]]:
        return {i: (b, w) for i, b, w in self.boundary_edges}


def _rect_counts(prefix, ra, ca, rb, cb):
    lo_r = np.minimum(ra, rb)
    hi_r = np.maximum(ra, rb) + 1
    lo_c = np.minimum(ca, cb)
    hi_c = np.maximum(ca, cb) + 1
    return prefix[hi_r, hi_c] - prefix[lo_r, hi_c] - prefix[hi_r, lo_c] + prefix[lo_r, lo_c]


_NEIGHBOUR_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def shadow_matrices(coords: Sequence[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    """Shadow status of every vertex as seen from every other vertex.

    Returns ``(in_shadow, deep)``, both ``k x k`` boolean arrays indexed
    ``[viewer, target]``.  A grid point is in shadow from a viewer when some
    other vertex lies inside the rectangle spanned by viewer and point, since
    that is exactly when a shortest Manhattan path can pass through it.
    """
    k = len(coords)
    if k == 0:
        empty = np.zeros((0, 0), dtype=bool)
        return empty, empty
    pts = np.asarray(coords, dtype=np.int64).reshape(k, 2)
    rows = pts[:, 0] - pts[:, 0].min() + 1
    cols = pts[:, 1] - pts[:, 1].min() + 1
    occ = np.zeros((rows.max() + 2, cols.max() + 2), dtype=np.int64)
    occ[rows, cols] = 1
    prefix = np.zeros((occ.shape[0] + 1, occ.shape[1] + 1), dtype=np.int64)
    prefix[1:, 1:] = occ.cumsum(0).cumsum(1)

    vr, vc = rows[:, None], cols[:, None]
    ur, uc = rows[None, :], cols[None, :]
    # The viewer always lies in its own rectangle; the target point is removed when it is a vertex.
    in_shadow = _rect_counts(prefix, vr, vc, ur, uc) - 2 > 0
    deep = in_shadow.copy()
    for dr, dc in _NEIGHBOUR_STEPS:
        pr, pc = ur + dr, uc + dc
        blockers = _rect_counts(prefix, vr, vc, pr, pc) - 1 - occ[pr, pc]
        deep &= blockers > 0
    np.fill_diagonal(in_shadow, False)
    np.fill_diagonal(deep, False)
    return in_shadow, deep


def shadow_classify(v: tuple[int, int], others: Iterable[tuple[int, int]]) -> dict:
    """Classify each vertex in ``others`` as seen from ``v``."""
    others = [tuple(o) for o in others if tuple(o) != tuple(v)]
    coords = [tuple(v)] + others
    in_shadow, deep = shadow_matrices(coords)
    out = {}
    for idx, o in enumerate(others, start=1):
        if deep[0, idx]:
            out[o] = ShadowClass.DEEPLY_SHADOWED
        elif in_shadow[0, idx]:
            out[o] = ShadowClass.SHADOWED
        else:
            out[o] = ShadowClass.UNSHADOWED
    return out


def blocked_boundaries(coords: Sequence[tuple[int, int]], config: LatticeConfig) -> np.ndarray:
    """True where a vertex's straight path to its nearest boundary runs through another vertex.

    When both boundaries are equally near, the vertex counts as blocked only
    if both paths are.
    """
    k = len(coords)
    if k == 0:
        return np.zeros(0, dtype=bool)
    pts = np.asarray(coords, dtype=np.int64).reshape(k, 2)
    r, c = pts[:, 0], pts[:, 1]
    same_col = c[:, None] == c[None, :]
    above = (same_col & (r[None, :] < r[:, None])).any(axis=1)
    below = (same_col & (r[None, :] > r[:, None])).any(axis=1)
    top = r + 1
    bottom = (config.d - 1) - r
    return np.where(top < bottom, above, np.where(bottom < top, below, above & below))


def build_graph(syndrome: Syndrome | Iterable[tuple[int, ...]], config: LatticeConfig,
                pruning: Pruning | str = Pruning.COMPLETE) -> SyndromeGraph:
    """Matching graph for a syndrome, vertex ids assigned in sorted coordinate order.

    3-D coordinates ``(row, col, round)`` are ordered by ``(round, row, col)``
    and only the complete graph is available for them.
    """
    pruning = Pruning(pruning)
    verts = list(syndrome.vertices) if isinstance(syndrome, Syndrome) else list(syndrome)
    if not verts:
        return SyndromeGraph([])
    dim = len(verts[0])
    if dim == 3:
        if pruning is not Pruning.COMPLETE:
            raise ValueError("shadow pruning is only defined for 2-D syndromes")
        verts.sort(key=lambda v: (v[2], v[0], v[1]))
    else:
        verts.sort()
    coords = [tuple(int(x) for x in v) for v in verts]
    k = len(coords)
    pts = np.asarray(coords, dtype=np.int64)
    w = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2) * 2
    keep = np.triu(np.ones((k, k), dtype=bool), 1)
    bnd_keep = np.ones(k, dtype=bool)
    if pruning is Pruning.SHADOWED:
        _, deep = shadow_matrices(coords)
        keep &= ~(deep & deep.T)
        bnd_keep = ~blocked_boundaries(coords, config)
    ii, jj = np.nonzero(keep)
    edges = list(zip(ii.tolist(), jj.tolist(), w[ii, jj].tolist()))
    boundary_edges = []
    for i, v in enumerate(coords):
        if bnd_keep[i]:
            b, dist = nearest_boundary(v, config)
            boundary_edges.append((i, b, 2 * dist))
    return SyndromeGraph(coords, edges, boundary_edges)


def parse_syndrome_text(text: str) -> list[tuple[int, ...]]:
    """Parse one vertex per line, ``row col`` or ``row col round``; ``#`` starts a comment.

    Every vertex line must have the same number of fields and no vertex may
    repeat.  Raises ``SyndromeParseError`` citing the offending line.
    """
    verts: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    dim = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split("#", 1)[0].split()
        if not fields:
            continue
        if len(fields) not in (2, 3):
            raise SyndromeParseError(lineno, f"expected 'row col' or 'row col round', got {line.strip()!r}")
        if dim is not None and len(fields) != dim:
            raise SyndromeParseError(lineno, "mixes 2-D and 3-D vertices")
        dim = len(fields)
        try:
            v = tuple(int(f) for f in fields)
        except ValueError:
            raise SyndromeParseError(lineno, f"non-integer field in {line.strip()!r}") from None
        if min(v) < 0:
            raise SyndromeParseError(lineno, "coordinates must be non-negative")
        if v in seen:
            raise SyndromeParseError(lineno, f"duplicate vertex {v}")
        seen.add(v)
        verts.append(v)
    return verts


class DetectionHistory:
    """Space-time detection events received so far, indexed by round.

    Vertex ids increase in ``(round, row, col)`` order.  ``newest`` is the
    latest measured round; once ``final`` is set no further rounds will arrive.
    """

    def __init__(self, config: LatticeConfig):
        self.config = config
        self.by_round: dict[int, list[int]] = {}
        self.coords: dict[int, tuple[int, int, int]] = {}
        self.newest = -1
        self.oldest = 0
        self.final = False
        self.next_id = 0

    def add_round(self, events: Iterable[tuple[int, int]]) -> list[int]:
        t = self.newest + 1
        rows, cols = self.config.stabilizer_shape
        ids = []
        for r, c in sorted(set((int(r), int(c)) for r, c in events)):
            if not (0 <= r < rows and 0 <= c < cols):
                raise ValueError(f"detection event ({r}, {c}) outside the stabilizer grid")
            vid = self.next_id
            self.next_id += 1
            self.coords[vid] = (r, c, t)
            ids.append(vid)
        self.by_round[t] = ids
        self.newest = t
        return ids

    def remove_round(self, t: int) -> None:
        """Forget the newest round ``t`` (used to roll back a virtual round)."""
        assert t == self.newest
        ids = self.by_round.pop(t)
        for vid in ids:
            del self.coords[vid]
        if ids:
            self.next_id = ids[0]
        self.newest = t - 1

    def discard(self, vid: int) -> None:
        r, c, t = self.coords.pop(vid)
        self.by_round[t].remove(vid)

    def drop_rounds_before(self, t: int) -> None:
        for old in [x for x in self.by_round if x < t]:
            if self.by_round[old]:
                raise ValueError(f"round {old} still holds live vertices")
            del self.by_round[old]
        self.oldest = max(self.oldest, t)

    def retained_rounds(self) -> int:
        return self.newest - self.oldest + 1 if self.newest >= self.oldest else 0


@dataclass
class Region:
    """Neighbourhood of one vertex: other vertices within L1 ``radius`` and its boundary edge if in reach."""

    center: int
    radius: int
    neighbours: list[tuple[int, int]]
    boundary: tuple[Boundary, int] | None


def explore_region(vid: int, radius: int, history: DetectionHistory, *,
                   clip_future: bool = False) -> Region:
    """Collect everything within Manhattan ``radius`` of vertex ``vid``.

    Weights in the returned region are plain (not doubled) lattice distances.
    Raises ``FutureDataNeeded`` when the ball reaches past the newest measured
    round, unless ``clip_future`` is set (then unmeasured rounds are ignored).
    """
    r0, c0, t0 = history.coords[vid]
    if not history.final and t0 + radius > history.newest and not clip_future:
        raise FutureDataNeeded(f"radius {radius} around round {t0} needs round {t0 + radius}")
    neighbours = []
    lo = max(history.oldest, t0 - radius)
    hi = min(history.newest, t0 + radius)
    for t in range(lo, hi + 1):
        for other in history.by_round.get(t, ()):
            if other == vid:
                continue
            r, c, _ = history.coords[other]
            dist = abs(r - r0) + abs(c - c0) + abs(t - t0)
            if dist <= radius:
                neighbours.append((other, dist))
    b, dist = nearest_boundary((r0, c0), history.config)
    return Region(vid, radius, neighbours, (b, dist) if dist <= radius else None)
