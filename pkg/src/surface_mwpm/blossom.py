"""Minimum-weight perfect matching with boundaries.

Edmonds' primal-dual blossom algorithm grown one alternating tree at a time.
Every vertex must end up matched either to another vertex or to a boundary;
boundaries carry no dual variable, never join a tree and can absorb any number
of vertices, so a tight vertex-boundary edge ends the tree immediately.

Weights are integers (the graph builders pass doubled Manhattan lengths), so
all dual arithmetic is exact.  Vertex duals may go negative; blossom duals
never do.

Every state mutation goes through :meth:`Matcher._set`, which records the old
value in a :class:`Journal` while a mark is outstanding, so any sequence of
operations can be rolled back bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (ExpandNonzeroY, ExpandOuter, GraphInfeasible, InvalidMark,
                     NoProgress, NotSameTree)
from .syndrome_graph import Boundary, SyndromeGraph

UNLABELED, OUTER, INNER = 0, 1, 2

_INF = 1 << 62
_BOUNDARY_KEY = 1 << 62


class _BoundaryTarget:
    __slots__ = ()

    def __repr__(self):
        return "BOUNDARY"


BOUNDARY = _BoundaryTarget()


class Vertex:
    __slots__ = ("id", "y", "mate", "parent", "top", "adj", "bnd", "label",
                 "labeledge", "leaves", "base", "coord", "radius")

    def __init__(self, vid: int, coord=None):
        self.id = vid
        self.y = 0
        self.mate = None
        self.parent = None
        self.top = self
        self.adj = []
        self.bnd = None
        self.label = UNLABELED
        self.labeledge = None
        self.leaves = (self,)
        self.base = self
        self.coord = coord
        self.radius = 0

    def __repr__(self):
        return f"Vertex({self.id})"


class Blossom:
    __slots__ = ("childs", "edges", "Y", "parent", "base", "leaves", "label", "labeledge")

    def __repr__(self):
        return f"Blossom(base={self.base.id}, size={len(self.leaves)}, Y={self.Y})"


def effective_radius(v: Vertex) -> int:
    """Vertex dual plus the duals of every blossom containing it."""
    r = v.y
    b = v.parent
    while b is not None:
        r += b.Y
        b = b.parent
    return r


class _Mark:
    __slots__ = ("position", "alive")

    def __init__(self, position):
        self.position = position
        self.alive = True


class Journal:
    """Undo log.  Entries are only recorded while at least one mark is outstanding."""

    def __init__(self):
        self.log: list = []
        self._marks: list[_Mark] = []

    @property
    def recording(self) -> bool:
        return bool(self._marks)

    def mark(self) -> _Mark:
        m = _Mark(len(self.log))
        self._marks.append(m)
        return m

    def _check(self, mark):
        if not isinstance(mark, _Mark) or not mark.alive or mark not in self._marks:
            raise InvalidMark("mark is not outstanding on this journal")

    def undo_to_mark(self, mark) -> None:
        """Revert every mutation recorded since ``mark`` and retire it (and any later marks)."""
        self._check(mark)
        log = self.log
        while len(log) > mark.position:
            obj, name, old = log.pop()
            if obj is None:
                name()
            else:
                setattr(obj, name, old)
        self._retire_from(mark)

    def release(self, mark) -> None:
        """Keep the changes made since ``mark`` and stop tracking it."""
        self._check(mark)
        self._retire_from(mark)

    def _retire_from(self, mark):
        idx = self._marks.index(mark)
        for m in self._marks[idx:]:
            m.alive = False
        del self._marks[idx:]
        if not self._marks:
            self.log.clear()


@dataclass
class DualCertificate:
    y: dict[int, int]
    blossoms: list[tuple[frozenset, int]]


@dataclass
class MatchingResult:
    """Matched pairs, boundary assignments and total weight in lattice units."""

    pairs: list[tuple[int, int]] = field(default_factory=list)
    boundary: list[tuple[int, Boundary]] = field(default_factory=list)
    weight: int = 0
    duals: DualCertificate | None = None

    @property
    def doubled_weight(self) -> int:
        return 2 * self.weight


class Matcher:
    """Mutable blossom state: vertices, blossoms, duals, matching and the active tree."""

    def __init__(self, journal: Journal | None = None, debug: bool = False):
        self.vertices: dict[int, Vertex] = {}
        self._order: list[int] = []
        self._cursor = 0
        self.journal = journal
        self.debug = debug
        self._tree: dict | None = None
        self._ignored: set = set()
        self.tree_count = 0

    # -- journal -----------------------------------------------------------

    def _set(self, obj, name, value):
        j = self.journal
        if j is not None and j._marks:
            j.log.append((obj, name, getattr(obj, name)))
        setattr(obj, name, value)

    def _on_undo(self, fn):
        j = self.journal
        if j is not None and j._marks:
            j.log.append((None, fn, None))

    def mark(self):
        if self.journal is None:
            self.journal = Journal()
        return self.journal.mark()

    def undo_to_mark(self, mark) -> None:
        if self.journal is None:
            raise InvalidMark("no journal attached")
        self.journal.undo_to_mark(mark)
        self._tree = None
        self._ignored = set()

    def release(self, mark) -> None:
        self.journal.release(mark)

    # -- construction --------------------------------------------------------

    @classmethod
    def from_graph(cls, graph: SyndromeGraph, **kwargs) -> "Matcher":
        m = cls(**kwargs)
        for vid, coord in enumerate(graph.coords):
            m.add_vertex(vid, coord)
        verts = m.vertices
        for i, bid, w in graph.boundary_edges:
            verts[i].bnd = (bid, w)
        for i, j, w in graph.edges:
            a, b = verts[i], verts[j]
            # Both boundary edges together never cost more; such an edge is
            # never needed and stays dual-feasible because both boundary edges do.
            if a.bnd is not None and b.bnd is not None and w >= a.bnd[1] + b.bnd[1]:
                continue
            a.adj.append((b, w))
            b.adj.append((a, w))
        return m

    def add_vertex(self, vid: int, coord=None) -> Vertex:
        if self._order and vid <= self._order[-1]:
            raise ValueError("vertex ids must be added in increasing order")
        v = Vertex(vid, coord)
        self.vertices[vid] = v
        self._order.append(vid)
        self._on_undo(lambda: (self.vertices.pop(vid), self._order.pop()))
        return v

    def add_edge(self, a: Vertex, b: Vertex, w: int) -> None:
        self._set(a, "adj", a.adj + [(b, w)])
        self._set(b, "adj", b.adj + [(a, w)])

    # -- main loop -----------------------------------------------------------

    def next_root(self) -> Vertex | None:
        """Lowest-id unmatched vertex."""
        order, verts = self._order, self.vertices
        i = self._cursor
        while i < len(order):
            v = verts.get(order[i])
            if v is not None and v.mate is None:
                break
            i += 1
        if i != self._cursor:
            self._set(self, "_cursor", i)
        return verts[order[i]] if i < len(order) else None

    def solve(self) -> None:
        """Grow trees from unmatched roots until every vertex is matched."""
        while True:
            root = self.next_root()
            if root is None:
                return
            self.grow_from(root)

    def grow_from(self, root: Vertex) -> None:
        """Run one alternating tree from ``root`` until it augments."""
        self.begin_tree(root)
        while True:
            edge, delta, min_inner_y, zero_blossom = self._scan()
            if edge is not None:
                if self._take(edge):
                    return
                continue
            if zero_blossom is not None:
                self.expand_blossom(zero_blossom)
                continue
            delta = min(delta, min_inner_y)
            if self._extend_graph(delta):
                continue
            if delta >= _INF:
                raise GraphInfeasible(f"tree rooted at vertex {root.id} cannot reach a partner")
            self._apply_delta(delta)

    def begin_tree(self, root: Vertex) -> None:
        if root.mate is not None or root.top is not root:
            raise ValueError("tree roots must be unmatched bare vertices")
        self._tree = {root: None}
        self._ignored = set()
        self.tree_count += 1
        self._set(root, "label", OUTER)
        self._set(root, "labeledge", None)

    def _extend_graph(self, delta: int) -> bool:
        """Hook for lazily explored graphs; return True after adding edges."""
        return False

    def _scan(self):
        """One pass over the tree.

        Returns the lowest-keyed O-tight edge (not yet ignored), the largest
        dual step allowed by non-tree and outer-outer edges, the smallest
        inner blossom dual, and the first inner blossom whose dual is zero.
        """
        best_key = None
        best = None
        delta = _INF
        min_inner = _INF
        zero_blossom = None
        ignored = self._ignored
        for node in self._tree:
            if node.label != OUTER:
                if node.__class__ is Blossom:
                    if node.Y < min_inner:
                        min_inner = node.Y
                    if node.Y == 0 and zero_blossom is None:
                        zero_blossom = node
                continue
            for u in node.leaves:
                ru = u.y
                p = u.parent
                while p is not None:
                    ru += p.Y
                    p = p.parent
                bnd = u.bnd
                if bnd is not None:
                    s = bnd[1] - ru
                    if s == 0:
                        key = (u.id, _BOUNDARY_KEY)
                        if best_key is None or key < best_key:
                            best_key = key
                            best = (u, BOUNDARY)
                    elif s < delta:
                        delta = s
                uid = u.id
                for v, w in u.adj:
                    tv = v.top
                    if tv is node:
                        continue
                    rv = v.y
                    p = v.parent
                    while p is not None:
                        rv += p.Y
                        p = p.parent
                    s = w - ru - rv
                    lab = tv.label
                    if s == 0:
                        vid = v.id
                        key = (uid, vid) if uid < vid else (vid, uid)
                        if lab == INNER and key in ignored:
                            continue
                        if best_key is None or key < best_key:
                            best_key = key
                            best = (u, v)
                    elif lab == OUTER:
                        if s >> 1 < delta:
                            delta = s >> 1
                    elif lab != INNER and s < delta:
                        delta = s
        return best, delta, min_inner, zero_blossom

    def _take(self, edge) -> bool:
        u, v = edge
        if v is BOUNDARY:
            self.augment(u, BOUNDARY)
            return True
        tv = v.top
        lab = tv.label
        if lab == OUTER:
            self.form_blossom(u, v)
            return False
        if lab == INNER:
            self.ignore_edge(u, v)
            return False
        m = tv.base.mate
        if m is None or m is BOUNDARY:
            self.augment(u, v)
            return True
        self.grow_tree(u, v)
        return False

    # -- tree manipulations --------------------------------------------------

    def dual_adjust(self) -> int:
        """Step every outer node's dual up and every inner node's down by the largest safe amount."""
        edge, delta, min_inner_y, _ = self._scan()
        if edge is not None:
            raise NoProgress("an O-tight edge exists; no dual adjustment is needed")
        delta = min(delta, min_inner_y)
        if delta <= 0:
            raise NoProgress("dual adjustment of zero requested")
        if delta >= _INF:
            raise GraphInfeasible("nothing bounds the dual adjustment")
        self._apply_delta(delta)
        return delta

    def _apply_delta(self, delta: int) -> None:
        if delta <= 0:
            raise NoProgress("dual adjustment of zero requested")
        s = self._set
        for node in self._tree:
            step = delta if node.label == OUTER else -delta
            if node.__class__ is Blossom:
                s(node, "Y", node.Y + step)
            else:
                s(node, "y", node.y + step)
        if self.debug:
            self.check_dual_feasibility()

    def grow_tree(self, u: Vertex, v: Vertex) -> None:
        """Attach the matched node holding ``v`` (inner) and its partner (outer) below ``u``'s node."""
        tv = v.top
        base = tv.base
        m = base.mate
        s = self._set
        s(tv, "label", INNER)
        s(tv, "labeledge", (u, v))
        tw = m.top
        s(tw, "label", OUTER)
        s(tw, "labeledge", (base, m))
        self._tree[tv] = None
        self._tree[tw] = None

    def ignore_edge(self, u: Vertex, v: Vertex) -> None:
        """Exclude a tight outer-inner edge from this tree's scans."""
        self._ignored.add((u.id, v.id) if u.id < v.id else (v.id, u.id))

    def _tree_path(self, node) -> list:
        path = [node]
        while node.labeledge is not None:
            node = node.labeledge[0].top
            path.append(node)
        return path

    def form_blossom(self, u: Vertex, v: Vertex) -> Blossom:
        """Contract the odd cycle closed by the outer-outer edge ``(u, v)``."""
        bu, bv = u.top, v.top
        if bu.label != OUTER or bv.label != OUTER or bu not in self._tree or bv not in self._tree:
            raise NotSameTree("both endpoints must be outer nodes of the active tree")
        pu, pv = self._tree_path(bu), self._tree_path(bv)
        lca = None
        while pu and pv and pu[-1] is pv[-1]:
            lca = pu.pop()
            pv.pop()
        if lca is None:
            raise NotSameTree("endpoints lie in different trees")
        down = pu[::-1]
        childs = [lca] + down + pv
        edges = [node.labeledge for node in down]
        edges.append((u, v))
        edges.extend((node.labeledge[1], node.labeledge[0]) for node in pv)

        b = Blossom()
        b.childs = childs
        b.edges = edges
        b.Y = 0
        b.parent = None
        b.base = lca.base
        b.label = OUTER
        b.labeledge = lca.labeledge
        b.leaves = [leaf for c in childs for leaf in c.leaves]
        s = self._set
        tree = self._tree
        for c in childs:
            s(c, "parent", b)
            s(c, "label", UNLABELED)
            s(c, "labeledge", None)
            del tree[c]
        for leaf in b.leaves:
            s(leaf, "top", b)
        tree[b] = None
        return b

    def expand_blossom(self, b: Blossom) -> None:
        """Dissolve an inner blossom whose dual reached zero, relabelling the even path through it."""
        if b.label != INNER:
            raise ExpandOuter("only inner blossoms are expanded during tree growth")
        if b.Y != 0:
            raise ExpandNonzeroY(f"blossom dual is {b.Y}, not 0")
        s = self._set
        x, y = b.labeledge
        childs, edges = b.childs, b.edges
        k = len(childs)
        for c in childs:
            s(c, "parent", None)
            s(c, "label", UNLABELED)
            s(c, "labeledge", None)
            for leaf in c.leaves:
                s(leaf, "top", c)
        tree = self._tree
        del tree[b]
        s(b, "label", UNLABELED)
        entry = y.top
        i = childs.index(entry)
        s(entry, "label", INNER)
        s(entry, "labeledge", (x, y))
        tree[entry] = None
        if i & 1:
            for j in range(i, k):
                a, c = edges[j]
                node = childs[(j + 1) % k]
                s(node, "label", OUTER if (j - i) % 2 == 0 else INNER)
                s(node, "labeledge", (a, c))
                tree[node] = None
        else:
            for j in range(i, 0, -1):
                a, c = edges[j - 1]
                node = childs[j - 1]
                s(node, "label", OUTER if (i - j) % 2 == 0 else INNER)
                s(node, "labeledge", (c, a))
                tree[node] = None

    def _augment_blossom(self, b: Blossom, v: Vertex) -> None:
        """Rotate ``b`` (recursively) so that vertex ``v`` becomes its base."""
        t = v
        while t.parent is not b:
            t = t.parent
        if t.__class__ is Blossom:
            self._augment_blossom(t, v)
        childs, edges = b.childs, b.edges
        k = len(childs)
        i = childs.index(t)
        s = self._set
        if i:
            js = range(i + 1, k, 2) if i & 1 else range(i - 2, -1, -2)
            for j in js:
                a, c = edges[j]
                ca, cc = childs[j], childs[(j + 1) % k]
                if ca.__class__ is Blossom:
                    self._augment_blossom(ca, a)
                if cc.__class__ is Blossom:
                    self._augment_blossom(cc, c)
                s(a, "mate", c)
                s(c, "mate", a)
            s(b, "childs", childs[i:] + childs[:i])
            s(b, "edges", edges[i:] + edges[:i])
        s(b, "base", v)

    def augment(self, u: Vertex, target) -> None:
        """Flip the alternating path root -> ``u`` -> ``target`` and dissolve the tree.

        ``target`` is an unmatched vertex, a vertex whose node is matched to a
        boundary, or :data:`BOUNDARY`.
        """
        s = self._set
        if target is not BOUNDARY:
            tv = target.top
            if tv.__class__ is Blossom:
                self._augment_blossom(tv, target)
            s(target, "mate", u)
        cur, partner = u, target
        while True:
            bs = cur.top
            if bs.__class__ is Blossom:
                self._augment_blossom(bs, cur)
            s(cur, "mate", partner)
            le = bs.labeledge
            if le is None:
                break
            bt = le[0].top
            x2, y2 = bt.labeledge
            if bt.__class__ is Blossom:
                self._augment_blossom(bt, y2)
            s(y2, "mate", x2)
            cur, partner = x2, y2
        for node in self._tree:
            s(node, "label", UNLABELED)
            s(node, "labeledge", None)
        self._tree = None
        self._ignored = set()

    # -- results and certificates -------------------------------------------

    def top_blossoms(self) -> list[Blossom]:
        seen = {}
        for v in self.vertices.values():
            if v.top is not v:
                seen[id(v.top)] = v.top
        return list(seen.values())

    def all_blossoms(self) -> list[Blossom]:
        out = []
        stack = self.top_blossoms()
        while stack:
            b = stack.pop()
            out.append(b)
            stack.extend(c for c in b.childs if c.__class__ is Blossom)
        return out

    def edge_weight(self, a: Vertex, b: Vertex) -> int:
        for v, w in a.adj:
            if v is b:
                return w
        raise KeyError((a.id, b.id))

    def result(self) -> MatchingResult:
        pairs, boundary, total = [], [], 0
        for v in self.vertices.values():
            m = v.mate
            if m is None:
                raise GraphInfeasible(f"vertex {v.id} is unmatched")
            if m is BOUNDARY:
                boundary.append((v.id, v.bnd[0]))
                total += v.bnd[1]
            elif v.id < m.id:
                pairs.append((v.id, m.id))
                total += self.edge_weight(v, m)
        duals = DualCertificate(
            {v.id: v.y for v in self.vertices.values()},
            [(frozenset(x.id for x in b.leaves), b.Y) for b in self.all_blossoms()],
        )
        return MatchingResult(sorted(pairs), sorted(boundary), total // 2, duals)

    def check_dual_feasibility(self) -> None:
        """Assert every known edge has nonnegative slack and every blossom dual is nonnegative."""
        for b in self.all_blossoms():
            assert b.Y >= 0, f"negative blossom dual {b}"
        for u in self.vertices.values():
            ru = effective_radius(u)
            if u.bnd is not None:
                assert u.bnd[1] - ru >= 0, f"boundary edge of {u.id} violated"
            for v, w in u.adj:
                if v.id > u.id:
                    assert edge_slack(u, v, w) >= 0, f"edge {u.id}-{v.id} violated"

    def snapshot(self):
        """Hashable deep copy of the complete matcher state, for equality checks."""
        def node_key(n):
            if n is None:
                return None
            if n is BOUNDARY:
                return "B"
            if n.__class__ is Vertex:
                return ("v", n.id)
            return ("b", tuple(node_key(c) for c in n.childs))

        def blossom_state(b):
            return (node_key(b), b.Y, b.base.id, b.label,
                    tuple((a.id, c.id) for a, c in b.edges),
                    None if b.labeledge is None else (b.labeledge[0].id, b.labeledge[1].id),
                    node_key(b.parent))

        verts = tuple(
            (v.id, v.coord, v.y, node_key(v.mate), node_key(v.parent), node_key(v.top), v.label,
             None if v.labeledge is None else (v.labeledge[0].id, v.labeledge[1].id),
             tuple((x.id, w) for x, w in v.adj), v.bnd, v.radius)
            for v in self.vertices.values())
        blossoms = tuple(sorted((blossom_state(b) for b in self.all_blossoms()), key=repr))
        return (verts, blossoms, tuple(self._order), self._cursor)


def edge_slack(u: Vertex, v: Vertex, w: int) -> int:
    """``w - y_u - y_v - sum(Y)`` over blossoms holding exactly one endpoint."""
    anc_u = []
    b = u.parent
    while b is not None:
        anc_u.append(b)
        b = b.parent
    common = 0
    b = v.parent
    ids = {id(x) for x in anc_u}
    while b is not None:
        if id(b) in ids:
            common += b.Y
        b = b.parent
    return w - effective_radius(u) - effective_radius(v) + 2 * common


def verify_certificate(graph: SyndromeGraph, result: MatchingResult) -> None:
    """Check primal feasibility, dual feasibility and complementary slackness.

    Raises ``AssertionError`` on the first violation.  Passing proves the
    matching is minimum weight for ``graph``.
    """
    n = graph.num_vertices
    duals = result.duals
    parents: dict[int, list[int]] = {v: [] for v in range(n)}
    member = np.zeros((len(duals.blossoms), n), dtype=np.int64)
    for idx, (leaves, Y) in enumerate(duals.blossoms):
        assert Y >= 0, f"blossom {sorted(leaves)} has negative dual {Y}"
        assert len(leaves) % 2 == 1 and len(leaves) >= 3, "blossoms must be odd with at least 3 vertices"
        for v in leaves:
            parents[v].append(idx)
            member[idx, v] = 1
    ys = [Y for _, Y in duals.blossoms]

    def slack(i, j, w):
        a, b = set(parents[i]), set(parents[j])
        return w - duals.y[i] - duals.y[j] - sum(ys[k] for k in a ^ b)

    def bslack(i, w):
        return w - duals.y[i] - sum(ys[k] for k in parents[i])

    weights = graph.edge_weights()
    bmap = graph.boundary_map()
    # Dual feasibility, vectorised: radius r = y + sum of enclosing Y, and a
    # blossom holding both endpoints contributes to neither side of the slack.
    yv = np.array([duals.y[i] for i in range(n)], dtype=np.int64)
    Yv = np.array(ys, dtype=np.int64)
    radius = yv + Yv @ member
    if graph.edges:
        e = np.array(graph.edges, dtype=np.int64)
        ei, ej, ew = e[:, 0], e[:, 1], e[:, 2]
        shared = (Yv[:, None] * (member[:, ei] & member[:, ej])).sum(axis=0)
        bad = np.flatnonzero(ew - radius[ei] - radius[ej] + 2 * shared < 0)
        assert bad.size == 0, f"edge ({ei[bad[0]]}, {ej[bad[0]]}) has negative slack"
    if graph.boundary_edges:
        bi = np.array([i for i, _, _ in graph.boundary_edges], dtype=np.int64)
        bw = np.array([w for _, _, w in graph.boundary_edges], dtype=np.int64)
        bad = np.flatnonzero(bw - radius[bi] < 0)
        assert bad.size == 0, f"boundary edge of {bi[bad[0]]} has negative slack"

    mate = {}
    total = 0
    for i, j in result.pairs:
        assert i not in mate and j not in mate, "vertex matched twice"
        w = weights[(min(i, j), max(i, j))]
        assert slack(i, j, w) == 0, f"matched edge ({i}, {j}) is not tight"
        mate[i], mate[j] = j, i
        total += w
    for i, bid in result.boundary:
        assert i not in mate, "vertex matched twice"
        b, w = bmap[i]
        assert b == bid, "boundary id mismatch"
        assert bslack(i, w) == 0, f"boundary match of {i} is not tight"
        mate[i] = None
        total += w
    assert len(mate) == n, "matching is not perfect"
    assert total == result.doubled_weight, "reported weight disagrees with matched edges"
    for leaves, Y in duals.blossoms:
        if Y > 0:
            inside = sum(1 for i in leaves if mate[i] is not None and mate[i] in leaves)
            assert inside == len(leaves) - 1, f"blossom {sorted(leaves)} is not full"
    dual_objective = sum(duals.y.values()) + sum(ys)
    assert dual_objective == total, "primal and dual objectives differ"


def mwpm(graph: SyndromeGraph, *, verify: bool = True, debug: bool = False) -> MatchingResult:
    """Minimum-weight perfect matching of ``graph`` with boundary edges.

    With ``verify`` set, the returned matching is checked against its dual
    certificate before returning.
    """
    if graph.num_vertices == 0:
        return MatchingResult(duals=DualCertificate({}, []))
    m = Matcher.from_graph(graph, debug=debug)
    m.solve()
    res = m.result()
    if verify:
        verify_certificate(graph, res)
    return res
