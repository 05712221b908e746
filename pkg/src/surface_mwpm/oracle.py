"""Exhaustive minimum-weight perfect matching with boundaries.

Ground truth for the blossom matcher on small graphs.  The lowest unassigned
vertex is paired with each remaining neighbour or sent to its boundary, and the
best completion is memoised on the set of vertices still unassigned.
"""

from __future__ import annotations

from functools import lru_cache

from .errors import GraphInfeasible, TooLarge
from .syndrome_graph import SyndromeGraph

MAX_VERTICES = 14


def brute_force_mwpm(graph: SyndromeGraph):
    """Return ``(weight, witness)`` for the cheapest perfect matching.

    ``weight`` is in lattice units (half the stored doubled weights).
    ``witness`` is a list of ``(i, j)`` pairs where ``j`` is ``None`` for a
    boundary match.
    """
    n = graph.num_vertices
    if n > MAX_VERTICES:
        raise TooLarge(f"{n} vertices exceeds the oracle limit of {MAX_VERTICES}")
    nbrs = [[] for _ in range(n)]
    for i, j, w in graph.edges:
        nbrs[i].append((j, w))
        nbrs[j].append((i, w))
    bnd = {i: w for i, _, w in graph.boundary_edges}
    inf = float("inf")

    @lru_cache(maxsize=None)
    def best(remaining: int):
        if remaining == 0:
            return 0, ()
        i = (remaining & -remaining).bit_length() - 1
        rest = remaining & ~(1 << i)
        cost, plan = inf, None
        if i in bnd:
            sub, subplan = best(rest)
            if sub + bnd[i] < cost:
                cost, plan = sub + bnd[i], ((i, None),) + subplan
        for j, w in nbrs[i]:
            if rest >> j & 1:
                sub, subplan = best(rest & ~(1 << j))
                if sub + w < cost:
                    cost, plan = sub + w, ((i, j),) + subplan
        return cost, plan

    cost, plan = best((1 << n) - 1)
    if plan is None:
        raise GraphInfeasible("graph has no perfect matching")
    return cost // 2, list(plan)
