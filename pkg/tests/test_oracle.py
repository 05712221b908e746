import itertools

import numpy as np
import pytest

from surface_mwpm.errors import GraphInfeasible, TooLarge
from surface_mwpm.lattice import LatticeConfig
from surface_mwpm.oracle import MAX_VERTICES, brute_force_mwpm
from surface_mwpm.syndrome_graph import Boundary, SyndromeGraph, build_graph

from conftest import random_syndrome


def matching_weight(graph, plan):
    w = graph.edge_weights()
    b = graph.boundary_map()
    total = 0
    for i, j in plan:
        total += b[i][1] if j is None else w[(min(i, j), max(i, j))]
    return total // 2


def test_empty():
    assert brute_force_mwpm(SyndromeGraph([])) == (0, [])


def test_two_vertices():
    g = SyndromeGraph([(0, 0), (0, 1)], [(0, 1, 4)], [(0, Boundary.TOP, 6), (1, Boundary.TOP, 6)])
    weight, witness = brute_force_mwpm(g)
    assert weight == 2 and witness == [(0, 1)]


def test_too_large():
    g = SyndromeGraph([(0, i) for i in range(MAX_VERTICES + 1)])
    with pytest.raises(TooLarge):
        brute_force_mwpm(g)


def test_infeasible():
    with pytest.raises(GraphInfeasible):
        brute_force_mwpm(SyndromeGraph([(0, 0)]))


def test_witness_is_perfect_and_weighs_the_minimum(rng):
    for _ in range(200):
        d = int(rng.choice([3, 5, 7]))
        k = int(rng.integers(1, min(11, (d - 1) * d)))
        g = build_graph(random_syndrome(rng, d, k), LatticeConfig(d))
        weight, plan = brute_force_mwpm(g)
        covered = [i for i, j in plan] + [j for i, j in plan if j is not None]
        assert sorted(covered) == list(range(k))
        assert matching_weight(g, plan) == weight


def random_perfect_matching(rng, k):
    order = list(rng.permutation(k))
    plan = []
    while order:
        i = order.pop()
        if order and rng.random() < 0.6:
            plan.append((i, order.pop()))
        else:
            plan.append((i, None))
    return plan


def test_oracle_below_random_matchings(rng):
    for _ in range(200):
        d = int(rng.choice([5, 9]))
        k = int(rng.integers(1, 11))
        g = build_graph(random_syndrome(rng, d, k), LatticeConfig(d))
        weight, _ = brute_force_mwpm(g)
        for _ in range(10):
            assert weight <= matching_weight(g, random_perfect_matching(rng, k))


def test_exhaustive_small_enumeration():
    """Against a plain enumeration of every assignment for tiny graphs."""
    rng = np.random.default_rng(11)
    for _ in range(100):
        k = int(rng.integers(1, 7))
        g = build_graph(random_syndrome(rng, 5, k), LatticeConfig(5))
        w = g.edge_weights()
        b = g.boundary_map()
        best = None

        def rec(left, acc):
            nonlocal best
            if not left:
                best = acc if best is None else min(best, acc)
                return
            i, rest = left[0], left[1:]
            rec(rest, acc + b[i][1])
            for j in rest:
                rec(tuple(x for x in rest if x != j), acc + w[(i, j)])

        rec(tuple(range(k)), 0)
        assert brute_force_mwpm(g)[0] == best // 2


def test_pure():
    g = build_graph(random_syndrome(np.random.default_rng(1), 7, 10), LatticeConfig(7))
    assert brute_force_mwpm(g) == brute_force_mwpm(g)
