"""Perfect-measurement decoding: syndrome -> matching -> data-qubit correction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blossom import MatchingResult, mwpm
from .lattice import ErrorState, LatticeConfig, Syndrome, logical_x_parity
from .syndrome_graph import Boundary, Pruning, SyndromeGraph, build_graph


@dataclass
class Correction:
    """Data-qubit flips (``n x n`` boolean array) plus the matching that produced them."""

    flips: np.ndarray
    matching: MatchingResult | None = None
    graph: SyndromeGraph | None = None

    @property
    def qubits(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in zip(*np.nonzero(self.flips))}


def path_between(a, b) -> list[tuple[int, int]]:
    """Lattice sites of the L-shaped path from stabilizer ``a`` to ``b``: along the row, then the column."""
    r1, c1 = a[0], a[1]
    r2, c2 = b[0], b[1]
    sites = [(2 * r1 + 1, 2 * c + 1) for c in range(min(c1, c2), max(c1, c2))]
    sites += [(2 * r + 2, 2 * c2) for r in range(min(r1, r2), max(r1, r2))]
    return sites


def path_to_boundary(a, boundary: Boundary, config: LatticeConfig) -> list[tuple[int, int]]:
    """Lattice sites of the straight vertical path from stabilizer ``a`` to a smooth boundary."""
    r, c = a[0], a[1]
    if boundary == Boundary.TOP:
        rows = range(0, 2 * r + 1, 2)
    else:
        rows = range(2 * r + 2, 2 * config.d - 1, 2)
    return [(i, 2 * c) for i in rows]


def correction_from_matching(coords, matching: MatchingResult, config: LatticeConfig) -> np.ndarray:
    flips = np.zeros((config.n, config.n), dtype=bool)
    for i, j in matching.pairs:
        for site in path_between(coords[i], coords[j]):
            flips[site] ^= True
    for i, b in matching.boundary:
        for site in path_to_boundary(coords[i], b, config):
            flips[site] ^= True
    return flips


def decode_2d(syndrome: Syndrome, config: LatticeConfig,
              pruning: Pruning | str = Pruning.SHADOWED, *, verify: bool = True) -> Correction:
    """Match a perfect-measurement syndrome and return the data flips that clear it."""
    graph = build_graph(syndrome, config, pruning)
    matching = mwpm(graph, verify=verify)
    return Correction(correction_from_matching(graph.coords, matching, config), matching, graph)


def check_logical_failure(state: ErrorState, correction: Correction, *, restore: bool = True) -> int:
    """Apply ``correction`` to ``state`` and report whether a logical X error remains.

    With ``restore`` the state is returned to its original flips afterwards.
    """
    state.toggle(correction.flips)
    try:
        return logical_x_parity(state)
    finally:
        if restore:
            state.toggle(correction.flips)
