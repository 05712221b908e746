"""Planar surface-code geometry, bit-flip noise and Z-stabilizer readout.

The code lives on an ``n x n`` lattice with ``n = 2d - 1``.  Site ``(i, j)``
holds a data qubit when ``i + j`` is even, a Z stabilizer when ``i`` is odd and
``j`` is even, and an X stabilizer otherwise.  Smooth boundaries run along the
top and bottom, rough boundaries along the left and right.

Z stabilizers are addressed by ``(row, col)`` with ``row = (i - 1) // 2`` and
``col = j // 2``, giving a ``(d - 1) x d`` grid.  Data qubits on even rows form
the ``d x d`` "vertical" grid (each couples two stabilizers in one column, or
one stabilizer and the top/bottom boundary); data qubits on odd rows form the
``(d - 1) x (d - 1)`` "horizontal" grid coupling neighbouring columns.

Only the X channel is simulated.  Logical X failure is read off the parity of
flipped qubits on the top row of the lattice.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import NonEmptySyndrome


class Mode(str, enum.Enum):
    TWO_D = "2d"
    THREE_D = "3d"


@dataclass(frozen=True)
class LatticeConfig:
    d: int
    mode: Mode = Mode.TWO_D

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 3 or self.d % 2 == 0:
            raise ValueError(f"code distance must be an odd integer >= 3, got {self.d!r}")
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def n(self) -> int:
        return 2 * self.d - 1

    @property
    def stabilizer_shape(self) -> tuple[int, int]:
        return (self.d - 1, self.d)

    @property
    def num_data(self) -> int:
        return self.d * self.d + (self.d - 1) * (self.d - 1)

    @property
    def data_mask(self) -> np.ndarray:
        i, j = np.indices((self.n, self.n))
        return (i + j) % 2 == 0

    def data_sites(self) -> list[tuple[int, int]]:
        """Lattice coordinates of every data qubit, row-major."""
        n = self.n
        return [(i, j) for i in range(n) for j in range(n) if (i + j) % 2 == 0]

    def is_data_site(self, i: int, j: int) -> bool:
        return 0 <= i < self.n and 0 <= j < self.n and (i + j) % 2 == 0


@dataclass(frozen=True)
class NoiseParams:
    """Data flip probability ``p`` and measurement flip probability ``q``.

    ``q`` defaults to ``p`` in 3-D mode and must be zero in 2-D mode.
    """

    p: float
    q: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.q is not None and not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")

    def measurement_rate(self, mode: Mode) -> float:
        if Mode(mode) is Mode.TWO_D:
            if self.q:
                raise ValueError("measurement errors are not defined in 2-D mode")
            return 0.0
        return self.p if self.q is None else self.q


@dataclass
class ErrorState:
    """Accumulated X flips on the data qubits.

    ``data`` is an ``n x n`` boolean array; only data sites may be set.
    ``meas_flips`` holds ``(row, col, round)`` measurement-flip records and is
    always empty in 2-D mode.
    """

    config: LatticeConfig
    data: np.ndarray = None
    meas_flips: set = field(default_factory=set)

    def __post_init__(self):
        n = self.config.n
        if self.data is None:
            self.data = np.zeros((n, n), dtype=bool)
        else:
            self.data = np.asarray(self.data, dtype=bool)
            if self.data.shape != (n, n):
                raise ValueError(f"data must have shape {(n, n)}, got {self.data.shape}")
            if np.any(self.data & ~self.config.data_mask):
                raise ValueError("flips recorded on non-data sites")
        if self.config.mode is Mode.TWO_D and self.meas_flips:
            raise ValueError("measurement flips are only defined in 3-D mode")

    @classmethod
    def from_flips(cls, config: LatticeConfig, flips: Iterable[tuple[int, int]]) -> "ErrorState":
        """Build a state from lattice coordinates; repeated coordinates cancel."""
        state = cls(config)
        for i, j in flips:
            if not config.is_data_site(i, j):
                raise ValueError(f"({i}, {j}) is not a data qubit for d={config.d}")
            state.data[i, j] ^= True
        return state

    @property
    def flips(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in zip(*np.nonzero(self.data))}

    def copy(self) -> "ErrorState":
        return ErrorState(self.config, self.data.copy(), set(self.meas_flips))

    def toggle(self, flips: np.ndarray) -> None:
        self.data ^= flips


@dataclass(frozen=True)
class Syndrome:
    """Detection vertices: ``(row, col)`` in 2-D or ``(row, col, round)`` in 3-D."""

    vertices: frozenset

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(sorted(self.vertices))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Syndrome":
        return cls(frozenset((int(r), int(c)) for r, c in zip(*np.nonzero(arr))))


def sample_flips(config: LatticeConfig, p: float, rng: np.random.Generator) -> np.ndarray:
    """Draw one ``n x n`` flip pattern; data sites are visited row-major."""
    flips = np.zeros((config.n, config.n), dtype=bool)
    if p > 0.0:
        flips[config.data_mask] = rng.random(config.num_data) < p
    return flips


def apply_bit_flips(state: ErrorState, params: NoiseParams, rng: np.random.Generator) -> ErrorState:
    """Return a new state with every data qubit toggled independently with probability ``p``."""
    out = state.copy()
    out.toggle(sample_flips(state.config, params.p, rng))
    return out


def syndrome_array(data: np.ndarray) -> np.ndarray:
    """Z-stabilizer parities for flip arrays of shape ``(..., n, n)``.

    Returns a boolean array of shape ``(..., d - 1, d)``.
    """
    s = data[..., 0:-1:2, 0::2] ^ data[..., 2::2, 0::2]
    h = data[..., 1::2, 1::2]
    s[..., :, :-1] ^= h
    s[..., :, 1:] ^= h
    return s


def measure_z_stabilizers(state: ErrorState, round_index: int | None = None) -> Syndrome:
    """Stabilizers reporting -1 for the current data flips.

    With ``round_index`` set (3-D mode) the outcome of each stabilizer is
    XORed with any measurement flip recorded for that round.
    """
    arr = syndrome_array(state.data)
    if round_index is not None:
        for r, c, t in state.meas_flips:
            if t == round_index:
                arr[r, c] ^= True
    return Syndrome.from_array(arr)


def logical_x_parity(state: ErrorState) -> int:
    """Parity of flips on the top row; 1 means a logical X error."""
    if syndrome_array(state.data).any():
        raise NonEmptySyndrome("residual syndrome present; apply a correction first")
    return int(np.count_nonzero(state.data[0, 0::2]) & 1)


class NoisyMemory:
    """Phenomenological memory experiment, one round at a time.

    Each round toggles every data qubit with probability ``p``, then measures
    every Z stabilizer with its outcome flipped with probability ``q``.
    Detection events are the XOR of consecutive rounds' outcomes (the round
    before the first is taken as all +1).
    """

    def __init__(self, config: LatticeConfig, params: NoiseParams, rng: np.random.Generator):
        self.config = config
        self.p = params.p
        self.q = params.measurement_rate(Mode.THREE_D)
        self.rng = rng
        self.state = ErrorState(LatticeConfig(config.d, Mode.THREE_D))
        self.last = np.zeros(config.stabilizer_shape, dtype=bool)
        self.round = 0

    def step(self) -> list[tuple[int, int]]:
        """Run one noisy round; return its detection events as ``(row, col)``."""
        cfg = self.config
        self.state.toggle(sample_flips(cfg, self.p, self.rng))
        outcome = syndrome_array(self.state.data)
        if self.q > 0.0:
            mflips = self.rng.random(cfg.stabilizer_shape) < self.q
            for r, c in zip(*np.nonzero(mflips)):
                self.state.meas_flips.add((int(r), int(c), self.round))
            outcome ^= mflips
        events = outcome ^ self.last
        self.last = outcome
        self.round += 1
        return [(int(r), int(c)) for r, c in zip(*np.nonzero(events))]

    def perfect_events(self) -> list[tuple[int, int]]:
        """Events from a noiseless measurement after the latest round (state untouched)."""
        events = syndrome_array(self.state.data) ^ self.last
        return [(int(r), int(c)) for r, c in zip(*np.nonzero(events))]


@dataclass
class RoundRecord:
    """A finished 3-D record: per-round events (the last round is noiseless) and final data flips."""

    config: LatticeConfig
    events: list[list[tuple[int, int]]]
    data: np.ndarray

    @property
    def vertices(self) -> list[tuple[int, int, int]]:
        return [(r, c, t) for t, evs in enumerate(self.events) for r, c in evs]


def sample_record(config: LatticeConfig, params: NoiseParams, rounds: int,
                  rng: np.random.Generator) -> RoundRecord:
    """Simulate ``rounds`` noisy rounds followed by one perfect round."""
    mem = NoisyMemory(config, params, rng)
    events = [mem.step() for _ in range(rounds)]
    events.append(mem.perfect_events())
    return RoundRecord(config, events, mem.state.data.copy())
