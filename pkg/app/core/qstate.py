"""
Qubit States
============
The two conjugate bases, the four single-qubit states and the
eight-element pair set every token is built from.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Basis(str, Enum):
    Z = "Z"    # outcomes 0/1
    X = "X"    # outcomes +/-, reported as 0/1


def conjugate(basis: Basis) -> Basis:
    return Basis.X if basis is Basis.Z else Basis.Z


class QubitState(str, Enum):
    ZERO = "0"
    ONE = "1"
    PLUS = "+"
    MINUS = "-"

    @property
    def basis(self) -> Basis:
        return _BASIS_OF[self]

    @property
    def bit(self) -> int:
        return _BIT_OF[self]


_BASIS_OF = {
    QubitState.ZERO: Basis.Z,
    QubitState.ONE: Basis.Z,
    QubitState.PLUS: Basis.X,
    QubitState.MINUS: Basis.X,
}

_BIT_OF = {
    QubitState.ZERO: 0,
    QubitState.ONE: 1,
    QubitState.PLUS: 0,
    QubitState.MINUS: 1,
}

_STATE_OF = {(s.basis, s.bit): s for s in QubitState}


def qubit_state(basis: Basis, bit: int) -> QubitState:
    """Inverse of the (basis, bit) projection."""
    try:
        return _STATE_OF[(Basis(basis), int(bit))]
    except (KeyError, ValueError):
        raise ValueError(f"No qubit state for basis={basis!r}, bit={bit!r}")


@dataclass(frozen=True)
class PairState:
    first: QubitState
    second: QubitState

    def __post_init__(self):
        if self.first.basis == self.second.basis:
            raise ValueError(
                f"Pair |{self.first.value}{self.second.value}> must mix one Z and one X qubit"
            )

    @property
    def index(self) -> int:
        return pair_index(self)

    def qubit(self, position: int) -> QubitState:
        """Qubit at position 1 or 2."""
        if position == 1:
            return self.first
        if position == 2:
            return self.second
        raise ValueError(f"Pair position must be 1 or 2, got {position}")

    def matched_position(self, basis: Basis) -> int:
        """Position of the qubit encoded in the challenged basis."""
        return 1 if self.first.basis == basis else 2

    def __str__(self) -> str:
        return f"|{self.first.value}{self.second.value}>"


_Q = QubitState

# Written order of the pair set: index -> (first, second)
PAIR_SET: tuple[PairState, ...] = (
    PairState(_Q.ZERO, _Q.PLUS),
    PairState(_Q.ZERO, _Q.MINUS),
    PairState(_Q.ONE, _Q.PLUS),
    PairState(_Q.ONE, _Q.MINUS),
    PairState(_Q.PLUS, _Q.ZERO),
    PairState(_Q.MINUS, _Q.ZERO),
    PairState(_Q.PLUS, _Q.ONE),
    PairState(_Q.MINUS, _Q.ONE),
)

_INDEX_OF = {p: k for k, p in enumerate(PAIR_SET)}


def pair_from_index(k: int) -> PairState:
    if not 0 <= k < len(PAIR_SET):
        raise ValueError(f"Pair index must be in 0..7, got {k}")
    return PAIR_SET[k]


def pair_index(pair: PairState) -> int:
    return _INDEX_OF[pair]


def measure(state: QubitState, basis: Basis, rng: np.random.Generator) -> int:
    """Projective measurement: deterministic in the state's own basis, a fair coin otherwise."""
    if state.basis == basis:
        return state.bit
    return int(rng.integers(2))
