"""
Cloning Channel
===============
Statistical model of symmetric phase-covariant cloning followed by a
measurement of both clones in the challenged basis.

Per qubit: lost with probability 1 - P; otherwise each clone reproduces
the original bit with probability F when the challenged basis matches
the encoding basis, and is a fair coin when it does not. The two clones
are conditionally independent given the input state.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy import stats

from app.core.qstate import PAIR_SET, Basis, PairState, QubitState, qubit_state


F_SPCC_MAX = 0.5 * (1 + 1 / math.sqrt(2))
F_CLASSICAL = 0.75
P_LINEAR = 1 / 3

# Average fidelity measured on the optical cloner
F_EXPERIMENT = 0.803


# ── Parameters and outcomes ──────────────────────────────────────────────────

@dataclass(frozen=True)
class CloneParams:
    fidelity: float
    success: float = 1.0

    def __post_init__(self):
        if not 0.5 <= self.fidelity <= 1.0:
            raise ValueError(f"Clone fidelity must be in [0.5, 1], got {self.fidelity}")
        if not 0.0 < self.success <= 1.0:
            raise ValueError(f"Cloning success probability must be in (0, 1], got {self.success}")

    @property
    def physical(self) -> bool:
        return self.fidelity <= F_SPCC_MAX


@dataclass(frozen=True)
class QubitCloneOutcome:
    """Both clone bits, or None for a lost qubit."""
    bits: Optional[tuple[int, int]] = None

    @classmethod
    def lost(cls) -> "QubitCloneOutcome":
        return cls(None)

    @property
    def is_lost(self) -> bool:
        return self.bits is None

    @property
    def agree(self) -> bool:
        return self.bits is not None and self.bits[0] == self.bits[1]

    def to_json(self) -> Optional[list[int]]:
        return None if self.bits is None else list(self.bits)

    @classmethod
    def from_json(cls, raw: Optional[list[int]]) -> "QubitCloneOutcome":
        if raw is None:
            return cls.lost()
        if len(raw) != 2:
            raise ValueError(f"Clone outcome needs two bits, got {raw!r}")
        return cls((int(raw[0]), int(raw[1])))


LOST = QubitCloneOutcome.lost()


@dataclass(frozen=True)
class EventProbs:
    p_correct: float
    p_error: float

    @property
    def p_total(self) -> float:
        return self.p_correct + self.p_error


class StrategyId(str, Enum):
    I = "i"        # always answer, random bit on failure
    II = "ii"      # report losses
    III = "iii"    # no cloning


# ── Inferences ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SixEliminated:
    position: int
    state: QubitState


@dataclass(frozen=True)
class FourCandidates:
    candidates: frozenset[PairState]


@dataclass(frozen=True)
class NoInference:
    pass


Inference = Union[SixEliminated, FourCandidates, NoInference]


# ── Sampling ─────────────────────────────────────────────────────────────────

def clone_and_measure_qubit(
    state: QubitState, basis: Basis, cp: CloneParams, rng: np.random.Generator
) -> QubitCloneOutcome:
    if rng.random() >= cp.success:
        return LOST
    if state.basis == basis:
        flips = rng.random(2) >= cp.fidelity
        return QubitCloneOutcome(tuple(int(state.bit ^ f) for f in flips))
    a, b = rng.integers(2, size=2)
    return QubitCloneOutcome((int(a), int(b)))


def clone_and_measure_many(
    true_bits: np.ndarray, matched: np.ndarray, cp: CloneParams, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized clone_and_measure_qubit.

    true_bits: encoded bit per qubit; matched: whether the challenged
    basis equals the encoding basis. Returns (lost, bit_a, bit_b); bits
    of lost qubits are meaningless.
    """
    true_bits = np.asarray(true_bits, dtype=np.int8)
    matched = np.asarray(matched, dtype=bool)
    n = true_bits.shape[0]

    lost = rng.random(n) >= cp.success
    wrong = rng.random((2, n)) >= cp.fidelity
    coins = rng.integers(2, size=(2, n), dtype=np.int8)

    cloned = np.where(matched, true_bits ^ wrong, coins)
    return lost, cloned[0].astype(np.int8), cloned[1].astype(np.int8)


# ── Event classification ─────────────────────────────────────────────────────

def classify_pair(o1: QubitCloneOutcome, o2: QubitCloneOutcome, basis: Basis) -> Inference:
    if o1.is_lost or o2.is_lost:
        return NoInference()

    if o1.agree and not o2.agree:
        return SixEliminated(1, qubit_state(basis, o1.bits[0]))
    if o2.agree and not o1.agree:
        return SixEliminated(2, qubit_state(basis, o2.bits[0]))
    if o1.agree and o2.agree:
        s1 = qubit_state(basis, o1.bits[0])
        s2 = qubit_state(basis, o2.bits[0])
        return FourCandidates(frozenset(p for p in PAIR_SET if p.first == s1 or p.second == s2))
    return NoInference()


# ── Closed forms ─────────────────────────────────────────────────────────────

def event_probabilities(cp: CloneParams) -> EventProbs:
    F, P = cp.fidelity, cp.success
    return EventProbs(
        p_correct=0.5 * P**2 * F**2,
        p_error=0.5 * P**2 * (1 - F) ** 2 + P**2 * F * (1 - F),
    )


def error_rate(strategy: StrategyId, cp: CloneParams) -> float:
    F, P = cp.fidelity, cp.success
    if strategy is StrategyId.I:
        return 0.5 * (1 - P) + P * (1 - F)
    if strategy is StrategyId.II:
        return 1 - F
    return 0.0


def stealth_acceptance(
    strategy: StrategyId, cp: CloneParams, pairs: int, max_error: float
) -> float:
    """
    Exact probability that a token of `pairs` pairs passes the error
    threshold (loss threshold not applied).

    Strategy I answers every pair; strategy II only the cloned ones, so
    the error count is binomial over a binomial number of checked qubits.
    """
    eps = error_rate(strategy, cp)
    if strategy is StrategyId.II and cp.success < 1:
        total = 0.0
        for checked in range(pairs + 1):
            w = stats.binom.pmf(checked, pairs, cp.success)
            limit = math.floor(max_error * checked + 1e-12) if checked else 0
            total += w * (1.0 if checked == 0 else stats.binom.cdf(limit, checked, eps))
        return float(total)
    limit = math.floor(max_error * pairs + 1e-12)
    return float(stats.binom.cdf(limit, pairs, eps))


# ── Monte Carlo tallies ──────────────────────────────────────────────────────

@dataclass(frozen=True)
class EventCounts:
    pairs: int
    correct: int
    erroneous: int
    four_candidates: int

    @property
    def no_inference(self) -> int:
        return self.pairs - self.correct - self.erroneous - self.four_candidates

    def frequencies(self) -> dict[str, float]:
        return {
            "correct": self.correct / self.pairs,
            "erroneous": self.erroneous / self.pairs,
            "total": (self.correct + self.erroneous) / self.pairs,
            "four_candidates": self.four_candidates / self.pairs,
        }


# (first basis is Z, first bit, second bit) for each index of the pair set
_PAIR_TABLE = np.array(
    [(p.first.basis is Basis.Z, p.first.bit, p.second.bit) for p in PAIR_SET],
    dtype=np.int8,
)


def simulate_events(
    cp: CloneParams, n_pairs: int, rng: np.random.Generator, chunk: int = 200_000
) -> EventCounts:
    """Sample random encodings and challenges and tally the attacker's inference events."""
    correct = erroneous = four = 0
    done = 0
    while done < n_pairs:
        n = min(chunk, n_pairs - done)
        k = rng.integers(8, size=n)
        challenge_z = rng.integers(2, size=n).astype(bool)
        first_z, b1, b2 = (_PAIR_TABLE[k, i] for i in range(3))

        m1 = first_z.astype(bool) == challenge_z
        m2 = ~m1
        lost1, a1, c1 = clone_and_measure_many(b1, m1, cp, rng)
        lost2, a2, c2 = clone_and_measure_many(b2, m2, cp, rng)

        ok = ~lost1 & ~lost2
        agree1 = a1 == c1
        agree2 = a2 == c2
        six1 = ok & agree1 & ~agree2
        six2 = ok & agree2 & ~agree1

        right1 = six1 & m1 & (a1 == b1)
        right2 = six2 & m2 & (a2 == b2)
        n_right = int(right1.sum() + right2.sum())

        correct += n_right
        erroneous += int(six1.sum() + six2.sum()) - n_right
        four += int((ok & agree1 & agree2).sum())
        done += n
    return EventCounts(n_pairs, correct, erroneous, four)
