"""
Information Theory
==================
Exact joint distribution between the encoded pair and what the attacker
observes, and the mutual information / error-rate trade-off built on it.

All tables fix the challenged basis to Z; the X tables are the same up to
relabeling of the outcomes.
"""

import csv
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from app.core.clonesim import F_SPCC_MAX, CloneParams, StrategyId, error_rate
from app.core.qstate import PAIR_SET, Basis, QubitState


LOST_SYMBOL = "L"

# Per-qubit observation alphabets
CLONE_SYMBOLS: tuple = (LOST_SYMBOL, (0, 0), (0, 1), (1, 0), (1, 1))
MEASURE_SYMBOLS: tuple = (0, 1)

CURVE_COLUMNS = ["strategy", "P", "F", "epsilon", "I_bits_per_qubit", "conditional", "physical"]


@dataclass(frozen=True)
class JointTable:
    """probs[k, j] = P(encoding k, observation symbols[j])."""
    probs: np.ndarray
    symbols: tuple

    def __post_init__(self):
        if self.probs.shape != (len(PAIR_SET), len(self.symbols)):
            raise ValueError(f"Joint table shape {self.probs.shape} does not match alphabet")
        if (self.probs < 0).any():
            raise ValueError("Joint table has negative entries")

    @property
    def total(self) -> float:
        return float(self.probs.sum())

    def conditioned_on(self, keep: Sequence[bool]) -> "JointTable":
        """Restrict to the kept observations and renormalize."""
        mask = np.asarray(keep, dtype=bool)
        sub = self.probs[:, mask]
        mass = sub.sum()
        if mass <= 0:
            raise ValueError("Conditioning event has zero probability")
        symbols = tuple(s for s, m in zip(self.symbols, mask) if m)
        return JointTable(sub / mass, symbols)


@dataclass(frozen=True)
class CurvePoint:
    fidelity: float
    error_rate: float
    info_bits: float
    conditional: bool
    physical: bool


# ── Entropy helpers ──────────────────────────────────────────────────────────

def entropy(p: np.ndarray) -> float:
    """Shannon entropy in bits; zero-probability cells contribute nothing."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def mutual_information(table: JointTable) -> float:
    """I(encoding; observation) in bits for a whole pair."""
    p = table.probs
    p_k = p.sum(axis=1)
    p_o = p.sum(axis=0)
    mi = entropy(p_k) + entropy(p_o) - entropy(p)
    return max(mi, 0.0)


# ── Enumeration ──────────────────────────────────────────────────────────────

def _clone_symbol_probs(state: QubitState, cp: CloneParams) -> dict:
    F, P = cp.fidelity, cp.success

    def clone_prob(x: int) -> float:
        if state.basis != Basis.Z:
            return 0.5
        return F if x == state.bit else 1 - F

    out = {LOST_SYMBOL: 1 - P}
    for a, b in itertools.product((0, 1), repeat=2):
        out[(a, b)] = P * clone_prob(a) * clone_prob(b)
    return out


def _measure_symbol_probs(state: QubitState) -> dict:
    if state.basis == Basis.Z:
        return {x: 1.0 if x == state.bit else 0.0 for x in MEASURE_SYMBOLS}
    return {x: 0.5 for x in MEASURE_SYMBOLS}


def observation_distribution(strategy: StrategyId, cp: CloneParams) -> JointTable:
    """
    Exact joint table over the 8 equiprobable encodings.

    Strategies I and II see the same clone outcomes (Lost included);
    strategy III sees one honest measurement bit per qubit.
    """
    if strategy is StrategyId.III:
        alphabet = MEASURE_SYMBOLS
    else:
        alphabet = CLONE_SYMBOLS

    def per_qubit(state: QubitState) -> dict:
        if strategy is StrategyId.III:
            return _measure_symbol_probs(state)
        return _clone_symbol_probs(state, cp)

    symbols = tuple(itertools.product(alphabet, repeat=2))
    probs = np.zeros((len(PAIR_SET), len(symbols)))
    for k, pair in enumerate(PAIR_SET):
        d1, d2 = per_qubit(pair.first), per_qubit(pair.second)
        for j, (s1, s2) in enumerate(symbols):
            probs[k, j] = d1[s1] * d2[s2] / len(PAIR_SET)
    return JointTable(probs, symbols)


def mutual_info_per_qubit(strategy: StrategyId, cp: CloneParams) -> float:
    return mutual_information(observation_distribution(strategy, cp)) / 2


def conditional_mutual_info_per_qubit(cp: CloneParams) -> float:
    """Mutual information per qubit given that both qubits of the pair were cloned."""
    table = observation_distribution(StrategyId.II, cp)
    keep = [LOST_SYMBOL not in sym for sym in table.symbols]
    return mutual_information(table.conditioned_on(keep)) / 2


# ── Trade-off curves ─────────────────────────────────────────────────────────

def trade_off_curve(
    strategy: StrategyId, P: float, f_grid: Iterable[float], conditional: bool = False
) -> list[CurvePoint]:
    grid = sorted(float(f) for f in f_grid)
    if not grid:
        raise ValueError("Fidelity grid is empty")
    if grid[0] < 0.5 or grid[-1] > 1.0:
        raise ValueError(f"Fidelity grid must lie in [0.5, 1], got [{grid[0]}, {grid[-1]}]")

    if strategy is StrategyId.III:
        cp = CloneParams(1.0, 1.0)
        return [CurvePoint(
            fidelity=1.0,
            error_rate=error_rate(strategy, cp),
            info_bits=mutual_info_per_qubit(strategy, cp),
            conditional=conditional,
            physical=True,
        )]

    points = []
    for F in grid:
        cp = CloneParams(F, P)
        info = conditional_mutual_info_per_qubit(cp) if conditional else mutual_info_per_qubit(strategy, cp)
        points.append(CurvePoint(
            fidelity=F,
            error_rate=error_rate(strategy, cp),
            info_bits=info,
            conditional=conditional,
            physical=F <= F_SPCC_MAX,
        ))
    return points


def write_curve_csv(
    points: Iterable[CurvePoint], strategy: StrategyId, P: float, stream: TextIO, header: bool = True
) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    if header:
        writer.writerow(CURVE_COLUMNS)
    n = 0
    for pt in points:
        writer.writerow([
            strategy.value, repr(float(P)), repr(pt.fidelity), repr(pt.error_rate),
            repr(pt.info_bits), str(pt.conditional).lower(), str(pt.physical).lower(),
        ])
        n += 1
    return n
