"""
Sniff Log -> Constraints
========================
Turns raw clone outcomes into statements about which pair the bank
encoded at a given (serial, pair index).
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from app.core.clonesim import FourCandidates, SixEliminated, classify_pair
from app.core.qstate import PAIR_SET, PairState, QubitState
from app.terminal.respond import SniffRecord


CONSTRAINT_COLUMNS = ["serial", "pair", "position", "state"]


@dataclass(frozen=True)
class Constraint:
    """Six encodings eliminated: the qubit at `position` was `state`."""
    serial: str
    pair_index: int
    position: int
    state: QubitState

    @property
    def mask(self) -> int:
        return _position_mask(self.position, self.state)


@dataclass(frozen=True)
class Hint:
    """Four encodings eliminated."""
    serial: str
    pair_index: int
    candidates: frozenset[PairState]

    @property
    def mask(self) -> int:
        return sum(1 << p.index for p in self.candidates)


Inference = Union[Constraint, Hint]


def _position_mask(position: int, state: QubitState) -> int:
    return sum(1 << k for k, p in enumerate(PAIR_SET) if p.qubit(position) == state)


def _classify(record: SniffRecord):
    if not record.cloned:
        raise ValueError(
            f"Record {record.serial}/{record.pair_index} holds plain measurements, not clone outcomes"
        )
    return classify_pair(record.q1, record.q2, record.basis)


def extract_constraints(log: Iterable[SniffRecord]) -> list[Constraint]:
    out = []
    for record in log:
        inference = _classify(record)
        if isinstance(inference, SixEliminated):
            out.append(Constraint(record.serial, record.pair_index, inference.position, inference.state))
    return out


def extract_hints(log: Iterable[SniffRecord]) -> list[Hint]:
    out = []
    for record in log:
        inference = _classify(record)
        if isinstance(inference, FourCandidates):
            out.append(Hint(record.serial, record.pair_index, inference.candidates))
    return out


# ── Serial batches ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SerialBatch:
    """Everything sniffed from one serial: which pairs were seen and what they imply."""
    serial: str
    sniffed: tuple[int, ...]
    inferences: tuple[Inference, ...]

    def truncated(self, n_pairs: int) -> "SerialBatch":
        """Keep only the first n_pairs sniffed pairs."""
        kept = self.sniffed[:n_pairs]
        allowed = set(kept)
        return SerialBatch(self.serial, kept, tuple(i for i in self.inferences if i.pair_index in allowed))


def batch_log(log: Iterable[SniffRecord], count_four: bool = False) -> list[SerialBatch]:
    """Group a sniff log by serial, in order of first appearance."""
    sniffed: dict[str, list[int]] = {}
    inferences: dict[str, list[Inference]] = {}
    for record in log:
        sniffed.setdefault(record.serial, []).append(record.pair_index)
        bucket = inferences.setdefault(record.serial, [])
        inference = _classify(record)
        if isinstance(inference, SixEliminated):
            bucket.append(Constraint(record.serial, record.pair_index, inference.position, inference.state))
        elif count_four and isinstance(inference, FourCandidates):
            bucket.append(Hint(record.serial, record.pair_index, inference.candidates))
    return [SerialBatch(s, tuple(sniffed[s]), tuple(inferences[s])) for s in sniffed]


def batches_from_constraints(constraints: Iterable[Inference]) -> list[SerialBatch]:
    """Batches when only the constraints survive (e.g. read back from CSV)."""
    grouped: dict[str, list[Inference]] = {}
    for c in constraints:
        grouped.setdefault(c.serial, []).append(c)
    return [
        SerialBatch(s, tuple(c.pair_index for c in cs), tuple(cs))
        for s, cs in grouped.items()
    ]


# ── Constraint files ──────────────────────────────────────────────────────────

def write_constraints_csv(constraints: Iterable[Constraint], path: Path) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CONSTRAINT_COLUMNS)
        for c in constraints:
            writer.writerow([c.serial, c.pair_index, c.position, c.state.value])
            n += 1
    return n


def read_constraints_csv(path: Path) -> list[Constraint]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            Constraint(row["serial"], int(row["pair"]), int(row["position"]), QubitState(row["state"]))
            for row in csv.DictReader(fh)
        ]
