"""
Terminal Responders
===================
Honest terminal, and the compromised terminal that clones the card's
qubits before answering the bank.

Strategies:
  I   - clone; answer with clone A, or a random bit when cloning fails
  II  - clone; answer with clone A, or report the qubit lost
  III - no cloning; measure honestly and keep the outcomes
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Union

import numpy as np

from app.bank.verifier import Challenge, Response
from app.core.clonesim import CloneParams, QubitCloneOutcome, StrategyId, clone_and_measure_many
from app.core.qstate import Basis, measure
from app.mint.encoding import Token


logger = logging.getLogger(__name__)

SniffedQubit = Union[QubitCloneOutcome, int]


@dataclass(frozen=True)
class SniffRecord:
    serial: str
    pair_index: int
    basis: Basis
    q1: SniffedQubit
    q2: SniffedQubit

    @property
    def cloned(self) -> bool:
        return isinstance(self.q1, QubitCloneOutcome) and isinstance(self.q2, QubitCloneOutcome)

    @property
    def fully_cloned(self) -> bool:
        """Both qubits of the pair came out of the cloner."""
        return self.cloned and not self.q1.is_lost and not self.q2.is_lost

    def to_json(self) -> dict:
        def enc(q: SniffedQubit):
            return q.to_json() if isinstance(q, QubitCloneOutcome) else [int(q)]

        return {
            "serial": self.serial,
            "pair": self.pair_index,
            "basis": self.basis.value,
            "q1": enc(self.q1),
            "q2": enc(self.q2),
        }

    @classmethod
    def from_json(cls, raw: dict) -> "SniffRecord":
        def dec(q) -> SniffedQubit:
            if q is not None and len(q) == 1:
                return int(q[0])
            return QubitCloneOutcome.from_json(q)

        return cls(
            serial=str(raw["serial"]),
            pair_index=int(raw["pair"]),
            basis=Basis(raw["basis"]),
            q1=dec(raw["q1"]),
            q2=dec(raw["q2"]),
        )


def _check_lengths(token: Token, challenge: Challenge) -> None:
    if len(token.pairs) != len(challenge.bases):
        raise ValueError(
            f"Challenge has {len(challenge.bases)} bases for a {len(token.pairs)}-pair token"
        )


# ── Honest terminal ───────────────────────────────────────────────────────────

def honest_respond(token: Token, challenge: Challenge, rng: np.random.Generator) -> Response:
    _check_lengths(token, challenge)
    outcomes = tuple(
        (measure(pair.first, basis, rng), measure(pair.second, basis, rng))
        for pair, basis in zip(token.pairs, challenge.bases)
    )
    return Response(token.serial, outcomes)


# ── Compromised terminal ──────────────────────────────────────────────────────

def _token_arrays(token: Token, challenge: Challenge) -> tuple[np.ndarray, ...]:
    bits1 = np.array([p.first.bit for p in token.pairs], dtype=np.int8)
    bits2 = np.array([p.second.bit for p in token.pairs], dtype=np.int8)
    match1 = np.array([p.first.basis == b for p, b in zip(token.pairs, challenge.bases)])
    match2 = np.array([p.second.basis == b for p, b in zip(token.pairs, challenge.bases)])
    return bits1, bits2, match1, match2


def attack_respond(
    strategy: StrategyId,
    cp: CloneParams,
    token: Token,
    challenge: Challenge,
    rng: np.random.Generator,
) -> tuple[Response, list[SniffRecord]]:
    _check_lengths(token, challenge)
    n = len(token.pairs)
    bits1, bits2, match1, match2 = _token_arrays(token, challenge)

    if strategy is StrategyId.III:
        coins = rng.integers(2, size=(2, n), dtype=np.int8)
        m1 = np.where(match1, bits1, coins[0])
        m2 = np.where(match2, bits2, coins[1])
        outcomes = tuple((int(a), int(b)) for a, b in zip(m1, m2))
        records = [
            SniffRecord(token.serial, j, challenge.bases[j], outcomes[j][0], outcomes[j][1])
            for j in range(n)
        ]
        return Response(token.serial, outcomes), records

    lost1, a1, b1 = clone_and_measure_many(bits1, match1, cp, rng)
    lost2, a2, b2 = clone_and_measure_many(bits2, match2, cp, rng)

    if strategy is StrategyId.I:
        fallback = rng.integers(2, size=(2, n), dtype=np.int8)
        r1 = [int(f) if lost else int(a) for lost, a, f in zip(lost1, a1, fallback[0])]
        r2 = [int(f) if lost else int(a) for lost, a, f in zip(lost2, a2, fallback[1])]
    else:
        r1 = [None if lost else int(a) for lost, a in zip(lost1, a1)]
        r2 = [None if lost else int(a) for lost, a in zip(lost2, a2)]

    def outcome(lost: bool, a: int, b: int) -> QubitCloneOutcome:
        return QubitCloneOutcome.lost() if lost else QubitCloneOutcome((int(a), int(b)))

    records = [
        SniffRecord(
            token.serial, j, challenge.bases[j],
            outcome(lost1[j], a1[j], b1[j]),
            outcome(lost2[j], a2[j], b2[j]),
        )
        for j in range(n)
    ]
    return Response(token.serial, tuple(zip(r1, r2))), records


class CompromisedTerminal:
    """
    A payment terminal that sniffs a random fraction of the transactions
    it handles and answers the rest honestly.
    """

    def __init__(
        self,
        strategy: StrategyId,
        cp: CloneParams,
        rng: np.random.Generator,
        sniff_fraction: float = 1.0,
    ):
        if not 0.0 <= sniff_fraction <= 1.0:
            raise ValueError(f"sniff_fraction must be in [0, 1], got {sniff_fraction}")
        self.strategy = strategy
        self.cp = cp
        self.rng = rng
        self.sniff_fraction = sniff_fraction
        self.log: list[SniffRecord] = []
        self.transactions = 0
        self.sniffed = 0

    def respond(self, token: Token, challenge: Challenge) -> Response:
        self.transactions += 1
        if self.sniff_fraction < 1.0 and self.rng.random() >= self.sniff_fraction:
            return honest_respond(token, challenge, self.rng)
        response, records = attack_respond(self.strategy, self.cp, token, challenge, self.rng)
        self.log.extend(records)
        self.sniffed += 1
        return response


# ── Sniff log files ───────────────────────────────────────────────────────────

def write_sniff_log(records: Iterable[SniffRecord], path: Path, append: bool = False) -> int:
    n = 0
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json()) + "\n")
            n += 1
    logger.debug("wrote %d sniff records to %s", n, path)
    return n


def read_sniff_log(path: Path) -> Iterator[SniffRecord]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield SniffRecord.from_json(json.loads(line))
