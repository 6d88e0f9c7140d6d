"""
Bank Verification
=================
Issues tokens, draws basis challenges and checks terminal responses.

Only the matched qubit of each pair (the one encoded in the challenged
basis) is checked; outcomes of the conjugate qubit are random even for
an honest terminal.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from app.core.qstate import Basis
from app.core.token_states import TokenState
from app.db.ledger import Ledger, SpentTokenError, UnknownSerialError
from app.mint.encoding import EncodingSpec, Token, mint_token


logger = logging.getLogger(__name__)

Outcome = Optional[int]


@dataclass(frozen=True)
class Challenge:
    serial: str
    bases: tuple[Basis, ...]


@dataclass(frozen=True)
class Response:
    serial: str
    outcomes: tuple[tuple[Outcome, Outcome], ...]


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    error_rate: float
    loss_rate: float
    checked_qubits: int

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "error_rate": self.error_rate,
            "loss_rate": self.loss_rate,
            "checked": self.checked_qubits,
        }


@dataclass(frozen=True)
class Thresholds:
    max_error: float = 0.25
    max_loss: float = 0.75

    def __post_init__(self):
        for name in ("max_error", "max_loss"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")


def make_challenge(n_pairs: int, rng: np.random.Generator) -> tuple[Basis, ...]:
    """One uniformly random basis per pair; both qubits of a pair share it."""
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be positive, got {n_pairs}")
    draws = rng.integers(2, size=n_pairs)
    return tuple(Basis.Z if d == 0 else Basis.X for d in draws)


def score_response(token: Token, bases: Sequence[Basis], outcomes: Sequence[tuple]) -> tuple[int, int, int]:
    """(errors, checked, lost) over a response to a known token."""
    errors = checked = lost = 0
    for pair, basis, (o1, o2) in zip(token.pairs, bases, outcomes):
        lost += (o1 is None) + (o2 is None)
        position = pair.matched_position(basis)
        reported = o1 if position == 1 else o2
        if reported is None:
            continue
        checked += 1
        errors += int(reported) != pair.qubit(position).bit
    return errors, checked, lost


def verify(
    spec: EncodingSpec,
    serial: str,
    challenge: Challenge,
    response: Response,
    thresholds: Thresholds = Thresholds(),
) -> Verdict:
    if challenge.serial != serial or response.serial != serial:
        raise ValueError(
            f"Serial mismatch: verifying {serial!r}, challenge {challenge.serial!r}, response {response.serial!r}"
        )
    if len(challenge.bases) != spec.pairs_per_token:
        raise ValueError(f"Challenge has {len(challenge.bases)} bases, tokens have {spec.pairs_per_token} pairs")
    if len(response.outcomes) != len(challenge.bases):
        raise ValueError(
            f"Response has {len(response.outcomes)} outcomes for {len(challenge.bases)} challenged pairs"
        )

    token = mint_token(spec, serial)
    errors, checked, lost = score_response(token, challenge.bases, response.outcomes)

    error_rate = errors / checked if checked else 0.0
    loss_rate = lost / (2 * len(response.outcomes))
    accepted = error_rate <= thresholds.max_error and loss_rate <= thresholds.max_loss
    return Verdict(accepted, error_rate, loss_rate, checked)


class Bank:
    """Issuing bank: the secret spec, the ledger and the challenge stream."""

    def __init__(
        self,
        spec: EncodingSpec,
        ledger: Ledger,
        thresholds: Thresholds = Thresholds(),
        rng: Optional[np.random.Generator] = None,
        mark_spent: bool = False,
    ):
        self.spec = spec
        self.ledger = ledger
        self.thresholds = thresholds
        self.rng = rng if rng is not None else np.random.default_rng()
        self.mark_spent = mark_spent

    async def issue(self, serial: str) -> Token:
        await self.ledger.issue(serial, self.spec.hash.value, self.spec.pairs_per_token)
        return mint_token(self.spec, serial)

    async def challenge(self, serial: str) -> Challenge:
        entry = await self.ledger.get(serial)
        if entry.state is TokenState.SPENT:
            raise SpentTokenError(f"Token {serial} has already been spent")
        return Challenge(serial, make_challenge(self.spec.pairs_per_token, self.rng))

    async def verify(self, challenge: Challenge, response: Response) -> Verdict:
        if not await self.ledger.contains(response.serial):
            raise UnknownSerialError(response.serial)
        verdict = verify(self.spec, response.serial, challenge, response, self.thresholds)
        await self.ledger.record_verdict(
            response.serial, verdict.accepted, verdict.to_json(), mark_spent=self.mark_spent
        )
        logger.info(
            "verdict %s: accepted=%s error=%.3f loss=%.3f checked=%d",
            response.serial, verdict.accepted, verdict.error_rate, verdict.loss_rate, verdict.checked_qubits,
        )
        return verdict
