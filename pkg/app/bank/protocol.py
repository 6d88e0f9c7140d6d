"""
Wire Protocol
=============
Newline-delimited JSON messages between terminal and bank (UTF-8).
"""

from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from app.bank.verifier import Challenge, Response, Verdict
from app.core.qstate import Basis


Bit = Annotated[int, Field(ge=0, le=1)]


class ProtocolError(ValueError):
    pass


# ── Messages ──────────────────────────────────────────────────────────────────

class ChallengeRequest(BaseModel):
    type: Literal["challenge_request"] = "challenge_request"
    serial: str = Field(min_length=1)


class ChallengeMessage(BaseModel):
    type: Literal["challenge"] = "challenge"
    serial: str
    bases: list[Basis]

    @classmethod
    def of(cls, challenge: Challenge) -> "ChallengeMessage":
        return cls(serial=challenge.serial, bases=list(challenge.bases))

    def to_challenge(self) -> Challenge:
        return Challenge(self.serial, tuple(self.bases))


class ResponseMessage(BaseModel):
    type: Literal["response"] = "response"
    serial: str = Field(min_length=1)
    outcomes: list[tuple[Optional[Bit], Optional[Bit]]]

    @classmethod
    def of(cls, response: Response) -> "ResponseMessage":
        return cls(serial=response.serial, outcomes=[tuple(o) for o in response.outcomes])

    def to_response(self) -> Response:
        return Response(self.serial, tuple(tuple(o) for o in self.outcomes))


class VerdictMessage(BaseModel):
    type: Literal["verdict"] = "verdict"
    accepted: bool
    error_rate: float
    loss_rate: float
    checked: int

    @classmethod
    def of(cls, verdict: Verdict) -> "VerdictMessage":
        return cls(**verdict.to_json())

    def to_verdict(self) -> Verdict:
        return Verdict(self.accepted, self.error_rate, self.loss_rate, self.checked)


class ErrorMessage(BaseModel):
    type: Literal["error"] = "error"
    message: str


Message = Annotated[
    Union[ChallengeRequest, ChallengeMessage, ResponseMessage, VerdictMessage, ErrorMessage],
    Field(discriminator="type"),
]

_MESSAGE = TypeAdapter(Message)


def decode(line: Union[bytes, str]) -> BaseModel:
    try:
        return _MESSAGE.validate_json(line)
    except ValidationError as e:
        # Keep the first error only; the full pydantic report is noise on the wire
        first = e.errors()[0] if e.errors() else {"msg": str(e)}
        where = ".".join(str(p) for p in first.get("loc", ()))
        raise ProtocolError(f"Bad message{' at ' + where if where else ''}: {first['msg']}") from None


def encode(message: BaseModel) -> bytes:
    return message.model_dump_json().encode("utf-8") + b"\n"
