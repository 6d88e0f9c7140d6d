"""
Terminal Client
===============
Drives transactions against a running bank service.
"""

import asyncio
import logging
from typing import Callable

from app.bank.protocol import (
    ChallengeMessage,
    ChallengeRequest,
    ErrorMessage,
    ProtocolError,
    ResponseMessage,
    VerdictMessage,
    decode,
    encode,
)
from app.bank.verifier import Challenge, Response, Verdict
from app.mint.encoding import Token


logger = logging.getLogger(__name__)

Responder = Callable[[Token, Challenge], Response]


class TerminalClient:
    def __init__(self, host: str, port: int):
        self.host = host
        self.port = port
        self._reader: asyncio.StreamReader | None = None
        self._writer: asyncio.StreamWriter | None = None

    async def __aenter__(self) -> "TerminalClient":
        self._reader, self._writer = await asyncio.open_connection(self.host, self.port)
        return self

    async def __aexit__(self, *exc) -> None:
        if self._writer is not None:
            self._writer.close()
            await self._writer.wait_closed()
        self._reader = self._writer = None

    async def request(self, message) -> object:
        if self._writer is None:
            raise RuntimeError("TerminalClient is not connected")
        self._writer.write(encode(message))
        await self._writer.drain()
        line = await self._reader.readline()
        if not line:
            raise ProtocolError("Bank closed the connection")
        reply = decode(line)
        if isinstance(reply, ErrorMessage):
            raise ProtocolError(reply.message)
        return reply

    async def transact(self, token: Token, responder: Responder) -> Verdict:
        """Challenge, answer through `responder`, return the bank's verdict."""
        challenge = await self.request(ChallengeRequest(serial=token.serial))
        if not isinstance(challenge, ChallengeMessage):
            raise ProtocolError(f"Expected a challenge, got {challenge.type!r}")

        response = responder(token, challenge.to_challenge())
        verdict = await self.request(ResponseMessage.of(response))
        if not isinstance(verdict, VerdictMessage):
            raise ProtocolError(f"Expected a verdict, got {verdict.type!r}")

        logger.debug("transaction %s: accepted=%s", token.serial, verdict.accepted)
        return verdict.to_verdict()
