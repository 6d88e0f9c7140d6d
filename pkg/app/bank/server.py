"""
Bank Service
============
Serves the challenge/response protocol over TCP. One VerificationSession
per connection; client mistakes are answered with an error message and
the connection stays open.
"""

import asyncio
import logging
from typing import Optional

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
from app.bank.verifier import Bank, Challenge
from app.core.session_fsm import VerificationSession
from app.core.token_states import IllegalTransitionError
from app.db.ledger import SpentTokenError, UnknownSerialError


logger = logging.getLogger(__name__)


class BankServer:
    def __init__(self, bank: Bank):
        self.bank = bank
        self._server: Optional[asyncio.AbstractServer] = None
        self.sessions_served = 0

    async def handle_line(self, session: VerificationSession, line: bytes):
        """One request in, one reply out."""
        try:
            message = decode(line)

            if isinstance(message, ChallengeRequest):
                challenge = await self.bank.challenge(message.serial)
                session.open_challenge(challenge.serial, list(challenge.bases))
                return ChallengeMessage.of(challenge)

            if isinstance(message, ResponseMessage):
                bases = session.check_response(message.serial)
                try:
                    verdict = await self.bank.verify(Challenge(message.serial, tuple(bases)), message.to_response())
                except (UnknownSerialError, SpentTokenError, ValueError) as e:
                    session.abort_challenge(message.serial, str(e))
                    raise
                session.close_challenge(message.serial, verdict.accepted)
                return VerdictMessage.of(verdict)

            raise ProtocolError(f"Unexpected message type {message.type!r}")

        except UnknownSerialError as e:
            return ErrorMessage(message=f"Unknown serial {e.args[0]!r}")
        except (ProtocolError, IllegalTransitionError, SpentTokenError, ValueError) as e:
            return ErrorMessage(message=str(e))

    async def handle_client(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        session = VerificationSession()
        peer = writer.get_extra_info("peername")
        logger.info("session %s opened from %s", session.id[:8], peer)
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                if not line.strip():
                    continue
                reply = await self.handle_line(session, line)
                if isinstance(reply, ErrorMessage):
                    logger.warning("session %s: %s", session.id[:8], reply.message)
                writer.write(encode(reply))
                await writer.drain()
        except ConnectionResetError:
            logger.info("session %s reset by peer", session.id[:8])
        finally:
            self.sessions_served += 1
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionResetError:
                pass
            logger.info("session %s closed after %d events", session.id[:8], len(session.history))

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> tuple[str, int]:
        self._server = await asyncio.start_server(self.handle_client, host, port)
        sock = self._server.sockets[0]
        bound = sock.getsockname()[:2]
        logger.info("bank listening on %s:%d", *bound)
        return bound

    async def serve_forever(self) -> None:
        if self._server is None:
            raise RuntimeError("BankServer.start() has not been called")
        async with self._server:
            await self._server.serve_forever()

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
