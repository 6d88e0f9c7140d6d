import asyncio
import json

import numpy as np
import pytest

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
from app.bank.server import BankServer
from app.bank.verifier import Bank, Challenge, Response, Thresholds
from app.core.clonesim import CloneParams, StrategyId
from app.core.qstate import Basis
from app.core.session_fsm import VerificationSession
from app.core.token_states import SessionState
from app.terminal.client import TerminalClient
from app.terminal.respond import CompromisedTerminal, honest_respond


class TestWireFormat:

    def test_challenge_line(self):
        line = encode(ChallengeMessage.of(Challenge("000", (Basis.Z, Basis.X))))
        assert line.endswith(b"\n")
        assert json.loads(line) == {"type": "challenge", "serial": "000", "bases": ["Z", "X"]}

    def test_response_with_lost_qubits(self):
        msg = decode(b'{"type":"response","serial":"1","outcomes":[[0,null],[null,1]]}')
        assert isinstance(msg, ResponseMessage)
        assert msg.to_response() == Response("1", ((0, None), (None, 1)))

    @pytest.mark.parametrize("line", [
        b"not json",
        b'{"type":"mystery"}',
        b'{"type":"response","serial":"1","outcomes":[[2,0]]}',
        b'{"type":"challenge_request","serial":""}',
    ])
    def test_malformed(self, line):
        with pytest.raises(ProtocolError):
            decode(line)


class TestHandleLine:

    async def test_full_exchange(self, bank, rng):
        token = await bank.issue("000")
        server = BankServer(bank)
        session = VerificationSession()

        challenge = await server.handle_line(session, encode(ChallengeRequest(serial="000")))
        assert isinstance(challenge, ChallengeMessage)

        response = honest_respond(token, challenge.to_challenge(), rng)
        verdict = await server.handle_line(session, encode(ResponseMessage.of(response)))
        assert isinstance(verdict, VerdictMessage)
        assert verdict.accepted

    async def test_double_spend_race_leaves_session_usable(self, spec, ledger, rng):
        bank = Bank(spec, ledger, Thresholds(), rng=np.random.default_rng(7), mark_spent=True)
        token = await bank.issue("000")
        await bank.issue("001")
        server = BankServer(bank)
        first, second = VerificationSession(), VerificationSession()

        challenges = [
            (await server.handle_line(s, encode(ChallengeRequest(serial="000")))).to_challenge()
            for s in (first, second)
        ]
        spent = await server.handle_line(first, encode(ResponseMessage.of(honest_respond(token, challenges[0], rng))))
        assert spent.accepted

        late = await server.handle_line(second, encode(ResponseMessage.of(honest_respond(token, challenges[1], rng))))
        assert isinstance(late, ErrorMessage)
        assert second.current_state is SessionState.IDLE

        reply = await server.handle_line(second, encode(ChallengeRequest(serial="001")))
        assert isinstance(reply, ChallengeMessage)
        assert second.current_state is SessionState.CHALLENGED

    async def test_response_without_challenge(self, bank):
        await bank.issue("000")
        reply = await BankServer(bank).handle_line(
            VerificationSession(), encode(ResponseMessage(serial="000", outcomes=[(0, 0)] * 40))
        )
        assert isinstance(reply, ErrorMessage)

    async def test_unknown_serial(self, bank):
        reply = await BankServer(bank).handle_line(VerificationSession(), b'{"type":"challenge_request","serial":"9"}')
        assert isinstance(reply, ErrorMessage)
        assert "9" in reply.message

    async def test_garbage(self, bank):
        reply = await BankServer(bank).handle_line(VerificationSession(), b"{{{")
        assert isinstance(reply, ErrorMessage)

    async def test_server_messages_are_not_requests(self, bank):
        reply = await BankServer(bank).handle_line(
            VerificationSession(), encode(ErrorMessage(message="hi"))
        )
        assert isinstance(reply, ErrorMessage)


class TestOverTcp:

    @pytest.fixture
    async def running(self, bank):
        tokens = [await bank.issue(f"{i:03d}") for i in range(5)]
        server = BankServer(bank)
        host, port = await server.start("127.0.0.1", 0)
        yield server, host, port, tokens
        await server.close()

    async def test_honest_sessions_accepted(self, running):
        server, host, port, tokens = running
        rng = np.random.default_rng(1)
        async with TerminalClient(host, port) as client:
            verdicts = [
                await client.transact(t, lambda tok, ch: honest_respond(tok, ch, rng)) for t in tokens
            ]
        assert all(v.accepted for v in verdicts)

    async def test_compromised_terminal_sniffs(self, running):
        _, host, port, tokens = running
        terminal = CompromisedTerminal(StrategyId.II, CloneParams(0.803), np.random.default_rng(2))
        async with TerminalClient(host, port) as client:
            for t in tokens:
                await client.transact(t, terminal.respond)
        assert len(terminal.log) == 5 * 40

    async def test_malformed_line_keeps_connection(self, running):
        _, host, port, tokens = running
        reader, writer = await asyncio.open_connection(host, port)
        try:
            writer.write(b"this is not json\n")
            await writer.drain()
            assert isinstance(decode(await reader.readline()), ErrorMessage)

            writer.write(encode(ChallengeRequest(serial=tokens[0].serial)))
            await writer.drain()
            assert isinstance(decode(await reader.readline()), ChallengeMessage)
        finally:
            writer.close()
            await writer.wait_closed()

    async def test_client_surfaces_errors(self, running):
        _, host, port, _ = running
        async with TerminalClient(host, port) as client:
            with pytest.raises(ProtocolError):
                await client.request(ChallengeRequest(serial="nope"))
