"""
Database-Backed Ledger
======================
Token lifecycle FSM persisted through SQLAlchemy.
Every transition is written to the append-only event log.
All writes go through one lock, so the ledger has a single writer.
"""

import asyncio
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from sqlalchemy import func, select
from sqlalchemy.ext.asyncio import AsyncSession, async_sessionmaker

from app.core.token_states import (
    TERMINAL_STATES,
    TRANSITIONS,
    IllegalTransitionError,
    TokenEvent,
    TokenState,
)
from app.db.models import IssuedToken, LedgerEvent


logger = logging.getLogger(__name__)


class DuplicateSerialError(ValueError):
    pass


class UnknownSerialError(KeyError):
    pass


class SpentTokenError(ValueError):
    pass


@dataclass(frozen=True)
class LedgerEntry:
    serial: str
    hash: str
    pairs: int
    state: TokenState
    issued_at: datetime

    @property
    def spent(self) -> bool:
        return self.state is TokenState.SPENT

    def to_json(self) -> dict:
        return {
            "serial": self.serial,
            "issued_at": int(self.issued_at.timestamp()),
            "spent": self.spent,
        }


def _aware(dt: datetime) -> datetime:
    # SQLite hands back naive datetimes; everything stored is UTC
    return dt if dt.tzinfo else dt.replace(tzinfo=timezone.utc)


def _entry(row: IssuedToken) -> LedgerEntry:
    return LedgerEntry(
        serial=row.serial,
        hash=row.hash,
        pairs=row.pairs,
        state=TokenState(row.state),
        issued_at=_aware(row.issued_at),
    )


class Ledger:
    """
    The bank's record of issued serials.
    Append-only: rows are never deleted, the event log is never updated.
    """

    def __init__(self, session_factory: async_sessionmaker[AsyncSession]):
        self.session_factory = session_factory
        self._writer = asyncio.Lock()

    # ── Writes ────────────────────────────────────────────────────────────────

    async def issue(
        self, serial: str, hash_name: str, pairs: int, issued_at: Optional[datetime] = None
    ) -> LedgerEntry:
        issued_at = issued_at or datetime.now(timezone.utc)
        async with self._writer, self.session_factory() as session:
            existing = await session.get(IssuedToken, serial)
            if existing is not None:
                raise DuplicateSerialError(f"Serial {serial!r} already issued")

            row = IssuedToken(
                serial=serial,
                hash=hash_name,
                pairs=pairs,
                state=TokenState.ISSUED.value,
                state_entered_at=issued_at,
                issued_at=issued_at,
            )
            session.add(row)
            session.add(LedgerEvent(
                serial=serial,
                from_state="NONE",
                event=TokenEvent.TOKEN_ISSUED.value,
                to_state=TokenState.ISSUED.value,
                payload={"hash": hash_name, "pairs": pairs},
                occurred_at=issued_at,
            ))
            await session.commit()
            logger.debug("issued %s", serial)
            return _entry(row)

    async def apply_event(self, serial: str, event: TokenEvent, payload: dict = None) -> TokenState:
        payload = payload or {}
        async with self._writer, self.session_factory() as session:
            return await self._apply(session, serial, event, payload)

    async def record_verdict(self, serial: str, accepted: bool, payload: dict, mark_spent: bool = False) -> TokenState:
        """Log a verdict, and spend the token after an acceptance when double-spend marking is on."""
        event = TokenEvent.VERIFICATION_ACCEPTED if accepted else TokenEvent.VERIFICATION_REJECTED
        async with self._writer, self.session_factory() as session:
            state = await self._apply(session, serial, event, payload)
            if accepted and mark_spent:
                state = await self._apply(session, serial, TokenEvent.TOKEN_SPENT, {})
            return state

    async def _apply(self, session: AsyncSession, serial: str, event: TokenEvent, payload: dict) -> TokenState:
        # 1. Load current token (row lock where the dialect has one)
        result = await session.execute(
            select(IssuedToken).where(IssuedToken.serial == serial).with_for_update()
        )
        row = result.scalar_one_or_none()
        if row is None:
            raise UnknownSerialError(serial)

        current_state = TokenState(row.state)

        # 2. Block terminal states
        if current_state in TERMINAL_STATES:
            raise SpentTokenError(
                f"Token {serial} is in terminal state {current_state.value}. Cannot apply {event.value}."
            )

        # 3. Look up transition
        next_state = TRANSITIONS.get((current_state, event))
        if next_state is None:
            raise IllegalTransitionError(f"Illegal transition: {current_state.value} + {event.value}")

        # 4. Immutable event log entry
        now = datetime.now(timezone.utc)
        session.add(LedgerEvent(
            serial=serial,
            from_state=current_state.value,
            event=event.value,
            to_state=next_state.value,
            payload=payload,
            occurred_at=now,
        ))

        # 5. Update snapshot
        if next_state != current_state:
            row.state = next_state.value
            row.state_entered_at = now

        await session.commit()
        logger.debug("token %s: %s + %s -> %s", serial, current_state.value, event.value, next_state.value)
        return next_state

    # ── Reads ─────────────────────────────────────────────────────────────────

    async def get(self, serial: str) -> LedgerEntry:
        async with self.session_factory() as session:
            row = await session.get(IssuedToken, serial)
            if row is None:
                raise UnknownSerialError(serial)
            return _entry(row)

    async def contains(self, serial: str) -> bool:
        async with self.session_factory() as session:
            return await session.get(IssuedToken, serial) is not None

    async def count(self) -> int:
        async with self.session_factory() as session:
            result = await session.execute(select(func.count()).select_from(IssuedToken))
            return int(result.scalar_one())

    async def entries(self, limit: Optional[int] = None, state: Optional[str] = None) -> list[LedgerEntry]:
        async with self.session_factory() as session:
            query = select(IssuedToken).order_by(IssuedToken.serial)
            if state:
                query = query.where(IssuedToken.state == state)
            if limit:
                query = query.limit(limit)
            result = await session.execute(query)
            return [_entry(row) for row in result.scalars().all()]

    async def history(self, serial: str) -> list[dict]:
        async with self.session_factory() as session:
            if await session.get(IssuedToken, serial) is None:
                raise UnknownSerialError(serial)
            result = await session.execute(
                select(LedgerEvent)
                .where(LedgerEvent.serial == serial)
                .order_by(LedgerEvent.id)
            )
            return [
                {
                    "from_state": e.from_state,
                    "event": e.event,
                    "to_state": e.to_state,
                    "payload": e.payload,
                    "occurred_at": _aware(e.occurred_at).isoformat(),
                }
                for e in result.scalars().all()
            ]

    # ── Ledger file ───────────────────────────────────────────────────────────

    async def export_jsonl(self, path: Path) -> int:
        entries = await self.entries()
        with open(path, "w", encoding="utf-8") as fh:
            for entry in entries:
                fh.write(json.dumps(entry.to_json()) + "\n")
        return len(entries)

    async def load_jsonl(self, path: Path, hash_name: str, pairs: int) -> int:
        """
        Replay a ledger file into this (empty) ledger.
        The file carries no encoding details; hash_name/pairs come from the bank's spec.
        """
        n = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                raw = json.loads(line)
                issued_at = datetime.fromtimestamp(int(raw["issued_at"]), tz=timezone.utc)
                await self.issue(str(raw["serial"]), hash_name, pairs, issued_at=issued_at)
                if raw.get("spent"):
                    await self.apply_event(str(raw["serial"]), TokenEvent.TOKEN_SPENT, {"replayed": True})
                n += 1
        logger.info("replayed %d ledger entries from %s", n, path)
        return n
