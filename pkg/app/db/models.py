"""
Database Models
===============
IssuedToken = current state of each serial
LedgerEvent = immutable history (audit log)
"""

from datetime import datetime, timezone
from sqlalchemy import Column, Integer, String, DateTime, JSON, ForeignKey
from sqlalchemy.orm import DeclarativeBase, relationship


def utcnow():
    return datetime.now(timezone.utc)


class Base(DeclarativeBase):
    pass


class IssuedToken(Base):
    """
    One row per issued serial: which encoding minted it and where it is RIGHT NOW.
    The salt never lands here; only the hash family is recorded.
    """
    __tablename__ = "issued_tokens"

    serial = Column(String(64), primary_key=True)
    hash = Column(String(32), nullable=False)
    pairs = Column(Integer, nullable=False)

    # FSM state - THE SINGLE SOURCE OF TRUTH
    state = Column(String(20), nullable=False, default="ISSUED")
    state_entered_at = Column(DateTime(timezone=True), default=utcnow)

    issued_at = Column(DateTime(timezone=True), default=utcnow, nullable=False)

    events = relationship("LedgerEvent", back_populates="token", order_by="LedgerEvent.id")


class LedgerEvent(Base):
    """
    The Event Log - IMMUTABLE history.
    Every issue, verdict and spend creates a new row here.
    Never updated or deleted - append-only.
    """
    __tablename__ = "ledger_events"

    id = Column(Integer, primary_key=True, autoincrement=True)
    serial = Column(String(64), ForeignKey("issued_tokens.serial"), nullable=False)

    from_state = Column(String(20), nullable=False)
    event = Column(String(40), nullable=False)
    to_state = Column(String(20), nullable=False)

    # Verdict numbers, issuance metadata
    payload = Column(JSON, nullable=True)

    occurred_at = Column(DateTime(timezone=True), default=utcnow, nullable=False)

    token = relationship("IssuedToken", back_populates="events")
