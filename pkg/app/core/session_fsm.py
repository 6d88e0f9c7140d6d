"""
Verification Session State Machine
The same table-driven pattern as the token lifecycle, for one terminal connection
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional
import logging
import uuid

from app.core.token_states import (
    SESSION_TRANSITIONS,
    IllegalTransitionError,
    SessionEvent,
    SessionState,
)


logger = logging.getLogger(__name__)


@dataclass
class VerificationSession:
    """
    One terminal connection to the bank.
    Holds at most one outstanding challenge at a time.
    """
    id: str = field(default_factory=lambda: str(uuid.uuid4()))
    current_state: SessionState = SessionState.IDLE
    serial: Optional[str] = None
    bases: Optional[list] = None
    history: list = field(default_factory=list)

    def apply_event(self, event: SessionEvent, payload: dict = None) -> SessionState:
        payload = payload or {}

        next_state = SESSION_TRANSITIONS.get((self.current_state, event))
        if next_state is None:
            raise IllegalTransitionError(
                f"Illegal transition: {self.current_state.value} + {event.value}"
            )

        self.history.append({
            "from": self.current_state.value,
            "event": event.value,
            "to": next_state.value,
            "payload": payload,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        })

        old_state = self.current_state
        self.current_state = next_state
        logger.debug("session %s: %s + %s -> %s", self.id[:8], old_state.value, event.value, next_state.value)
        return next_state

    def open_challenge(self, serial: str, bases: list) -> None:
        self.apply_event(SessionEvent.CHALLENGE_ISSUED, {"serial": serial})
        self.serial = serial
        self.bases = bases

    def check_response(self, serial: str) -> list:
        """Bases of the outstanding challenge a response for `serial` answers."""
        if self.current_state is not SessionState.CHALLENGED:
            raise IllegalTransitionError(f"Response for {serial!r} without an outstanding challenge")
        if serial != self.serial:
            raise IllegalTransitionError(
                f"Response for {serial!r} but the outstanding challenge is for {self.serial!r}"
            )
        return self.bases

    def close_challenge(self, serial: str, accepted: bool) -> None:
        self.check_response(serial)
        self.apply_event(SessionEvent.VERDICT_SENT, {"serial": serial, "accepted": accepted})
        self.serial = None
        self.bases = None

    def abort_challenge(self, serial: str, reason: str) -> None:
        self.check_response(serial)
        self.apply_event(SessionEvent.CHALLENGE_ABORTED, {"serial": serial, "reason": reason})
        self.serial = None
        self.bases = None
