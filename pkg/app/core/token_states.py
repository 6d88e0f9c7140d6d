"""
Token and Session States
Every issued token, and every open terminal session, is in exactly ONE of these states
"""

from enum import Enum


class TokenState(str, Enum):
    ISSUED = "ISSUED"      # Minted and handed to a client
    SPENT = "SPENT"        # Accepted once with double-spend marking on (terminal)


class TokenEvent(str, Enum):
    TOKEN_ISSUED = "TOKEN_ISSUED"
    VERIFICATION_ACCEPTED = "VERIFICATION_ACCEPTED"
    VERIFICATION_REJECTED = "VERIFICATION_REJECTED"
    TOKEN_SPENT = "TOKEN_SPENT"


# Terminal states - once a token reaches these, it stops moving
TERMINAL_STATES = {
    TokenState.SPENT,
}

TRANSITIONS = {
    (TokenState.ISSUED, TokenEvent.VERIFICATION_ACCEPTED): TokenState.ISSUED,
    (TokenState.ISSUED, TokenEvent.VERIFICATION_REJECTED): TokenState.ISSUED,
    (TokenState.ISSUED, TokenEvent.TOKEN_SPENT): TokenState.SPENT,
}


class SessionState(str, Enum):
    IDLE = "IDLE"                # No outstanding challenge
    CHALLENGED = "CHALLENGED"    # Challenge sent, waiting for the response


class SessionEvent(str, Enum):
    CHALLENGE_ISSUED = "CHALLENGE_ISSUED"
    VERDICT_SENT = "VERDICT_SENT"
    CHALLENGE_ABORTED = "CHALLENGE_ABORTED"    # Verification failed; the challenge is void


SESSION_TRANSITIONS = {
    (SessionState.IDLE, SessionEvent.CHALLENGE_ISSUED): SessionState.CHALLENGED,
    (SessionState.CHALLENGED, SessionEvent.VERDICT_SENT): SessionState.IDLE,
    (SessionState.CHALLENGED, SessionEvent.CHALLENGE_ABORTED): SessionState.IDLE,
}


class IllegalTransitionError(ValueError):
    pass
