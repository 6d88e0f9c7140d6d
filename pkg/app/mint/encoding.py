"""
Token Encoding
==============
Salted HMAC keystream -> pair sequence for every serial number.

Block i of the keystream is HMAC(key=salt, msg="<serial>:<i>") with the
named digest; blocks are concatenated and truncated to keystream_len
bytes. Pair j of the token is PAIR_SET[keystream[j] % 8].
"""

import hashlib
import hmac
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from app.core.qstate import PairState, pair_from_index


class HashId(str, Enum):
    HMAC_MD5 = "HMAC_MD5"
    HMAC_SHA1 = "HMAC_SHA1"
    HMAC_SHA256 = "HMAC_SHA256"
    HMAC_SHA512 = "HMAC_SHA512"

    @property
    def digest(self) -> str:
        return _DIGESTS[self]

    @property
    def block_size(self) -> int:
        return hashlib.new(self.digest).digest_size

    @classmethod
    def parse(cls, name: str) -> "HashId":
        """Accepts 'HMAC_SHA256', 'hmac-sha256' or plain 'sha256'."""
        key = name.strip().upper().replace("-", "_")
        if not key.startswith("HMAC_"):
            key = f"HMAC_{key}"
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"Unknown hash function: {name!r}")


_DIGESTS = {
    HashId.HMAC_MD5: "md5",
    HashId.HMAC_SHA1: "sha1",
    HashId.HMAC_SHA256: "sha256",
    HashId.HMAC_SHA512: "sha512",
}


@dataclass(frozen=True)
class EncodingSpec:
    hash: HashId
    salt: str
    keystream_len: int = 40
    pairs_per_token: int = 40

    def __post_init__(self):
        if not self.salt or not (self.salt.isascii() and self.salt.isdigit()):
            raise ValueError(f"Salt must be a non-empty decimal string, got {self.salt!r}")
        if self.pairs_per_token < 1:
            raise ValueError(f"pairs_per_token must be positive, got {self.pairs_per_token}")
        if self.keystream_len < self.pairs_per_token:
            raise ValueError(
                f"keystream_len ({self.keystream_len}) shorter than pairs_per_token ({self.pairs_per_token})"
            )

    def with_salt(self, salt: str) -> "EncodingSpec":
        return replace(self, salt=salt)

    def with_hash(self, hash_id: HashId) -> "EncodingSpec":
        return replace(self, hash=hash_id)


@dataclass(frozen=True)
class Token:
    serial: str
    pairs: tuple[PairState, ...]
    hash: HashId | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.serial:
            raise ValueError("Token serial must be non-empty")

    @property
    def indices(self) -> list[int]:
        return [p.index for p in self.pairs]

    def to_json(self) -> dict:
        if self.hash is None:
            raise ValueError(f"Token {self.serial} has no hash function; token files need one")
        return {
            "serial": self.serial,
            "hash": self.hash.value,
            "pairs": self.indices,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "Token":
        return cls(
            serial=str(raw["serial"]),
            pairs=tuple(pair_from_index(int(k)) for k in raw["pairs"]),
            hash=HashId.parse(_require_hash(raw)),
        )


def _require_hash(raw: dict) -> str:
    name = raw.get("hash")
    if not isinstance(name, str) or not name:
        raise ValueError(f"Token file for serial {raw.get('serial')!r} has no hash function")
    return name


# ── Keystream ─────────────────────────────────────────────────────────────────

def _block(spec: EncodingSpec, serial: str, i: int) -> bytes:
    msg = f"{serial}:{i}".encode("utf-8")
    return hmac.new(spec.salt.encode("utf-8"), msg, spec.hash.digest).digest()


def keystream(spec: EncodingSpec, serial: str) -> bytes:
    out = bytearray()
    i = 0
    while len(out) < spec.keystream_len:
        out += _block(spec, serial, i)
        i += 1
    return bytes(out[: spec.keystream_len])


Keystream = Callable[[EncodingSpec, str], bytes]


def pair_indices(spec: EncodingSpec, serial: str, stream: Keystream = keystream) -> np.ndarray:
    """Pair-set index of every pair of the token, as a uint8 array."""
    raw = np.frombuffer(stream(spec, serial), dtype=np.uint8)
    return raw[: spec.pairs_per_token] % 8


def mint_token(spec: EncodingSpec, serial: str, stream: Keystream = keystream) -> Token:
    pairs = tuple(pair_from_index(int(k)) for k in pair_indices(spec, serial, stream))
    return Token(serial=serial, pairs=pairs, hash=spec.hash)


def predict_pair(spec: EncodingSpec, serial: str, j: int) -> PairState:
    """Pair j of the token, computing only the keystream block that holds it."""
    if not 0 <= j < spec.pairs_per_token:
        raise ValueError(f"Pair index {j} out of range for {spec.pairs_per_token}-pair tokens")
    size = spec.hash.block_size
    block = _block(spec, serial, j // size)
    return pair_from_index(block[j % size] % 8)


# ── Token files ───────────────────────────────────────────────────────────────

def write_token(token: Token, path: Path) -> None:
    Path(path).write_text(json.dumps(token.to_json()) + "\n", encoding="utf-8")


def read_token(path: Path) -> Token:
    return Token.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
