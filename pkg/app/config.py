"""
Run Configuration
=================
One flat settings object for every harness command.

Precedence: QRG_* environment variables > CLI flags > config file
(flat key=value) > defaults.
"""

from pathlib import Path
from typing import Any, Optional

from dotenv import dotenv_values
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from app.bank.verifier import Thresholds
from app.core.clonesim import F_EXPERIMENT, CloneParams, StrategyId
from app.cracker.search import RecoverySettings, decimal_salts
from app.db.database import DEFAULT_DATABASE_URL
from app.mint.encoding import EncodingSpec, HashId


LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class RunConfig(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="QRG_", extra="ignore")

    seed: int = Field(default=2019, ge=0, lt=2**64)
    log_level: str = "INFO"

    # Cloning channel
    fidelity: float = Field(default=F_EXPERIMENT, ge=0.5, le=1.0)
    success_prob: float = Field(default=1.0, gt=0.0, le=1.0)
    strategy: StrategyId = StrategyId.II
    sniff_fraction: float = Field(default=1.0, ge=0.0, le=1.0)
    post_select: bool = True

    # Bank encoding
    hash: HashId = HashId.HMAC_SHA512
    salt: str = "417"
    salt_digits: int = Field(default=3, ge=1, le=6)
    keystream_len: int = Field(default=40, ge=1)
    pairs_per_token: int = Field(default=40, ge=1)
    serials: int = Field(default=101, ge=1)

    # Bank policy
    error_threshold: float = Field(default=0.25, ge=0.0, le=1.0)
    loss_threshold: float = Field(default=0.75, ge=0.0, le=1.0)
    mark_spent: bool = False
    database_url: str = DEFAULT_DATABASE_URL

    # Salt search
    z: float = Field(default=5.0, gt=0.0)
    prune_every: int = Field(default=10, ge=1)
    keep: float = Field(default=0.5, gt=0.0, le=1.0)
    max_pairs: Optional[int] = Field(default=None, ge=0)
    count_four: bool = False
    generalized: bool = False
    workers: int = Field(default=1, ge=1)
    trials: int = Field(default=20, ge=1)

    # I/O
    out: Optional[Path] = None
    listen: str = "127.0.0.1:7419"
    connect: str = "127.0.0.1:7419"

    @field_validator("salt")
    @classmethod
    def _digits_only(cls, v: str) -> str:
        if not v or not (v.isascii() and v.isdigit()):
            raise ValueError(f"salt must be a decimal string, got {v!r}")
        return v

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, v: str) -> str:
        level = v.strip().upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"log_level must be one of {', '.join(LOG_LEVELS)}, got {v!r}")
        return level

    @field_validator("hash", mode="before")
    @classmethod
    def _parse_hash(cls, v: Any) -> Any:
        return HashId.parse(v) if isinstance(v, str) else v

    @field_validator("strategy", mode="before")
    @classmethod
    def _parse_strategy(cls, v: Any) -> Any:
        return StrategyId(v.strip().lower()) if isinstance(v, str) else v

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # Environment wins over explicit arguments
        return env_settings, init_settings

    @classmethod
    def load(cls, config_file: Optional[Path] = None, **overrides: Any) -> "RunConfig":
        """Defaults, then the key=value file, then the non-None overrides (CLI flags)."""
        values: dict[str, Any] = {}
        if config_file is not None:
            if not Path(config_file).is_file():
                raise ValueError(f"Config file not found: {config_file}")
            raw = dotenv_values(config_file)
            values.update({k.strip().lower().replace("-", "_"): v for k, v in raw.items() if v is not None})
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    # ── Component views ───────────────────────────────────────────────────────

    def clone_params(self) -> CloneParams:
        return CloneParams(self.fidelity, self.success_prob)

    def encoding_spec(self) -> EncodingSpec:
        return EncodingSpec(self.hash, self.salt, self.keystream_len, self.pairs_per_token)

    def thresholds(self) -> Thresholds:
        return Thresholds(self.error_threshold, self.loss_threshold)

    def recovery_settings(self) -> RecoverySettings:
        return RecoverySettings(
            z_multiple=self.z,
            prune_every=self.prune_every,
            keep_fraction=self.keep,
            max_pairs=self.max_pairs,
            count_four_candidates=self.count_four,
            workers=self.workers,
        )

    def salt_space(self) -> list[str]:
        return decimal_salts(self.salt_digits)

    def serial_numbers(self) -> list[str]:
        width = max(3, len(str(self.serials - 1)))
        return [str(i).zfill(width) for i in range(self.serials)]


def parse_address(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not (port.isascii() and port.isdigit()):
        raise ValueError(f"Address must look like host:port, got {addr!r}")
    return host, int(port)
