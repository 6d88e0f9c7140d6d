"""Shared fixtures: seeded generators, a default encoding spec and an in-memory ledger."""

import os

import numpy as np
import pytest

from app.bank.verifier import Bank, Thresholds
from app.config import RunConfig
from app.db.database import init_db, make_engine, make_session_factory
from app.db.ledger import Ledger
from app.mint.encoding import EncodingSpec, HashId


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def spec():
    return EncodingSpec(HashId.HMAC_SHA512, "417")


@pytest.fixture
async def ledger():
    engine = make_engine("sqlite+aiosqlite:///:memory:")
    await init_db(engine)
    yield Ledger(make_session_factory(engine))
    await engine.dispose()


@pytest.fixture
def bank(spec, ledger):
    return Bank(spec, ledger, Thresholds(), rng=np.random.default_rng(7))


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in list(os.environ):
        if name.startswith("QRG_"):
            monkeypatch.delenv(name)


@pytest.fixture
def small_config():
    """Few serials and a two-digit salt space keep end-to-end runs fast."""
    return RunConfig(salt="42", salt_digits=2, serials=30, trials=4)
