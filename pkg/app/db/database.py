"""
Database Connection
===================
Async SQLAlchemy engine for the bank ledger (SQLite via aiosqlite by
default, PostgreSQL via asyncpg when the URL says so)
"""

import logging

from sqlalchemy.ext.asyncio import AsyncEngine, AsyncSession, async_sessionmaker, create_async_engine
from sqlalchemy.pool import StaticPool

from app.db.models import Base


logger = logging.getLogger(__name__)

DEFAULT_DATABASE_URL = "sqlite+aiosqlite:///:memory:"


def make_engine(url: str = DEFAULT_DATABASE_URL, echo: bool = False) -> AsyncEngine:
    if ":memory:" in url:
        # One shared connection, otherwise every session sees its own empty database
        return create_async_engine(
            url,
            echo=echo,
            poolclass=StaticPool,
            connect_args={"check_same_thread": False},
        )
    return create_async_engine(url, echo=echo)


def make_session_factory(engine: AsyncEngine) -> async_sessionmaker[AsyncSession]:
    return async_sessionmaker(
        engine,
        class_=AsyncSession,
        expire_on_commit=False,
    )


async def init_db(engine: AsyncEngine) -> None:
    """Create all ledger tables (idempotent)"""
    async with engine.begin() as conn:
        await conn.run_sync(Base.metadata.create_all)
    logger.info("ledger tables ready on %s", engine.url.render_as_string(hide_password=True))
