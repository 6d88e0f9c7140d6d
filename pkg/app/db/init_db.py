"""
Initialize ledger tables
Run this once against a persistent database URL (QRG_DATABASE_URL)
"""

import asyncio

from app.config import RunConfig
from app.db.database import init_db, make_engine


async def main(url: str) -> None:
    engine = make_engine(url)
    try:
        await init_db(engine)
    finally:
        await engine.dispose()


if __name__ == "__main__":
    config = RunConfig()
    print(f"Creating ledger tables on {config.database_url} ...")
    asyncio.run(main(config.database_url))
    print("✅ Ledger tables created")
