"""
QRG Bank - Ledger API
=====================
Read-only FastAPI view of the issuing bank's ledger: issued serials,
their lifecycle state and the verification audit trail.
"""

from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, HTTPException

from app.config import RunConfig
from app.core.token_states import TokenState
from app.db.database import init_db, make_engine, make_session_factory
from app.db.ledger import Ledger, UnknownSerialError


def create_app(ledger: Ledger, engine=None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(_: FastAPI):
        if engine is not None:
            await init_db(engine)
        yield
        if engine is not None:
            await engine.dispose()

    app = FastAPI(
        title="QRG Bank Ledger",
        description="Issued quantum tokens and their verification history",
        version="1.0.0",
        lifespan=lifespan,
    )

    # ── Endpoints ─────────────────────────────────────────────────────────────

    @app.get("/")
    async def root():
        return {
            "service": "QRG Bank Ledger",
            "version": "1.0.0",
            "status": "running",
        }

    @app.get("/health")
    async def health():
        """Health check endpoint"""
        return {"status": "healthy"}

    @app.get("/tokens")
    async def list_tokens(limit: int = 10, state: Optional[TokenState] = None):
        """List issued serials with optional state filter"""
        entries = await ledger.entries(limit=limit, state=state.value if state else None)
        return {
            "count": len(entries),
            "tokens": [
                {**e.to_json(), "state": e.state.value, "hash": e.hash, "pairs": e.pairs}
                for e in entries
            ],
        }

    @app.get("/tokens/{serial}")
    async def get_token(serial: str):
        try:
            entry = await ledger.get(serial)
        except UnknownSerialError:
            raise HTTPException(status_code=404, detail="Serial not issued")
        return {
            **entry.to_json(),
            "state": entry.state.value,
            "hash": entry.hash,
            "pairs": entry.pairs,
            "issued_at_iso": entry.issued_at.isoformat(),
        }

    @app.get("/tokens/{serial}/history")
    async def get_token_history(serial: str):
        """Full event history for a serial (audit trail)"""
        try:
            events = await ledger.history(serial)
        except UnknownSerialError:
            raise HTTPException(status_code=404, detail="Serial not issued")
        return {
            "serial": serial,
            "current_state": events[-1]["to_state"],
            "event_count": len(events),
            "events": events,
        }

    return app


def app_from_config(config: Optional[RunConfig] = None) -> FastAPI:
    config = config or RunConfig()
    engine = make_engine(config.database_url)
    return create_app(Ledger(make_session_factory(engine)), engine)


app = app_from_config()


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
