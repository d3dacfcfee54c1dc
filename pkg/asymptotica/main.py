# asymptotica/main.py

import logging
import os
from typing import List

from dotenv import load_dotenv
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from asymptotica.routers.analysis_router import router as analysis_router
from asymptotica.utils.config import ENV_PREFIX

logger = logging.getLogger(__name__)

VERSION = "1.0.0"

load_dotenv()


def cors_origins() -> List[str]:
    """Comma separated ``ASYMPTOTICA_CORS_ORIGINS``; unset means no cross-origin access."""
    raw = os.getenv(ENV_PREFIX + "CORS_ORIGINS", "")
    return [origin.strip() for origin in raw.split(",") if origin.strip()]


def create_app() -> FastAPI:
    app = FastAPI(
        title="asymptotica",
        description="Peripheral projections, attractor algebras and Choi-Effros products of finite-dimensional channels",
        version=VERSION,
    )
    origins = cors_origins()
    if origins:
        logger.info(f"CORS enabled for {', '.join(origins)}")
        app.add_middleware(
            CORSMiddleware,
            allow_origins=origins,
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )
    app.include_router(analysis_router)

    @app.get("/health")
    async def health_check():
        return {"status": "ok", "version": VERSION}

    return app


app = create_app()
