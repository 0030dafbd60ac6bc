import logging
import threading
import uuid
from collections.abc import Callable
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

import core.runtime as runtime
from api.routes import answer, health
from core.bootstrap import Resources, build_resources
from core.config import KGNAV_CONFIG
from core.settings import load_settings
from core.validation import validate_config

# Dedicated logger kept outside the "kgnav" tree so request failures stay apart
# from per-run engine logs.
logger = logging.getLogger("api")


def load_from_config(config_path: str | Path | None) -> Resources:
    settings = load_settings(config_path)
    if not validate_config(settings):
        raise RuntimeError("Configuration validation failed, check logs for details")
    return build_resources(settings)


def create_app(
    config_path: str | Path | None = None,
    loader: Callable[[], Resources] | None = None,
) -> FastAPI:
    """``loader`` builds the engine resources; defaults to loading ``config_path`` (or ``KGNAV_CONFIG``)."""
    load = loader or (lambda: load_from_config(config_path or KGNAV_CONFIG))

    def _load_in_background() -> None:
        try:
            runtime.set_ready(load())
            logger.info("Stores loaded, service ready.")
        except Exception as e:
            logger.error(f"Store loading failed: {e}")
            runtime.set_failed(str(e))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        runtime.reset()
        app.state.loader_thread = threading.Thread(target=_load_in_background, name="store-loader", daemon=True)
        app.state.loader_thread.start()
        try:
            yield
        finally:
            resources = runtime.get_resources()
            drain_seconds = resources.settings.service.drain_seconds if resources else 0.0
            if not runtime.wait_for_drain(drain_seconds):
                logger.warning(f"Shutting down with runs still in flight after {drain_seconds:g}s.")
            logger.info("Service stopped.")

    app = FastAPI(title="kgnav API", version="0.1.0", lifespan=lifespan)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        reasons = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()]
        return JSONResponse(status_code=400, content={"detail": reasons})

    @app.exception_handler(Exception)
    async def _unhandled(request: Request, exc: Exception):
        error_id = uuid.uuid4().hex
        logger.error(f"Unhandled error (error_id={error_id}) in {request.method} {request.url.path}: {exc}")
        return JSONResponse(status_code=500, content={"detail": "internal error", "error_id": error_id})

    for _r in (health, answer):
        app.include_router(_r.router)
    return app


app = create_app()
