from fastapi import APIRouter
from fastapi.responses import JSONResponse

import core.runtime as runtime
from api.schemas import HealthResponse

router = APIRouter(tags=["health"])


@router.get("/healthz", response_model=HealthResponse)
def healthz():
    state = runtime.get_status()
    body = HealthResponse(
        status=state["status"],
        in_flight=state["in_flight"],
        loaded_at=state["loaded_at"].isoformat() if state["loaded_at"] else None,
        error=state["error"],
    )
    if state["status"] != runtime.READY:
        return JSONResponse(status_code=503, content=body.model_dump())
    return body
