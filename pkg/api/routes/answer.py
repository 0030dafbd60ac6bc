import logging
import uuid

from fastapi import APIRouter, HTTPException
from fastapi.responses import JSONResponse

import core.runtime as runtime
from api.schemas import AnswerRequest, AnswerResponse, EvidenceDTO, PathDTO
from reasoning.engine import ConfigError, run

logger = logging.getLogger("api")

router = APIRouter(tags=["answer"])


# Sync handler: FastAPI runs it in its threadpool, one engine run per request.
@router.post("/answer", response_model=AnswerResponse)
def post_answer(req: AnswerRequest):
    resources = runtime.get_resources()
    if resources is None:
        raise HTTPException(status_code=503, detail="stores are not loaded yet")
    try:
        cfg = resources.cfg.with_overrides(**req.overrides.model_dump())
    except ConfigError as e:
        raise HTTPException(status_code=400, detail=str(e)) from e

    try:
        runtime.acquire_run_slot(resources.settings.service.max_concurrent)
    except runtime.ServiceBusyError as e:
        raise HTTPException(status_code=503, detail=str(e)) from e
    try:
        record = run(req.question, resources.stores, cfg, resources.gateway, req.task)
    except Exception as e:
        error_id = uuid.uuid4().hex
        logger.exception(f"Engine run failed (error_id={error_id}) for question {req.question!r}: {e}")
        return JSONResponse(status_code=500, content={"detail": "engine error", "error_id": error_id})
    finally:
        runtime.release_run_slot()

    return AnswerResponse(
        answer=record.answer,
        degraded=record.degraded,
        paths=[PathDTO(**p) for p in record.paths],
        evidence=[EvidenceDTO(**e) for e in record.evidence],
        call_counts=record.call_counts,
    )
