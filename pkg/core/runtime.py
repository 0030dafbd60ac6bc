"""Service-wide shared state: store readiness and the in-flight run counter."""

import threading
from typing import Any

from core.utils import now_utc

STARTING = "starting"
READY = "ready"
FAILED = "failed"


class ServiceBusyError(Exception):
    """Raised when a new run arrives while every run slot is taken."""


_lock = threading.Lock()
_drained = threading.Condition(_lock)
_shared_data: dict[str, Any] = {
    "status": STARTING,
    "resources": None,  # (EngineConfig, Stores, Gateway) once loaded
    "error": None,
    "loaded_at": None,
    "in_flight": 0,
}


def reset() -> None:
    with _lock:
        _shared_data.update(status=STARTING, resources=None, error=None, loaded_at=None, in_flight=0)


def set_ready(resources: Any) -> None:
    with _lock:
        _shared_data.update(status=READY, resources=resources, error=None, loaded_at=now_utc())


def set_failed(error: str) -> None:
    with _lock:
        _shared_data.update(status=FAILED, resources=None, error=error)


def get_status() -> dict[str, Any]:
    with _lock:
        return {k: v for k, v in _shared_data.items() if k != "resources"}


def get_resources() -> Any | None:
    with _lock:
        return _shared_data["resources"] if _shared_data["status"] == READY else None


def acquire_run_slot(max_concurrent: int) -> None:
    with _lock:
        if _shared_data["in_flight"] >= max_concurrent:
            raise ServiceBusyError(f"All {max_concurrent} run slot(s) are busy, try again later")
        _shared_data["in_flight"] += 1


def release_run_slot() -> None:
    with _lock:
        _shared_data["in_flight"] = max(_shared_data["in_flight"] - 1, 0)
        _drained.notify_all()


def wait_for_drain(timeout: float) -> bool:
    """Block until no run is in flight; False when ``timeout`` seconds pass first."""
    with _lock:
        return _drained.wait_for(lambda: _shared_data["in_flight"] == 0, timeout=timeout)
