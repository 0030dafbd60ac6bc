import hashlib
import time
from collections.abc import Callable
from datetime import UTC, datetime


def now_utc() -> datetime:
    return datetime.now(UTC)


def call_with_retry[T](
    func: Callable[[], T],
    *,
    attempts: int,
    backoff_seconds: float,
    retry_on: tuple[type[BaseException], ...],
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Call ``func`` up to ``attempts`` times, doubling the pause after each failure.

    Only exceptions in ``retry_on`` are retried; the last one is re-raised."""
    for attempt in range(attempts):
        try:
            return func()
        except retry_on:
            if attempt == attempts - 1:
                raise
            sleep(backoff_seconds * (2**attempt))
    raise ValueError("attempts must be >= 1")


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def collapse_whitespace(text: str) -> str:
    return " ".join(text.split())
