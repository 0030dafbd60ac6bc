import threading

import pytest

import core.runtime as runtime


@pytest.fixture(autouse=True)
def _fresh_runtime():
    runtime.reset()
    yield
    runtime.reset()


def test_resources_only_when_ready() -> None:
    assert runtime.get_status()["status"] == runtime.STARTING
    assert runtime.get_resources() is None

    runtime.set_ready("resources")
    assert runtime.get_resources() == "resources"
    assert runtime.get_status()["loaded_at"] is not None
    assert "resources" not in runtime.get_status()

    runtime.set_failed("graph missing")
    assert runtime.get_resources() is None
    assert runtime.get_status()["error"] == "graph missing"


def test_run_slots_are_bounded() -> None:
    runtime.acquire_run_slot(2)
    runtime.acquire_run_slot(2)
    with pytest.raises(runtime.ServiceBusyError):
        runtime.acquire_run_slot(2)
    runtime.release_run_slot()
    runtime.acquire_run_slot(2)
    assert runtime.get_status()["in_flight"] == 2


def test_release_never_goes_negative() -> None:
    runtime.release_run_slot()
    assert runtime.get_status()["in_flight"] == 0


def test_wait_for_drain() -> None:
    assert runtime.wait_for_drain(0) is True

    runtime.acquire_run_slot(1)
    assert runtime.wait_for_drain(0.01) is False

    releaser = threading.Timer(0.05, runtime.release_run_slot)
    releaser.start()
    assert runtime.wait_for_drain(5) is True
    releaser.join()
