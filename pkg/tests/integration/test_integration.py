import os
from pathlib import Path

import pytest

from core.bootstrap import build_resources
from core.config import LLM_API_KEY
from core.settings import load_settings, with_llm_mode
from llm.gateway import GatewayMode, GenConfig
from reasoning.engine import run

_FIXTURES = Path(__file__).parent.parent / "unit" / "fixtures"
_QUESTION = "Which founder of Tencent is a member of the National People's Congress?"

# ============================================================================
# Chat-completion endpoint
# ============================================================================


def _llm_integration_enabled() -> bool:
    return os.getenv("RUN_LLM_INTEGRATION", "false").lower() == "true"


@pytest.fixture(scope="session")
def llm_enabled() -> bool:
    return _llm_integration_enabled() and bool(LLM_API_KEY)


@pytest.mark.integration
def test_live_model_completes(llm_enabled: bool, tmp_path) -> None:
    if not llm_enabled:
        pytest.skip("LLM integration disabled. Set RUN_LLM_INTEGRATION=true with LLM_API_KEY.")

    settings = with_llm_mode(load_settings(_FIXTURES / "config.toml"), GatewayMode.LIVE, tmp_path / "unused.jsonl")
    resources = build_resources(settings)
    text = resources.gateway.ask("entity_extraction", {"question": _QUESTION}, GenConfig.exploration())

    assert isinstance(text, str)
    assert text.strip()


@pytest.mark.integration
def test_live_run_records_then_replays(llm_enabled: bool, tmp_path) -> None:
    if not llm_enabled:
        pytest.skip("LLM integration disabled. Set RUN_LLM_INTEGRATION=true with LLM_API_KEY.")

    transcripts = tmp_path / "live.jsonl"
    base = load_settings(_FIXTURES / "config.toml")
    recorder = build_resources(with_llm_mode(base, GatewayMode.RECORD, transcripts))
    recorded = run(_QUESTION, recorder.stores, recorder.cfg, recorder.gateway)

    replayer = build_resources(with_llm_mode(base, GatewayMode.REPLAY, transcripts))
    replayed = run(_QUESTION, replayer.stores, replayer.cfg, replayer.gateway)

    assert replayed.to_json() == recorded.to_json()
