import re
from pathlib import Path
from types import SimpleNamespace

import pytest

from core.bootstrap import build_resources
from core.settings import load_settings, with_engine_overrides, with_llm_mode
from kg.store import GraphStore, load_graph
from llm.clients import ScriptedClient
from llm.gateway import Gateway, GatewayMode, TranscriptStore
from reasoning.engine import EngineConfig, Stores, run
from retrieval.corpus import Corpus, load_corpus
from retrieval.embedders import HashingEmbedder

FIXTURES_DIR = Path(__file__).parent / "fixtures"
TENCENT_QUESTION = "Which founder of Tencent is a member of the National People's Congress?"
TENCENT_CLUE = "which Tencent founder holds a legislative seat"

_ENTITY_BLOCK_RE = re.compile(r"^ENTITY\[([^\]]+)\].*?^Candidates: ([^\n]*)$", re.MULTILINE | re.DOTALL)
_LISTED_ENTITY_RE = re.compile(r"^- ([^:\s]+): ", re.MULTILINE)


def _own_section(prompt: str) -> str:
    """Part of a rendered prompt after the worked demonstrations."""
    return prompt.rsplit("\nQuestion: ", 1)[-1]


def _entity_candidates(prompt: str) -> dict[str, list[str]]:
    """``{entity id: ["rel:direction", ...]}`` from a relation-prune prompt."""
    return {
        entity: [c.strip() for c in candidates.split(";") if c.strip()]
        for entity, candidates in _ENTITY_BLOCK_RE.findall(_own_section(prompt))
    }


def _listed_entities(prompt: str) -> list[str]:
    return _LISTED_ENTITY_RE.findall(_own_section(prompt).split("Known context:")[0])


def _topic_ids(prompt: str) -> list[str]:
    line = _own_section(prompt).rsplit("Topic entities: ", 1)[-1].split("\n", 1)[0]
    return [t.strip() for t in line.split(",") if t.strip()]


def _pick_relations(*preferred: str):
    """Relation-prune script: the first preferred candidate per entity, else its first candidate."""

    def _script(prompt: str) -> str:
        lines = []
        for entity, candidates in _entity_candidates(prompt).items():
            chosen = next((p for p in preferred if p in candidates), candidates[0])
            lines.append(f"RELATIONS[{entity}]: {chosen}")
        return "\n".join(lines)

    return _script


def _tencent_clues(prompt: str) -> str:
    return "\n".join(
        f"CLUE[{e}]: {TENCENT_CLUE if e == 'tencent' else f'how {e} relates to the founders of Tencent'}"
        for e in _listed_entities(prompt)
    )


def _tencent_examine(prompt: str) -> str:
    if "npc" in _topic_ids(prompt):
        return "ANSWER: Pony Ma"
    return "CONTINUE\nCLUE[pony_ma]: whether Pony Ma sits in the National People's Congress"


def _tencent_scripts() -> dict:
    picker = _pick_relations("founded_by:outgoing", "member_of:outgoing")
    return {
        "entity_extraction": lambda _: '["Tencent", "National People\'s Congress"]',
        "topic_prune": lambda _: '["tencent"]',
        "clue_query": _tencent_clues,
        "relation_prune_batched": picker,
        "relation_prune_single": picker,
        "examine_reason": _tencent_examine,
        "final_answer": lambda _: "ANSWER: Pony Ma",
    }


@pytest.fixture(scope="session")
def tencent_graph() -> GraphStore:
    return load_graph(FIXTURES_DIR / "tencent_triples.tsv", FIXTURES_DIR / "tencent_labels.tsv")


@pytest.fixture(scope="session")
def tencent_corpus() -> Corpus:
    return load_corpus(FIXTURES_DIR / "tencent_corpus.jsonl")


@pytest.fixture
def tencent_stores(tencent_graph, tencent_corpus) -> Stores:
    return Stores(tencent_graph, tencent_corpus, HashingEmbedder(256, salt="coarse"), HashingEmbedder(256, salt="rerank"))


@pytest.fixture
def tencent_client(tencent_scripts) -> ScriptedClient:
    return ScriptedClient(tencent_scripts)


@pytest.fixture
def tencent_gateway(tencent_client) -> Gateway:
    return Gateway(GatewayMode.LIVE, client=tencent_client)


@pytest.fixture
def tencent_cfg() -> EngineConfig:
    return EngineConfig(width=2, max_depth=3, top_k=3, top_l=3)


@pytest.fixture
def record_gateway(tmp_path):
    """Factory: a record-mode gateway over ``client`` writing to ``tmp_path``."""

    def _build(client, name: str = "transcripts.jsonl") -> Gateway:
        return Gateway(GatewayMode.RECORD, client=client, transcripts=TranscriptStore(tmp_path / name))

    return _build


@pytest.fixture
def replay_gateway(tmp_path):
    def _build(name: str = "transcripts.jsonl") -> Gateway:
        return Gateway(GatewayMode.REPLAY, transcripts=TranscriptStore(tmp_path / name))

    return _build


@pytest.fixture
def tencent_question() -> str:
    return TENCENT_QUESTION


@pytest.fixture
def tencent_scripts() -> dict:
    """Fresh per-template scripts answering the Tencent question; callers may replace entries."""
    return _tencent_scripts()


@pytest.fixture
def prompt_tools() -> SimpleNamespace:
    return SimpleNamespace(
        entity_candidates=_entity_candidates,
        listed_entities=_listed_entities,
        topic_ids=_topic_ids,
        pick_relations=_pick_relations,
    )


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture
def config(fixtures_dir) -> Path:
    return fixtures_dir / "config.toml"


@pytest.fixture
def record_transcripts(config, tencent_scripts, tencent_question, tmp_path):
    """Factory: record one Tencent run with the fixture config (plus overrides) and return the transcript path."""

    def _record(name: str = "t.jsonl", task: str = "qa", **overrides):
        path = tmp_path / name
        settings = with_llm_mode(load_settings(config), GatewayMode.RECORD, path)
        settings = with_engine_overrides(settings, overrides)
        resources = build_resources(settings, client=ScriptedClient(tencent_scripts))
        run(tencent_question, resources.stores, resources.cfg, resources.gateway, task)
        return path

    return _record
