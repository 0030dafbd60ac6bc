"""Builds the engine's collaborators (stores, embedders, gateway) from settings."""

from dataclasses import dataclass

import core.logging as logging
from core.config import LLM_API_KEY
from core.settings import Settings, to_engine_config
from kg.store import load_graph
from llm.clients import HttpChatClient
from llm.gateway import ChatClient, Gateway, GatewayMode, TranscriptStore
from reasoning.engine import EngineConfig, Stores
from retrieval.corpus import load_corpus
from retrieval.embedders import Embedder, HashingEmbedder, HttpEmbedder


@dataclass(frozen=True)
class Resources:
    settings: Settings
    cfg: EngineConfig
    stores: Stores
    gateway: Gateway


def build_embedders(settings: Settings) -> tuple[Embedder, Embedder]:
    e = settings.embedder
    attempts, backoff = settings.llm.max_retries, settings.llm.backoff_seconds
    if e.kind == "hashing":
        return HashingEmbedder(e.dimension, salt="coarse"), HashingEmbedder(e.dimension, salt="rerank")
    return (
        HttpEmbedder(e.coarse_url, timeout=e.timeout, attempts=attempts, backoff_seconds=backoff),
        HttpEmbedder(e.rerank_url, timeout=e.timeout, attempts=attempts, backoff_seconds=backoff),
    )


def load_stores(settings: Settings) -> Stores:
    graph = load_graph(settings.data.graph, settings.data.labels)
    corpus = load_corpus(settings.data.corpus)
    coarse, rerank = build_embedders(settings)
    entities = {e for t in graph.triples() for e in (t.head, t.tail)}
    missing = sum(1 for e in entities if e not in corpus)
    if missing:
        logging.info(f"{missing} graph entit(ies) have no corpus document; they rank with score 0")
    return Stores(graph=graph, corpus=corpus, embedder_coarse=coarse, embedder_rerank=rerank)


def build_gateway(settings: Settings, client: ChatClient | None = None) -> Gateway:
    """``client`` replaces the HTTP chat client (tests pass a scripted one)."""
    llm = settings.llm
    if client is None and llm.mode is not GatewayMode.REPLAY:
        client = HttpChatClient(
            llm.base_url,
            llm.model,
            api_key=LLM_API_KEY,
            timeout=llm.timeout,
            attempts=llm.max_retries,
            backoff_seconds=llm.backoff_seconds,
        )
    transcripts = TranscriptStore(llm.transcripts) if llm.transcripts is not None else None
    return Gateway(
        mode=llm.mode,
        client=client,
        transcripts=transcripts if llm.mode is not GatewayMode.LIVE else None,
        fail_on_truncation=llm.fail_on_truncation,
    )


def build_resources(settings: Settings, client: ChatClient | None = None) -> Resources:
    cfg = to_engine_config(settings)
    return Resources(settings=settings, cfg=cfg, stores=load_stores(settings), gateway=build_gateway(settings, client))
