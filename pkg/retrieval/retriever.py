"""Chunk scoring and candidate-entity ranking.

Chunks are scored against the composed query (question, clue query, path text)
in two stages: a coarse embedder pass over every chunk, then a rerank embedder
pass over the ``coarse_keep`` survivors. An entity's ranking score is the
exponentially decayed sum of its best reranked chunk scores.
"""

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from kg.store import Direction, GraphStore, Triple
from retrieval.corpus import Chunk
from retrieval.embedders import Embedder

QUERY_SEPARATOR = "\n"


class ContractViolationError(ValueError):
    """Raised when a caller breaks an input contract (unsorted scores, bad sizes)."""


class Stage(StrEnum):
    COARSE = "coarse"
    RERANK = "rerank"


@dataclass(frozen=True)
class ComposedQuery:
    question: str
    clue_query: str = ""
    path_text: str = ""

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValueError("question must be non-empty")


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    score: float
    stage: Stage


@dataclass(frozen=True)
class Candidate:
    """Ranking input: an entity, the edge that reached it and its chunks.

    ``query`` overrides the shared query passed to ``rank_candidates``."""

    entity: str
    via: Triple
    chunks: tuple[Chunk, ...]
    query: ComposedQuery | None = None


@dataclass(frozen=True)
class CandidateEntity:
    entity: str
    via: Triple
    rank_score: float
    top_chunks: tuple[ScoredChunk, ...]


def chunk_order(scored: ScoredChunk) -> tuple[float, str, int]:
    return (-scored.score, scored.chunk.entity, scored.chunk.index)


def serialize_path(path: Sequence[Triple], labels: GraphStore) -> str:
    rendered = []
    for triple in path:
        if triple.direction is Direction.OUTGOING:
            rendered.append(f"{labels.label(triple.head)} -[{triple.relation}]-> {labels.label(triple.tail)}")
        else:
            rendered.append(f"{labels.label(triple.tail)} <-[{triple.relation}]- {labels.label(triple.head)}")
    return "; ".join(rendered)


def compose_query_text(cq: ComposedQuery) -> str:
    return QUERY_SEPARATOR.join(part for part in (cq.question, cq.clue_query, cq.path_text) if part)


def cosine_scores(query_vec: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Cosine of ``query_vec`` against every row; pairs with a zero-norm vector score 0."""
    if matrix.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    denom = np.linalg.norm(matrix, axis=1) * np.linalg.norm(query_vec)
    dots = matrix @ query_vec
    return np.divide(dots, denom, out=np.zeros_like(dots, dtype=np.float64), where=denom > 0)


def _score_stage(query_text: str, chunks: Sequence[Chunk], embedder: Embedder, stage: Stage) -> list[ScoredChunk]:
    vectors = embedder.embed_many([query_text, *(c.text for c in chunks)])
    scores = cosine_scores(vectors[0], vectors[1:])
    scored = [ScoredChunk(chunk, float(score), stage) for chunk, score in zip(chunks, scores, strict=True)]
    return sorted(scored, key=chunk_order)


def two_stage_rank(
    query: ComposedQuery,
    chunks: Sequence[Chunk],
    coarse_keep: int,
    embedder_coarse: Embedder,
    embedder_rerank: Embedder,
) -> list[ScoredChunk]:
    if coarse_keep <= 0:
        raise ContractViolationError(f"coarse_keep must be > 0 (got {coarse_keep})")
    if not chunks:
        return []
    query_text = compose_query_text(query)
    survivors = _score_stage(query_text, chunks, embedder_coarse, Stage.COARSE)[:coarse_keep]
    return _score_stage(query_text, [s.chunk for s in survivors], embedder_rerank, Stage.RERANK)


def decay_weight(rank: int, alpha: float, rank_origin: int = 0) -> float:
    return math.exp(-alpha * (rank + rank_origin))


def entity_rank_score(
    chunk_scores_desc: Sequence[float],
    alpha: float,
    top_k: int,
    rank_origin: int = 0,
) -> float:
    if alpha < 0:
        raise ContractViolationError(f"alpha must be >= 0 (got {alpha})")
    if top_k <= 0:
        raise ContractViolationError(f"K must be > 0 (got {top_k})")
    for i in range(len(chunk_scores_desc) - 1):
        if chunk_scores_desc[i] < chunk_scores_desc[i + 1]:
            raise ContractViolationError(f"chunk scores must be sorted descending (index {i} < index {i + 1})")
    return sum(score * decay_weight(i, alpha, rank_origin) for i, score in enumerate(chunk_scores_desc[:top_k]))


def rank_candidates(
    candidates: Sequence[Candidate],
    query: ComposedQuery | None,
    width: int,
    top_k: int,
    alpha: float,
    coarse_keep: int,
    *,
    embedder_coarse: Embedder,
    embedder_rerank: Embedder,
    rank_origin: int = 0,
    global_top_k: bool = False,
    max_workers: int = 1,
) -> list[CandidateEntity]:
    """Score every candidate, sort by ranking score and keep the best ``width``.

    Ties break on entity id, then on the reaching triple. An entity reached by
    several candidates is kept once, at its best position."""
    if width <= 0:
        raise ContractViolationError(f"W must be > 0 (got {width})")
    if top_k <= 0:
        raise ContractViolationError(f"K must be > 0 (got {top_k})")

    def _rank(candidate: Candidate) -> list[ScoredChunk]:
        cq = candidate.query or query
        if cq is None:
            raise ContractViolationError(f"no query for candidate {candidate.entity}")
        return two_stage_rank(cq, candidate.chunks, coarse_keep, embedder_coarse, embedder_rerank)

    parallel = max_workers > 1 and len(candidates) > 1 and embedder_coarse.thread_safe and embedder_rerank.thread_safe
    if parallel:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            ranked = list(pool.map(_rank, candidates))
    else:
        ranked = [_rank(c) for c in candidates]

    if global_top_k:
        scored = _score_global(candidates, ranked, top_k, alpha, rank_origin)
    else:
        scored = [
            CandidateEntity(
                entity=c.entity,
                via=c.via,
                rank_score=entity_rank_score([s.score for s in r[:top_k]], alpha, top_k, rank_origin),
                top_chunks=tuple(r[:top_k]),
            )
            for c, r in zip(candidates, ranked, strict=True)
        ]

    scored.sort(key=lambda ce: (-ce.rank_score, ce.entity, ce.via))
    selected: list[CandidateEntity] = []
    seen: set[str] = set()
    for ce in scored:
        if ce.entity in seen:
            continue
        seen.add(ce.entity)
        selected.append(ce)
        if len(selected) == width:
            break
    return selected


def _score_global(
    candidates: Sequence[Candidate],
    ranked: Sequence[list[ScoredChunk]],
    top_k: int,
    alpha: float,
    rank_origin: int,
) -> list[CandidateEntity]:
    # Pool every candidate's reranked chunks and keep the global top-K; each
    # candidate sums its pooled chunks weighted by their global rank.
    pool = sorted(
        ((scored, idx) for idx, chunks in enumerate(ranked) for scored in chunks),
        key=lambda pair: (*chunk_order(pair[0]), pair[1]),
    )[:top_k]
    per_candidate: list[list[tuple[int, ScoredChunk]]] = [[] for _ in candidates]
    for global_rank, (scored, idx) in enumerate(pool):
        per_candidate[idx].append((global_rank, scored))
    return [
        CandidateEntity(
            entity=c.entity,
            via=c.via,
            rank_score=sum(s.score * decay_weight(g, alpha, rank_origin) for g, s in per_candidate[idx]),
            top_chunks=tuple(s for _, s in per_candidate[idx]),
        )
        for idx, c in enumerate(candidates)
    ]
