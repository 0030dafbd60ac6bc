"""Iterative knowledge-graph-guided retrieval and reasoning.

Leaf module: it must not import from ``core.config`` or ``core.settings``. All
tuning is passed in via ``EngineConfig`` and every store via ``Stores``, so the
same loop runs for the CLI, the HTTP service and the benchmark runner.

One run: link topic entities, optionally prune them, write clue queries, then
repeat up to ``max_depth`` times: pick relations per topic, rank the reached
entities by their documents, and ask the model whether the gathered paths and
passages answer the question.
"""

import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from enum import StrEnum
from typing import Any, Protocol

import core.logging as logging
from kg.store import Direction, GraphStore, Triple, neighbors, relations_of, resolve_label
from llm.gateway import GenConfig
from llm.templates import TemplateId
from reasoning.parsing import (
    Verdict,
    VerdictKind,
    parse_clues,
    parse_final_answer,
    parse_json_list,
    parse_relation_selections,
    parse_verdict,
)
from retrieval.corpus import DEFAULT_CHUNK_OVERLAP, DEFAULT_CHUNK_SIZE, Corpus
from retrieval.embedders import Embedder
from retrieval.retriever import Candidate, ComposedQuery, ScoredChunk, chunk_order, rank_candidates, serialize_path

RECORD_SCHEMA_VERSION = 1
NONE_TEXT = "(none)"


class Task(StrEnum):
    QA = "qa"
    FACT_VERIFICATION = "fact_verification"


# Rendered into examine_reason and final_answer as {task_instruction}.
TASK_INSTRUCTIONS = {
    Task.QA: "Give the shortest answer that fully answers the question.",
    Task.FACT_VERIFICATION: (
        "The question is a claim to verify. The answer must be exactly one label: "
        "ANSWER: SUPPORTS when the evidence supports the claim, ANSWER: REFUTES when it contradicts the claim."
    ),
}


class EngineError(Exception):
    """Base class for engine failures."""


class ConfigError(EngineError, ValueError):
    """Raised for invalid engine tuning; carries every problem found."""

    def __init__(self, errors: list[str]) -> None:
        self.errors = errors
        super().__init__("; ".join(errors))


class NoStartingPointError(EngineError):
    """Raised when no mention in the question links to a graph entity."""


class PathInvariantError(EngineError):
    """Raised when a reasoning path is not a chain of real graph triples."""


class LLM(Protocol):
    def ask(self, template_id: str, bindings: dict[str, str], cfg: GenConfig) -> str: ...

    def counts(self) -> dict[str, int]: ...


@dataclass(frozen=True)
class EngineConfig:
    width: int = 3  # W: topic entities kept per iteration
    max_depth: int = 3  # D: iterations
    top_k: int = 5  # K: chunks per candidate entering its ranking score
    top_l: int = 5  # L: chunks kept as evidence per iteration
    alpha: float = 0.5  # rank decay
    coarse_keep: int = 20
    chunk_size: int = DEFAULT_CHUNK_SIZE
    chunk_overlap: int = DEFAULT_CHUNK_OVERLAP
    topic_prune: bool = True
    batched_relation_prune: bool = True
    clue_query: bool = True
    global_top_k: bool = False
    rank_origin: int = 0  # 0: best chunk weighs exp(0) = 1
    max_workers: int = 1
    exploration: GenConfig = field(default_factory=GenConfig.exploration)
    reasoning: GenConfig = field(default_factory=GenConfig.reasoning)

    def __post_init__(self) -> None:
        errors = []
        for name in ("width", "max_depth", "top_k", "top_l", "coarse_keep", "chunk_size", "max_workers"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be >= 1 (got {getattr(self, name)})")
        if self.top_l > self.top_k:
            errors.append(f"top_l must be <= top_k (got {self.top_l} > {self.top_k})")
        if self.alpha < 0:
            errors.append(f"alpha must be >= 0 (got {self.alpha})")
        if not 0 <= self.chunk_overlap < self.chunk_size:
            errors.append(f"chunk_overlap must be in [0, chunk_size) (got {self.chunk_overlap})")
        if self.rank_origin not in (0, 1):
            errors.append(f"rank_origin must be 0 or 1 (got {self.rank_origin})")
        if errors:
            raise ConfigError(errors)

    def with_overrides(self, **overrides: Any) -> "EngineConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass(frozen=True)
class Stores:
    graph: GraphStore
    corpus: Corpus
    embedder_coarse: Embedder
    embedder_rerank: Embedder


@dataclass(frozen=True)
class TriplePath:
    steps: tuple[Triple, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def extend(self, triple: Triple) -> "TriplePath":
        return TriplePath((*self.steps, triple))

    def entities(self) -> list[str]:
        if not self.steps:
            return []
        return [self.steps[0].source, *(t.target for t in self.steps)]


@dataclass(frozen=True)
class TopicEntity:
    entity: str
    clue_query: str = ""
    path: TriplePath = TriplePath()


@dataclass
class ExplorationState:
    question: str
    task: Task = Task.QA
    topics: list[TopicEntity] = field(default_factory=list)
    evidence: list[ScoredChunk] = field(default_factory=list)


@dataclass(frozen=True)
class EntityPruneResult:
    topics: list[TopicEntity]
    evidence: list[ScoredChunk]
    candidate_count: int


@dataclass(frozen=True)
class IterationReport:
    """One exploration iteration.

    An "exhausted" iteration reached no new entity and is not a completed
    iteration: it asks no examine-and-reason question, and it makes a
    relation-prune call only when some topic still had incident relations."""

    iteration: int
    topics: list[str]
    clue_queries: dict[str, str]
    selected_relations: dict[str, list[str]]
    candidate_count: int
    new_topics: list[str]
    paths: list[str]
    evidence: list[dict]
    verdict: str  # "answer" | "continue" | "exhausted"
    notes: list[str]


@dataclass(frozen=True)
class AnswerRecord:
    question: str
    answer: str
    degraded: bool
    paths: list[dict]
    evidence: list[dict]
    reports: list[IterationReport]
    call_counts: dict[str, int]
    notes: list[str]
    task: str = Task.QA.value
    # {"mention", "entity"} per linked surface form
    topic_links: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"schema": RECORD_SCHEMA_VERSION, **asdict(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)


def _note(notes: list[str], message: str) -> None:
    logging.warning(f"[Engine] {message}")
    notes.append(message)


def path_view(topic: TopicEntity, graph: GraphStore) -> dict:
    return {
        "entity": topic.entity,
        "text": serialize_path(topic.path.steps, graph),
        "triples": [[t.head, t.relation, t.tail, t.direction.value] for t in topic.path.steps],
    }


def evidence_view(scored: ScoredChunk, graph: GraphStore) -> dict:
    return {
        "entity": scored.chunk.entity,
        "label": graph.label(scored.chunk.entity),
        "index": scored.chunk.index,
        "score": round(scored.score, 6),
        "text": scored.chunk.text,
    }


def check_path(topic: TopicEntity, graph: GraphStore, max_depth: int) -> None:
    steps = topic.path.steps
    if len(steps) > max_depth:
        raise PathInvariantError(f"path to {topic.entity} has {len(steps)} triples > max_depth {max_depth}")
    for triple in steps:
        if not graph.has_triple(triple.head, triple.relation, triple.tail):
            raise PathInvariantError(f"path to {topic.entity} uses unknown triple {triple}")
    for prev, nxt in zip(steps, steps[1:]):
        if prev.target != nxt.source:
            raise PathInvariantError(f"path to {topic.entity} breaks between {prev} and {nxt}")
    if steps and steps[-1].target != topic.entity:
        raise PathInvariantError(f"path to {topic.entity} ends at {steps[-1].target}")


# =============================================================================
# Prompt blocks
# =============================================================================


def _entity_list(entities: Sequence[str], graph: GraphStore) -> str:
    return "\n".join(f"- {e}: {graph.label(e)}" for e in entities)


def _entity_block(topic: TopicEntity, candidates: Sequence[tuple[str, Direction]], graph: GraphStore) -> str:
    return "\n".join(
        [
            f"ENTITY[{topic.entity}] {graph.label(topic.entity)}",
            f"Clue query: {topic.clue_query or NONE_TEXT}",
            f"Path: {serialize_path(topic.path.steps, graph) or '(start)'}",
            "Candidates: " + "; ".join(f"{r}:{d}" for r, d in candidates),
        ]
    )


def _paths_block(topics: Sequence[TopicEntity], graph: GraphStore) -> str:
    lines = [f"- {serialize_path(t.path.steps, graph)}" for t in topics if t.path.steps]
    return "\n".join(lines) or NONE_TEXT


def _references_block(evidence: Sequence[ScoredChunk], graph: GraphStore) -> str:
    lines = [f"[{i}] {graph.label(s.chunk.entity)}: {s.chunk.text}" for i, s in enumerate(evidence, start=1)]
    return "\n".join(lines) or NONE_TEXT


# =============================================================================
# Steps
# =============================================================================


def extract_topic_entities(
    question: str, graph: GraphStore, llm: LLM, cfg: EngineConfig, notes: list[str]
) -> list[tuple[str, str]]:
    """(mention, entity id) pairs in mention order; an id reached twice keeps its first mention."""
    response = llm.ask(TemplateId.ENTITY_EXTRACTION, {"question": question}, cfg.exploration)
    mentions = parse_json_list(response)
    if mentions is None:
        _note(notes, "entity extraction reply is not a JSON list")
        mentions = []

    linked: list[tuple[str, str]] = []
    seen: set[str] = set()
    for mention in mentions:
        ids = resolve_label(graph, mention)
        if not ids:
            _note(notes, f"mention {mention!r} matches no graph label; dropped")
        for entity in ids:
            if entity not in seen:
                seen.add(entity)
                linked.append((mention, entity))
    if not linked:
        raise NoStartingPointError(f"no mention in {question!r} links to a graph entity")
    logging.info(f"[Engine] linked topic entities: {', '.join(f'{m!r} -> {e}' for m, e in linked)}")
    return linked


def topic_prune(
    question: str, linked: list[str], graph: GraphStore, llm: LLM, cfg: EngineConfig, notes: list[str]
) -> list[TopicEntity]:
    topics = [TopicEntity(e) for e in linked]
    if not cfg.topic_prune:
        return topics

    response = llm.ask(
        TemplateId.TOPIC_PRUNE, {"question": question, "entities": _entity_list(linked, graph)}, cfg.exploration
    )
    selection = parse_json_list(response)
    if selection is None:
        _note(notes, "topic prune reply is not a JSON list; keeping every linked entity")
        return topics

    keep = set()
    for item in selection:
        if item in linked:
            keep.add(item)
        else:
            keep.update(e for e in linked if graph.label(e).casefold() == item.casefold())
    if not keep:
        _note(notes, "topic prune kept no linked entity; keeping every linked entity")
        return topics
    return [t for t in topics if t.entity in keep]


def generate_clue_queries(
    question: str,
    topics: list[TopicEntity],
    context: str,
    graph: GraphStore,
    llm: LLM,
    cfg: EngineConfig,
    notes: list[str],
) -> list[TopicEntity]:
    if not cfg.clue_query:
        return [replace(t, clue_query="") for t in topics]

    bindings = {
        "question": question,
        "entities": _entity_list([t.entity for t in topics], graph),
        "context": context or NONE_TEXT,
    }
    clues = parse_clues(llm.ask(TemplateId.CLUE_QUERY, bindings, cfg.exploration))
    for t in topics:
        if t.entity not in clues:
            _note(notes, f"no clue query for {t.entity}")
    return [replace(t, clue_query=clues.get(t.entity, "")) for t in topics]


def _validate_selection(
    topic: TopicEntity,
    picked: list[tuple[str, str | None]] | None,
    candidates: list[tuple[str, Direction]],
    width: int,
    notes: list[str],
) -> list[tuple[str, Direction]]:
    chosen: list[tuple[str, Direction]] = []
    for relation, direction in picked or []:
        if direction is None:
            matches = [c for c in candidates if c[0] == relation]
        elif direction in (d.value for d in Direction):
            matches = [c for c in candidates if c == (relation, Direction(direction))]
        else:
            matches = []
        if not matches:
            _note(notes, f"{topic.entity}: relation {relation}:{direction} is not a candidate; dropped")
        chosen.extend(m for m in matches if m not in chosen)

    if not chosen:
        _note(notes, f"{topic.entity}: no valid relation selected; using the first {width} candidate(s)")
        return candidates[:width]
    if len(chosen) > width:
        _note(notes, f"{topic.entity}: {len(chosen)} relations selected, keeping {width}")
    return chosen[:width]


def relation_prune(
    question: str, topics: list[TopicEntity], graph: GraphStore, llm: LLM, cfg: EngineConfig, notes: list[str]
) -> dict[str, list[tuple[str, Direction]]]:
    """Selected (relation, direction) pairs per topic, at most ``width`` each."""
    candidates = {t.entity: relations_of(graph, t.entity) for t in topics}
    selected: dict[str, list[tuple[str, Direction]]] = {}
    active = []
    for t in topics:
        if candidates[t.entity]:
            active.append(t)
        else:
            _note(notes, f"{t.entity} has no incident relations; not expanded")
            selected[t.entity] = []
    if not active:
        return selected

    if cfg.batched_relation_prune:
        bindings = {
            "question": question,
            "width": str(cfg.width),
            "entities": "\n".join(_entity_block(t, candidates[t.entity], graph) for t in active),
        }
        picks = parse_relation_selections(llm.ask(TemplateId.RELATION_PRUNE_BATCHED, bindings, cfg.exploration))
        for t in active:
            selected[t.entity] = _validate_selection(t, picks.get(t.entity), candidates[t.entity], cfg.width, notes)
    else:
        for t in active:
            bindings = {
                "question": question,
                "width": str(cfg.width),
                "entity": _entity_block(t, candidates[t.entity], graph),
            }
            picks = parse_relation_selections(llm.ask(TemplateId.RELATION_PRUNE_SINGLE, bindings, cfg.exploration))
            selected[t.entity] = _validate_selection(t, picks.get(t.entity), candidates[t.entity], cfg.width, notes)
    return selected


def entity_prune(
    question: str,
    topics: list[TopicEntity],
    selected: dict[str, list[tuple[str, Direction]]],
    stores: Stores,
    cfg: EngineConfig,
) -> EntityPruneResult:
    """Expand the selected relations, rank reached entities by their documents and keep the best ``width``."""
    graph = stores.graph
    candidates: list[Candidate] = []
    parents: dict[Triple, TopicEntity] = {}
    for topic in topics:
        visited = {topic.entity, *topic.path.entities()}
        for relation, direction in selected.get(topic.entity, []):
            for reached in neighbors(graph, topic.entity, relation, direction):
                if reached in visited:
                    continue
                if direction is Direction.OUTGOING:
                    triple = Triple(topic.entity, relation, reached, direction)
                else:
                    triple = Triple(reached, relation, topic.entity, direction)
                query = ComposedQuery(question, topic.clue_query, serialize_path(topic.path.extend(triple).steps, graph))
                chunks = tuple(stores.corpus.chunks(reached, cfg.chunk_size, cfg.chunk_overlap))
                candidates.append(Candidate(reached, triple, chunks, query))
                parents[triple] = topic
    if not candidates:
        return EntityPruneResult([], [], 0)

    ranked = rank_candidates(
        candidates,
        None,
        cfg.width,
        cfg.top_k,
        cfg.alpha,
        cfg.coarse_keep,
        embedder_coarse=stores.embedder_coarse,
        embedder_rerank=stores.embedder_rerank,
        rank_origin=cfg.rank_origin,
        global_top_k=cfg.global_top_k,
        max_workers=cfg.max_workers,
    )
    new_topics = []
    for ce in ranked:
        parent = parents[ce.via]
        new_topics.append(TopicEntity(ce.entity, parent.clue_query, parent.path.extend(ce.via)))
    evidence = sorted((s for ce in ranked for s in ce.top_chunks), key=chunk_order)[: cfg.top_l]
    return EntityPruneResult(new_topics, evidence, len(candidates))


def examine_and_reason(
    state: ExplorationState, graph: GraphStore, llm: LLM, cfg: EngineConfig, notes: list[str]
) -> Verdict:
    bindings = {
        "question": state.question,
        "clue_queries": "\n".join(f"- {t.entity}: {t.clue_query or NONE_TEXT}" for t in state.topics) or NONE_TEXT,
        "paths": _paths_block(state.topics, graph),
        "references": _references_block(state.evidence, graph),
        "topic_ids": ", ".join(t.entity for t in state.topics),
        "task_instruction": TASK_INSTRUCTIONS[state.task],
    }
    verdict = parse_verdict(llm.ask(TemplateId.EXAMINE_REASON, bindings, cfg.reasoning))
    if not verdict.parsed:
        _note(notes, "examine-and-reason reply has neither ANSWER nor CONTINUE; continuing")
    return verdict


def _apply_clues(
    topics: list[TopicEntity], verdict: Verdict, cfg: EngineConfig, notes: list[str]
) -> list[TopicEntity]:
    if not cfg.clue_query:
        return topics
    known = {t.entity for t in topics}
    for entity in verdict.new_clue_queries:
        if entity not in known:
            _note(notes, f"clue query for unknown topic {entity} ignored")
    return [replace(t, clue_query=verdict.new_clue_queries.get(t.entity, t.clue_query)) for t in topics]


def final_answer(
    question: str,
    topics: Sequence[TopicEntity],
    evidence: Sequence[ScoredChunk],
    graph: GraphStore | None,
    llm: LLM,
    cfg: EngineConfig,
    task: Task = Task.QA,
) -> str:
    bindings = {
        "question": question,
        "task_instruction": TASK_INSTRUCTIONS[task],
        "paths": _paths_block(topics, graph) if graph is not None else NONE_TEXT,
        "references": _references_block(evidence, graph) if graph is not None else NONE_TEXT,
    }
    return parse_final_answer(llm.ask(TemplateId.FINAL_ANSWER, bindings, cfg.reasoning))


# =============================================================================
# Runs
# =============================================================================


def _best_evidence(evidence: Sequence[ScoredChunk], limit: int) -> list[ScoredChunk]:
    best: dict[tuple[str, int], ScoredChunk] = {}
    for s in evidence:
        key = (s.chunk.entity, s.chunk.index)
        if key not in best or s.score > best[key].score:
            best[key] = s
    return sorted(best.values(), key=chunk_order)[:limit]


def run(question: str, stores: Stores, cfg: EngineConfig, gateway: Any, task: Task | str = Task.QA) -> AnswerRecord:
    """Answer ``question``; ``gateway`` is a ``Gateway`` (a per-run session is opened) or any ``LLM``.

    For ``Task.FACT_VERIFICATION`` the question is a claim and the answer a SUPPORTS or REFUTES label."""
    question = question.strip()
    if not question:
        raise ValueError("question must be non-empty")
    task = Task(task)
    llm: LLM = gateway.session() if hasattr(gateway, "session") else gateway
    graph = stores.graph
    notes: list[str] = []

    try:
        linked = extract_topic_entities(question, graph, llm, cfg, notes)
    except NoStartingPointError as e:
        _note(notes, f"{e}; answering from the question alone")
        answer = final_answer(question, [], [], graph, llm, cfg, task)
        return AnswerRecord(question, answer, True, [], [], [], llm.counts(), notes, task=task.value)

    topic_links = [{"mention": mention, "entity": entity} for mention, entity in linked]
    topics = topic_prune(question, [entity for _, entity in linked], graph, llm, cfg, notes)
    topics = generate_clue_queries(question, topics, NONE_TEXT, graph, llm, cfg, notes)
    state = ExplorationState(question=question, task=task, topics=topics)
    reports: list[IterationReport] = []
    gathered: list[ScoredChunk] = []
    answer: str | None = None

    for iteration in range(1, cfg.max_depth + 1):
        it_notes: list[str] = []
        selected = relation_prune(question, state.topics, graph, llm, cfg, it_notes)
        pruned = entity_prune(question, state.topics, selected, stores, cfg)
        for topic in pruned.topics:
            check_path(topic, graph, cfg.max_depth)
        logging.info(
            f"[Engine] iteration {iteration}: {len(state.topics)} topic(s), "
            f"{pruned.candidate_count} candidate(s), {len(pruned.topics)} kept"
        )

        report = dict(
            iteration=iteration,
            topics=[t.entity for t in state.topics],
            clue_queries={t.entity: t.clue_query for t in state.topics},
            selected_relations={e: [f"{r}:{d}" for r, d in rels] for e, rels in selected.items()},
            candidate_count=pruned.candidate_count,
            new_topics=[t.entity for t in pruned.topics],
            paths=[serialize_path(t.path.steps, graph) for t in pruned.topics],
            evidence=[evidence_view(s, graph) for s in pruned.evidence],
        )
        if not pruned.topics:
            _note(it_notes, f"iteration {iteration} reached no new entity; stopping")
            reports.append(IterationReport(**report, verdict="exhausted", notes=it_notes))
            notes.extend(it_notes)
            break

        state.topics = pruned.topics
        state.evidence = pruned.evidence
        gathered.extend(pruned.evidence)

        verdict = examine_and_reason(state, graph, llm, cfg, it_notes)
        reports.append(IterationReport(**report, verdict=verdict.kind.value, notes=it_notes))
        notes.extend(it_notes)
        if verdict.kind is VerdictKind.ANSWER:
            answer = verdict.answer
            break
        state.topics = _apply_clues(state.topics, verdict, cfg, notes)

    degraded = answer is None
    if degraded:
        state.evidence = _best_evidence(gathered, cfg.top_l)
        answer = final_answer(question, state.topics, state.evidence, graph, llm, cfg, task)
        _note(notes, "exploration ended without an answer; used the final-answer fallback")

    logging.info(f"[Engine] answer: {answer!r}{' (degraded)' if degraded else ''}")
    return AnswerRecord(
        question=question,
        answer=answer,
        degraded=degraded,
        paths=[path_view(t, graph) for t in state.topics if t.path.steps],
        evidence=[evidence_view(s, graph) for s in state.evidence],
        reports=reports,
        call_counts=llm.counts(),
        notes=notes,
        task=task.value,
        topic_links=topic_links,
    )


def answer_directly(question: str, gateway: Any, cfg: EngineConfig, task: Task | str = Task.QA) -> AnswerRecord:
    """Vanilla baseline: the model answers without any retrieval."""
    task = Task(task)
    llm: LLM = gateway.session() if hasattr(gateway, "session") else gateway
    answer = final_answer(question.strip(), [], [], None, llm, cfg, task)
    return AnswerRecord(question.strip(), answer, False, [], [], [], llm.counts(), [], task=task.value)
