"""In-memory knowledge graph loaded from flat TSV files.

Leaf module: no project configuration is read here. The store is frozen after
load, so any number of threads may query it at once.
"""

from collections.abc import Iterator
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path

import networkx as nx

import core.logging as logging
from core.utils import collapse_whitespace


class GraphLoadError(Exception):
    """Raised when a triples or labels file cannot be read."""


class MalformedRowError(GraphLoadError):
    """Raised when one or more rows do not have the expected tab-separated fields."""

    def __init__(self, path: Path, line_numbers: list[int]) -> None:
        self.path = path
        self.line_numbers = line_numbers
        shown = ", ".join(str(n) for n in line_numbers[:20])
        more = f" (+{len(line_numbers) - 20} more)" if len(line_numbers) > 20 else ""
        super().__init__(f"{path}: malformed rows at line(s) {shown}{more}")


class Direction(StrEnum):
    OUTGOING = "outgoing"
    INCOMING = "incoming"


@dataclass(frozen=True, order=True)
class Triple:
    head: str
    relation: str
    tail: str
    # View attribute: which end the traversal started from. Never stored.
    direction: Direction = Direction.OUTGOING

    def __post_init__(self) -> None:
        if not self.head or not self.tail:
            raise ValueError("triple head and tail must be non-empty")

    @property
    def source(self) -> str:
        """Entity the traversal expanded from."""
        return self.head if self.direction is Direction.OUTGOING else self.tail

    @property
    def target(self) -> str:
        """Entity the traversal reached."""
        return self.tail if self.direction is Direction.OUTGOING else self.head


def _label_key(surface: str) -> str:
    return collapse_whitespace(surface).casefold()


class GraphStore:
    def __init__(self, graph: nx.MultiDiGraph, labels: dict[str, str]) -> None:
        self._graph = nx.freeze(graph)
        self._labels = dict(labels)
        for node in graph.nodes:
            self._labels.setdefault(node, node)
        by_label: dict[str, set[str]] = {}
        for entity, label in self._labels.items():
            by_label.setdefault(_label_key(label), set()).add(entity)
        self._by_label = {key: tuple(sorted(ids)) for key, ids in by_label.items()}

    @property
    def triple_count(self) -> int:
        return self._graph.number_of_edges()

    @property
    def entity_count(self) -> int:
        return self._graph.number_of_nodes()

    def label(self, entity: str) -> str:
        return self._labels.get(entity, entity)

    def has_triple(self, head: str, relation: str, tail: str) -> bool:
        return self._graph.has_edge(head, tail, key=relation)

    def triples(self) -> Iterator[Triple]:
        for head, tail, relation in sorted(self._graph.edges(keys=True)):
            yield Triple(head, relation, tail)

    def _out_edges(self, entity: str) -> list[tuple[str, str, str]]:
        if entity not in self._graph:
            return []
        return list(self._graph.out_edges(entity, keys=True))

    def _in_edges(self, entity: str) -> list[tuple[str, str, str]]:
        if entity not in self._graph:
            return []
        return list(self._graph.in_edges(entity, keys=True))

    def _lookup_label(self, key: str) -> tuple[str, ...]:
        return self._by_label.get(key, ())


def _read_rows(path: Path, n_fields: int) -> list[tuple[int, list[str]]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise GraphLoadError(f"Cannot read {path}: {e}") from e

    rows: list[tuple[int, list[str]]] = []
    malformed: list[int] = []
    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.rstrip("\r").split("\t")
        if len(fields) != n_fields or not all(f.strip() for f in fields):
            malformed.append(line_no)
            continue
        rows.append((line_no, fields))
    if malformed:
        raise MalformedRowError(Path(path), malformed)
    return rows


def load_graph(triples_path: str | Path, labels_path: str | Path | None = None) -> GraphStore:
    graph = nx.MultiDiGraph()
    malformed: list[int] = []
    for line_no, (head, relation, tail) in _read_rows(triples_path, 3):
        head, relation, tail = head.strip(), relation.strip(), tail.strip()
        if any(len(token.split()) != 1 for token in (head, relation, tail)):
            malformed.append(line_no)
            continue
        # Keyed by relation: re-adding (head, relation, tail) overwrites, never duplicates.
        graph.add_edge(head, tail, key=relation)
    if malformed:
        raise MalformedRowError(Path(triples_path), malformed)

    labels: dict[str, str] = {}
    if labels_path is not None:
        for _, (entity, label) in _read_rows(labels_path, 2):
            labels[entity.strip()] = label.strip()

    store = GraphStore(graph, labels)
    logging.info(f"Loaded graph from {triples_path}: {store.triple_count} triples, {store.entity_count} entities")
    return store


def relations_of(store: GraphStore, entity: str) -> list[tuple[str, Direction]]:
    found = {(relation, Direction.OUTGOING) for _, _, relation in store._out_edges(entity)}
    found |= {(relation, Direction.INCOMING) for _, _, relation in store._in_edges(entity)}
    return sorted(found)


def neighbors(store: GraphStore, entity: str, relation: str, direction: Direction) -> list[str]:
    if direction is Direction.OUTGOING:
        found = {tail for _, tail, key in store._out_edges(entity) if key == relation}
    else:
        found = {head for head, _, key in store._in_edges(entity) if key == relation}
    return sorted(found)


def resolve_label(store: GraphStore, surface: str) -> list[str]:
    key = _label_key(surface)
    if not key:
        return []
    return list(store._lookup_label(key))
