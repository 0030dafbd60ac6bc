"""Per-entity documents and their sliding-window chunks."""

import json
import threading
from dataclasses import dataclass
from pathlib import Path

import core.logging as logging

DEFAULT_CHUNK_SIZE = 100  # words
DEFAULT_CHUNK_OVERLAP = 20  # words


class CorpusLoadError(Exception):
    """Raised when the corpus file cannot be read or a record is unusable."""


class ChunkingError(ValueError):
    """Raised for chunk size/overlap combinations that cannot produce a window."""


@dataclass(frozen=True)
class Document:
    entity: str
    title: str
    text: str


@dataclass(frozen=True)
class Chunk:
    entity: str
    index: int
    text: str
    word_span: tuple[int, int]  # [start, end) over the document's words


def chunk_document(doc: Document, size_words: int, overlap_words: int) -> list[Chunk]:
    if size_words <= 0:
        raise ChunkingError(f"chunk size must be > 0 (got {size_words})")
    if overlap_words < 0:
        raise ChunkingError(f"chunk overlap must be >= 0 (got {overlap_words})")
    if overlap_words >= size_words:
        raise ChunkingError(f"chunk overlap must be < size (got overlap={overlap_words}, size={size_words})")

    words = doc.text.split()
    n = len(words)
    if n == 0:
        return []
    stride = size_words - overlap_words
    # A window starting at or past n - overlap would only repeat words the previous
    # window already covered. Texts no longer than the overlap still get one chunk.
    chunks = []
    for index, start in enumerate(range(0, max(n - overlap_words, 1), stride)):
        end = min(start + size_words, n)
        chunks.append(Chunk(doc.entity, index, " ".join(words[start:end]), (start, end)))
    return chunks


class Corpus:
    def __init__(self, documents: dict[str, Document], duplicates: int = 0) -> None:
        self._documents = dict(documents)
        self.duplicates = duplicates
        self._chunk_cache: dict[tuple[str, int, int], list[Chunk]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._documents)

    def __contains__(self, entity: object) -> bool:
        return entity in self._documents

    def get(self, entity: str) -> Document | None:
        return self._documents.get(entity)

    def chunks(self, entity: str, size_words: int, overlap_words: int) -> list[Chunk]:
        """Chunks of the entity's document; [] when the entity has no document."""
        doc = self._documents.get(entity)
        if doc is None:
            return []
        key = (entity, size_words, overlap_words)
        with self._lock:
            cached = self._chunk_cache.get(key)
        if cached is None:
            cached = chunk_document(doc, size_words, overlap_words)
            with self._lock:
                self._chunk_cache[key] = cached
        return list(cached)


def load_corpus(path: str | Path) -> Corpus:
    try:
        lines = Path(path).read_text(encoding="utf-8").split("\n")
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusLoadError(f"Cannot read {path}: {e}") from e

    documents: dict[str, Document] = {}
    duplicates = 0
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusLoadError(f"{path}:{line_no}: invalid JSON ({e.msg})") from e
        if not isinstance(record, dict) or not record.get("entity_id"):
            raise CorpusLoadError(f"{path}:{line_no}: record is missing entity_id")
        entity = str(record["entity_id"])
        if entity in documents:
            duplicates += 1
        documents[entity] = Document(
            entity=entity,
            title=str(record.get("title") or ""),
            text=str(record.get("text") or ""),
        )

    if duplicates:
        logging.warning(f"Corpus {path}: {duplicates} duplicate entity record(s), last one kept")
    logging.info(f"Loaded corpus from {path}: {len(documents)} documents")
    return Corpus(documents, duplicates=duplicates)
