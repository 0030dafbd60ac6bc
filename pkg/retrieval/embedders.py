"""Embedder implementations behind one contract: text in, fixed-size vector out.

``HashingEmbedder`` is the offline implementation (token overlap drives cosine
similarity); ``HttpEmbedder`` talks to an embedding service over JSON.
"""

import hashlib
import re
from collections.abc import Sequence

import httpx
import numpy as np

from core.utils import call_with_retry

_TOKEN_RE = re.compile(r"\w+")


class EmbedderError(Exception):
    """Raised when an embedder cannot produce vectors for a batch."""


class Embedder:
    """Contract: identical text yields an identical vector; dimension is constant."""

    dimension: int
    # Engine fans scoring out over threads only when every embedder allows it.
    thread_safe: bool = True

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        raise NotImplementedError

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


class HashingEmbedder(Embedder):
    """Bag-of-words counts hashed into ``dimension`` buckets.

    ``salt`` changes the bucket assignment, so two instances with different salts
    act as two independent embedders (a coarse and a rerank stage)."""

    def __init__(self, dimension: int = 256, salt: str = "") -> None:
        if dimension <= 0:
            raise ValueError(f"dimension must be > 0 (got {dimension})")
        self.dimension = dimension
        self.salt = salt

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(f"{self.salt}\x00{token}".encode(), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dimension

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        vectors = np.zeros((len(texts), self.dimension), dtype=np.float64)
        for row, text in enumerate(texts):
            for token in _TOKEN_RE.findall(text.lower()):
                vectors[row, self._bucket(token)] += 1.0
        return vectors


class HttpEmbedder(Embedder):
    """POST ``{"texts": [...]}`` to ``url``; expects ``{"vectors": [[...], ...]}``."""

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        attempts: int = 3,
        backoff_seconds: float = 1.0,
        client: httpx.Client | None = None,
    ) -> None:
        self.url = url
        self.attempts = attempts
        self.backoff_seconds = backoff_seconds
        self._client = client or httpx.Client(timeout=timeout)
        self.dimension = 0  # learned from the first response

    def _post(self, texts: list[str]) -> dict:
        response = self._client.post(self.url, json={"texts": texts})
        response.raise_for_status()
        return response.json()

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dimension), dtype=np.float64)
        try:
            payload = call_with_retry(
                lambda: self._post(texts),
                attempts=self.attempts,
                backoff_seconds=self.backoff_seconds,
                retry_on=(httpx.TransportError,),
            )
        except (httpx.HTTPError, ValueError) as e:
            raise EmbedderError(f"Embedding request to {self.url} failed: {e}") from e

        vectors = payload.get("vectors") if isinstance(payload, dict) else None
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise EmbedderError(f"Embedder at {self.url} returned a malformed body")
        try:
            matrix = np.asarray(vectors, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise EmbedderError(f"Embedder at {self.url} returned non-numeric vectors") from e
        if matrix.ndim != 2 or matrix.shape[1] == 0:
            raise EmbedderError(f"Embedder at {self.url} returned ragged or empty vectors")
        if self.dimension and matrix.shape[1] != self.dimension:
            raise EmbedderError(f"Embedder at {self.url} changed dimension {self.dimension} -> {matrix.shape[1]}")
        self.dimension = int(matrix.shape[1])
        return matrix

    def close(self) -> None:
        self._client.close()
