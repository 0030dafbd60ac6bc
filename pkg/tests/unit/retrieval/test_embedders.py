import httpx
import numpy as np
import pytest

from retrieval.embedders import EmbedderError, HashingEmbedder, HttpEmbedder


def _http_embedder(handler, attempts: int = 1) -> HttpEmbedder:
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return HttpEmbedder("http://embedder.test/embed", attempts=attempts, backoff_seconds=0, client=client)


# ============================================================================
# Hashing embedder
# ============================================================================


def test_hashing_embedder_is_deterministic_and_fixed_size() -> None:
    embedder = HashingEmbedder(32)
    first = embedder.embed("Pony Ma founded Tencent")
    assert first.shape == (32,)
    assert np.array_equal(first, HashingEmbedder(32).embed("pony ma, founded TENCENT!"))


def test_hashing_embedder_salt_changes_buckets() -> None:
    text = "alpha beta gamma delta epsilon"
    assert not np.array_equal(HashingEmbedder(64, salt="a").embed(text), HashingEmbedder(64, salt="b").embed(text))


def test_hashing_embedder_rejects_bad_dimension() -> None:
    with pytest.raises(ValueError):
        HashingEmbedder(0)


# ============================================================================
# HTTP embedder
# ============================================================================


def test_http_embedder_posts_texts_and_reads_vectors() -> None:
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request.read())
        return httpx.Response(200, json={"vectors": [[1.0, 0.0], [0.0, 1.0]]})

    vectors = _http_embedder(handler).embed_many(["a", "b"])
    assert vectors.shape == (2, 2)
    assert b'"texts"' in seen[0]


def test_http_embedder_retries_transport_errors() -> None:
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        if calls["n"] < 3:
            raise httpx.ConnectError("refused", request=request)
        return httpx.Response(200, json={"vectors": [[0.5, 0.5]]})

    assert _http_embedder(handler, attempts=3).embed_many(["a"]).shape == (1, 2)
    assert calls["n"] == 3


@pytest.mark.parametrize(
    "body",
    [
        {"vectors": [[1.0, 0.0]]},  # one vector for two texts
        {"vectors": [[1.0], [1.0, 2.0]]},  # ragged
        {"embeddings": []},
        {"vectors": [["x"], ["y"]]},
    ],
)
def test_http_embedder_rejects_malformed_bodies(body) -> None:
    embedder = _http_embedder(lambda request: httpx.Response(200, json=body))
    with pytest.raises(EmbedderError):
        embedder.embed_many(["a", "b"])


def test_http_embedder_http_error_raises() -> None:
    embedder = _http_embedder(lambda request: httpx.Response(500))
    with pytest.raises(EmbedderError):
        embedder.embed_many(["a"])


def test_http_embedder_dimension_must_stay_constant() -> None:
    bodies = iter([{"vectors": [[1.0, 0.0]]}, {"vectors": [[1.0, 0.0, 0.0]]}])
    embedder = _http_embedder(lambda request: httpx.Response(200, json=next(bodies)))
    embedder.embed_many(["a"])
    with pytest.raises(EmbedderError):
        embedder.embed_many(["b"])
