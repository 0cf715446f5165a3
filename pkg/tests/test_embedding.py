import math

import pytest

from clg.embedding import (
    EmbeddingCache,
    EmbeddingVector,
    FakeEmbeddingProvider,
    HttpEmbeddingProvider,
    check_uniform_dim,
    cosine_similarity,
    distance,
    embed_corpus,
    embed_text,
    text_hash,
)
from clg.errors import (
    AuthError,
    DimensionMismatch,
    EmptyText,
    ProviderUnavailable,
    ZeroVector,
)
from clg.synthetic import synthetic_corpus


def vec(*values):
    return EmbeddingVector(values=tuple(float(v) for v in values), model_id="m")


def test_vector_rejects_non_finite():
    with pytest.raises(ValueError):
        vec(1.0, float("nan"))
    with pytest.raises(ValueError):
        vec(float("inf"))


def test_cosine_basics():
    assert cosine_similarity(vec(1, 0), vec(1, 0)) == pytest.approx(1.0)
    assert cosine_similarity(vec(1, 0), vec(0, 1)) == pytest.approx(0.0)
    assert cosine_similarity(vec(1, 0), vec(-1, 0)) == pytest.approx(-1.0)
    assert cosine_similarity(vec(2, 0), vec(1, 0)) == pytest.approx(1.0)  # scale-free
    assert distance(vec(1, 0), vec(0, 1)) == pytest.approx(1.0)


def test_cosine_errors():
    with pytest.raises(DimensionMismatch):
        cosine_similarity(vec(1, 0), vec(1, 0, 0))
    with pytest.raises(ZeroVector):
        cosine_similarity(vec(0, 0), vec(1, 0))


def test_fake_provider_is_deterministic_and_text_sensitive():
    a = FakeEmbeddingProvider(dim=16)
    b = FakeEmbeddingProvider(dim=16)
    (va,) = a.embed_batch(["hello there"], "m1")
    (vb,) = b.embed_batch(["hello there"], "m1")
    assert va == vb
    (vc,) = a.embed_batch(["hello there."], "m1")
    assert vc != va
    (vd,) = a.embed_batch(["hello there"], "m2")
    assert vd != va  # model id participates
    assert len(va) == 16
    assert all(math.isfinite(x) for x in va)


def test_embed_text_uses_cache(tmp_path):
    provider = FakeEmbeddingProvider(dim=8)
    cache = EmbeddingCache(tmp_path)
    first = embed_text("some comment", "m", provider, cache)
    assert provider.calls == 1
    again = embed_text("some comment", "m", provider, cache)
    assert provider.calls == 1  # served from disk
    assert again == first

    fresh_provider = FakeEmbeddingProvider(dim=8)
    recovered = embed_text("some comment", "m", fresh_provider, EmbeddingCache(tmp_path))
    assert fresh_provider.calls == 0
    assert recovered == first


def test_embed_text_rejects_empty(tmp_path):
    with pytest.raises(EmptyText):
        embed_text("", "m", FakeEmbeddingProvider(), EmbeddingCache(tmp_path))
    with pytest.raises(EmptyText):
        embed_text("   ", "m", FakeEmbeddingProvider(), EmbeddingCache(tmp_path))


def test_embed_corpus_covers_every_case(tmp_path):
    corpus = synthetic_corpus("mod", 20, seed=4)
    vectors = embed_corpus(corpus, "m", FakeEmbeddingProvider(dim=12), EmbeddingCache(tmp_path))
    assert set(vectors) == set(corpus.by_id)
    assert check_uniform_dim(vectors) == 12


def test_check_uniform_dim_rejects_mixed():
    with pytest.raises(DimensionMismatch):
        check_uniform_dim({"a": vec(1, 2), "b": vec(1, 2, 3)})


def test_text_hash_is_stable():
    assert text_hash("abc") == text_hash("abc")
    assert text_hash("abc") != text_hash("abd")
    assert len(text_hash("abc")) == 64


class _StubResponse:
    def __init__(self, status_code, payload=None):
        self.status_code = status_code
        self._payload = payload or {}
        self.text = "stub"

    def json(self):
        return self._payload


class _StubSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.requests.append((url, json))
        return self.responses.pop(0)


def test_http_provider_requires_key(monkeypatch):
    monkeypatch.delenv("CLG_API_KEY", raising=False)
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    provider = HttpEmbeddingProvider()
    with pytest.raises(AuthError):
        provider.embed_batch(["x"], "m")


def test_http_provider_surfaces_auth_rejection():
    provider = HttpEmbeddingProvider(api_key="k", max_retries=3, backoff_seconds=0)
    provider.session = _StubSession([_StubResponse(401)])
    with pytest.raises(AuthError):
        provider.embed_batch(["x"], "m")


def test_http_provider_retries_then_gives_up():
    provider = HttpEmbeddingProvider(api_key="k", max_retries=2, backoff_seconds=0)
    provider.session = _StubSession([_StubResponse(500), _StubResponse(500)])
    with pytest.raises(ProviderUnavailable):
        provider.embed_batch(["x"], "m")
    assert len(provider.session.requests) == 2


def test_http_provider_orders_results_by_index():
    payload = {
        "data": [
            {"index": 1, "embedding": [2.0]},
            {"index": 0, "embedding": [1.0]},
        ]
    }
    provider = HttpEmbeddingProvider(api_key="k")
    provider.session = _StubSession([_StubResponse(200, payload)])
    assert provider.embed_batch(["a", "b"], "m") == [[1.0], [2.0]]
