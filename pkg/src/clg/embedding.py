"""Text embeddings: provider clients, persistent cache, cosine similarity.

Vectors come from any backend exposing a single "texts in, float arrays
out" call. Two providers ship here: an OpenAI-compatible HTTPS client and
a deterministic fake (hash-seeded gaussian vectors) that backs tests and
offline runs. Vectors are cached on disk keyed by (model id, sha256 of the
exact text bytes), so embedding a corpus is a one-time cost.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
import time
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol

import requests

from .corpus import Corpus
from .errors import AuthError, DimensionMismatch, EmptyText, ProviderUnavailable, ZeroVector

DEFAULT_EMBED_MODEL = "text-embedding-3-large"
API_KEY_ENV = "CLG_API_KEY"


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_id: str

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding vector contains non-finite entries")

    @property
    def dim(self) -> int:
        return len(self.values)


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between two vectors; symmetric, in [-1, 1]."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dims differ: {a.dim} vs {b.dim}")
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a.values, b.values):
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity is undefined for an all-zero vector")
    return dot / (math.sqrt(na) * math.sqrt(nb))


def distance(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Embedding distance, defined as 1 - cosine similarity."""
    return 1.0 - cosine_similarity(a, b)


class EmbeddingProvider(Protocol):
    def embed_batch(self, texts: list[str], model_id: str) -> list[list[float]]:
        ...


class FakeEmbeddingProvider:
    """Deterministic stand-in: a hash-seeded gaussian vector per text.

    The vector depends only on (model_id, text), so runs are reproducible
    across processes and machines. Similar texts do NOT get similar
    vectors; this backs plumbing and determinism tests, not retrieval
    quality.
    """

    def __init__(self, dim: int = 64):
        self.dim = dim
        self.calls = 0

    def embed_batch(self, texts: list[str], model_id: str) -> list[list[float]]:
        out = []
        for text in texts:
            self.calls += 1
            seed = hashlib.sha256(f"{model_id}\x00{text}".encode("utf-8")).digest()
            rng = random.Random(int.from_bytes(seed[:8], "big"))
            out.append([rng.gauss(0.0, 1.0) for _ in range(self.dim)])
        return out


class HttpEmbeddingProvider:
    """OpenAI-compatible /embeddings client with bounded retry."""

    def __init__(
        self,
        base_url: str = "https://api.openai.com/v1",
        api_key: str | None = None,
        max_retries: int = 3,
        backoff_seconds: float = 1.0,
        timeout: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key or os.environ.get(API_KEY_ENV) or os.environ.get("OPENAI_API_KEY")
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds
        self.timeout = timeout
        self.session = requests.Session()

    def embed_batch(self, texts: list[str], model_id: str) -> list[list[float]]:
        if not self.api_key:
            raise AuthError(f"no API key configured (set {API_KEY_ENV} or OPENAI_API_KEY)")
        payload = {"model": model_id, "input": texts}
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = self.session.post(
                    f"{self.base_url}/embeddings", json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code in (401, 403):
                    raise AuthError(f"provider rejected credentials (HTTP {resp.status_code})")
                if resp.status_code == 200:
                    data = sorted(resp.json()["data"], key=lambda item: item["index"])
                    return [item["embedding"] for item in data]
                last_error = ProviderUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if attempt < self.max_retries - 1:
                time.sleep(self.backoff_seconds * (2**attempt))
        raise ProviderUnavailable(f"embedding request failed after {self.max_retries} attempts: {last_error}")


def _model_slug(model_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", model_id)


class EmbeddingCache:
    """On-disk vector store, one JSON file per (model, text-hash) key.

    Reads are lock-free; writes are serialized and atomic (tmp + rename).
    Re-writing a key is harmless because values are deterministic per key.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._write_lock = threading.Lock()

    def _path(self, model_id: str, digest: str) -> Path:
        return self.root / _model_slug(model_id) / f"{digest}.json"

    def get(self, model_id: str, text: str) -> EmbeddingVector | None:
        path = self._path(model_id, text_hash(text))
        if not path.exists():
            return None
        obj = json.loads(path.read_text(encoding="utf-8"))
        return EmbeddingVector(values=tuple(obj["values"]), model_id=obj["model_id"])

    def put(self, model_id: str, text: str, values: Iterable[float]) -> EmbeddingVector:
        vec = EmbeddingVector(values=tuple(float(v) for v in values), model_id=model_id)
        digest = text_hash(text)
        path = self._path(model_id, digest)
        payload = json.dumps(
            {"model_id": model_id, "text_hash": digest, "values": list(vec.values)}
        )
        with self._write_lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(payload, encoding="utf-8")
            tmp.replace(path)
        return vec


def embed_text(
    text: str,
    model_id: str,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> EmbeddingVector:
    """Embed one text, serving from cache when possible."""
    if not text.strip():
        raise EmptyText("cannot embed an empty or whitespace-only string")
    if cache is not None:
        hit = cache.get(model_id, text)
        if hit is not None:
            return hit
    values = provider.embed_batch([text], model_id)[0]
    if cache is not None:
        return cache.put(model_id, text, values)
    return EmbeddingVector(values=tuple(float(v) for v in values), model_id=model_id)


def embed_corpus(
    corpus: Corpus,
    model_id: str,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
    max_workers: int = 4,
) -> dict[str, EmbeddingVector]:
    """Embed every case text; uncached texts go to the provider concurrently."""
    from concurrent.futures import ThreadPoolExecutor

    vectors: dict[str, EmbeddingVector] = {}
    pending: list[tuple[str, str]] = []
    for case in corpus:
        hit = cache.get(model_id, case.text) if cache is not None else None
        if hit is not None:
            vectors[case.id] = hit
        else:
            pending.append((case.id, case.text))

    if pending:
        def work(item: tuple[str, str]) -> tuple[str, EmbeddingVector]:
            case_id, text = item
            return case_id, embed_text(text, model_id, provider, cache)

        with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
            for case_id, vec in pool.map(work, pending):
                vectors[case_id] = vec
    return vectors


def check_uniform_dim(vectors: Mapping[str, EmbeddingVector]) -> int:
    """Assert all vectors share one dimension; returns it."""
    dims = {v.dim for v in vectors.values()}
    if len(dims) > 1:
        raise DimensionMismatch(f"vectors carry mixed dimensions: {sorted(dims)}")
    return dims.pop() if dims else 0
