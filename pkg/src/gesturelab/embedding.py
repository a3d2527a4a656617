"""Embedding providers, a persisted embedding cache, and an exact cosine KNN index.

The stub embedder is fully deterministic (character-trigram counts hashed with
FNV-1a into 256 buckets, L2-normalized) so every test that depends on
embeddings has a computable oracle. Real providers speak a small HTTP wire
contract and are selected by configuration.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .script import normalize_text
from .textmetrics import cosine_similarity

log = logging.getLogger(__name__)

STUB_DIMS = 256
STUB_MODEL_TAG = "stub-trigram-256"


class EmbeddingError(Exception):
    """Provider transport failure; retriable."""


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    provider_id: str
    model: str
    degenerate: bool = False

    @property
    def dims(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class EmbeddingProvider(Protocol):
    provider_id: str
    model: str

    def embed_batch(self, texts: list[str]) -> list[list[float]]: ...


def _fnv1a32(data: bytes) -> int:
    h = 0x811C9DC5
    for byte in data:
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def stub_embed(text: str) -> EmbeddingVector:
    """Deterministic 256-dim trigram-count embedding of the normalized text.

    The normalized text is padded with '^' and '$'; each character trigram
    increments bucket FNV-1a-32(trigram) mod 256; the counts are
    L2-normalized. Text that normalizes to empty yields the all-zeros vector
    flagged degenerate.
    """
    norm = normalize_text(text)
    counts = np.zeros(STUB_DIMS, dtype=float)
    if not norm:
        return EmbeddingVector(
            values=tuple(counts.tolist()),
            provider_id="stub",
            model=STUB_MODEL_TAG,
            degenerate=True,
        )
    padded = "^" + norm + "$"
    for i in range(len(padded) - 2):
        trigram = padded[i : i + 3]
        counts[_fnv1a32(trigram.encode("utf-8")) % STUB_DIMS] += 1.0
    counts /= np.linalg.norm(counts)
    return EmbeddingVector(
        values=tuple(counts.tolist()), provider_id="stub", model=STUB_MODEL_TAG
    )


class StubEmbeddingProvider:
    """Provider wrapper around stub_embed, for uniform plumbing."""

    provider_id = "stub"
    model = STUB_MODEL_TAG

    def embed_batch(self, texts: list[str]) -> list[list[float]]:
        return [list(stub_embed(t).values) for t in texts]


class HttpEmbeddingProvider:
    """POST {"texts": [...]} -> {"vectors": [[...]...], "model": "..."}."""

    def __init__(self, endpoint: str, model: str = "remote", timeout: float = 30.0):
        self.endpoint = endpoint
        self.model = model
        self.provider_id = f"http:{endpoint}"
        self.timeout = timeout

    def embed_batch(self, texts: list[str]) -> list[list[float]]:
        import httpx

        try:
            resp = httpx.post(self.endpoint, json={"texts": texts}, timeout=self.timeout)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise EmbeddingError(f"embedding request failed: {exc}") from exc
        payload = resp.json()
        self.model = payload.get("model", self.model)
        return payload["vectors"]


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class EmbeddingCache:
    """JSONL sidecar cache keyed by (content hash, model tag).

    One record per line: {"hash": <hex>, "model": <string>, "vector": [...]}.
    Reads are lock-free after load; writes are serialized and appended.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._store: dict[tuple[str, str], list[float]] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with self.path.open() as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    self._store[(rec["hash"], rec["model"])] = rec["vector"]

    def get(self, key_hash: str, model: str) -> list[float] | None:
        return self._store.get((key_hash, model))

    def put(self, key_hash: str, model: str, vector: list[float]) -> None:
        with self._lock:
            if (key_hash, model) in self._store:
                return
            self._store[(key_hash, model)] = vector
            if self.path is not None:
                with self.path.open("a") as fh:
                    fh.write(
                        json.dumps({"hash": key_hash, "model": model, "vector": vector})
                        + "\n"
                    )


class CountingProvider:
    """Wraps a provider and counts real embed calls; used to assert cache hits."""

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self.provider_id = inner.provider_id
        self.model = inner.model
        self.calls = 0

    def embed_batch(self, texts: list[str]) -> list[list[float]]:
        self.calls += 1
        return self.inner.embed_batch(texts)


def embed(
    provider: EmbeddingProvider, text: str, cache: EmbeddingCache | None = None
) -> EmbeddingVector:
    """Embed one text through the provider, consulting the cache first."""
    norm = normalize_text(text)
    if not norm:
        raise ValueError("cannot embed text that normalizes to empty")
    h = text_hash(text)
    if cache is not None:
        hit = cache.get(h, provider.model)
        if hit is not None:
            return EmbeddingVector(
                values=tuple(hit), provider_id=provider.provider_id, model=provider.model
            )
    vec = provider.embed_batch([text])[0]
    if cache is not None:
        cache.put(h, provider.model, list(vec))
    return EmbeddingVector(
        values=tuple(vec), provider_id=provider.provider_id, model=provider.model
    )


@dataclass
class VectorIndex:
    """Exact brute-force cosine KNN over a small set of entries."""

    dimension: int
    entries: list[tuple[str, np.ndarray]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, entry_id: str, vector) -> None:
        v = np.asarray(vector, dtype=float)
        if v.shape != (self.dimension,):
            raise ValueError(
                f"vector dimension {v.shape} != index dimension {self.dimension}"
            )
        if any(eid == entry_id for eid, _ in self.entries):
            raise ValueError(f"duplicate entry_id {entry_id!r}")
        self.entries.append((entry_id, v))

    def knn(self, query, k: int) -> list[tuple[str, float]]:
        """Top-k entries by cosine score, descending; ties by ascending id.

        k larger than the index returns everything ranked. Exact search: the
        corpus is a few hundred entries, so a scan beats any ANN structure.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self.entries:
            raise ValueError("knn over empty index")
        q = np.asarray(query, dtype=float)
        if q.shape != (self.dimension,):
            raise ValueError(
                f"query dimension {q.shape} != index dimension {self.dimension}"
            )
        scored = [
            (eid, cosine_similarity(q, vec)) for eid, vec in self.entries
        ]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored[:k]


def build_provider(spec: str) -> EmbeddingProvider:
    """Provider from a config string: 'stub' or 'http:<endpoint>[#model]'."""
    if spec == "stub":
        return StubEmbeddingProvider()
    if spec.startswith("http:") or spec.startswith("https:"):
        endpoint, _, model = spec.partition("#")
        return HttpEmbeddingProvider(endpoint, model=model or "remote")
    raise ValueError(f"unknown embedding provider spec: {spec!r}")
