"""Text embeddings behind a pluggable provider, with a persistent cache.

The hash-based provider gives deterministic, unit-norm vectors without any
model service: each token gets a pseudo-random unit vector seeded by a stable
hash, and a text embeds to the normalized sum of its token vectors. Texts
sharing most tokens therefore land close in cosine similarity.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .retrieval import tokenize

DEFAULT_MOCK_DIM = 256
MOCK_MODEL_ID = "hash-sum-v1"


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A fixed-length real vector tagged with the model that produced it."""

    values: np.ndarray
    model_id: str

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("embedding values must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


class EmbeddingProvider(Protocol):
    model_id: str

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        """One vector per text, order-preserving."""
        ...


class HashEmbeddingProvider:
    """Deterministic embedding provider for hermetic runs and tests.

    `calls` counts provider invocations so cache behavior is observable.
    """

    def __init__(self, dim: int = DEFAULT_MOCK_DIM, model_id: str = MOCK_MODEL_ID):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim
        self.model_id = model_id
        self.calls = 0

    def token_vector(self, token: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "big")
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def embed_one(self, text: str) -> EmbeddingVector:
        tokens = tokenize(text)
        if not tokens:
            raise ValueError(f"text has no tokens to embed: {text!r}")
        total = np.zeros(self.dim)
        for token in tokens:
            total += self.token_vector(token)
        norm = np.linalg.norm(total)
        if norm == 0.0:
            raise ValueError("token vectors cancelled to a zero embedding")
        return EmbeddingVector(total / norm, self.model_id)

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        self.calls += 1
        return [self.embed_one(t) for t in texts]


class EmbeddingCache:
    """Append-only embedding store keyed by (model_id, exact text).

    Records carry a content hash and text length alongside the full text, so
    hash collisions resolve by comparing the stored text. Passing path=None
    gives a memory-only cache. Reads are lock-free on the in-memory dict;
    writes are serialized.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[tuple[str, str], np.ndarray] = {}
        self._dims: dict[str, int] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                vector = np.asarray(record["vector"], dtype=np.float64)
                self._remember(record["model"], record["text"], vector)

    def _remember(self, model_id: str, text: str, vector: np.ndarray) -> None:
        known_dim = self._dims.get(model_id)
        if known_dim is not None and known_dim != vector.shape[0]:
            raise ValueError(
                f"cached dim {known_dim} != new dim {vector.shape[0]} for model "
                f"{model_id!r}; the embedding model changed, use a fresh cache"
            )
        self._dims[model_id] = int(vector.shape[0])
        self._entries[(model_id, text)] = vector

    def get(self, model_id: str, text: str) -> np.ndarray | None:
        return self._entries.get((model_id, text))

    def put(self, model_id: str, text: str, vector: np.ndarray) -> None:
        with self._lock:
            self._remember(model_id, text, vector)
            if self.path is not None:
                record = {
                    "model": model_id,
                    "hash": hashlib.sha256(text.encode("utf-8")).hexdigest(),
                    "len": len(text),
                    "text": text,
                    "vector": vector.tolist(),
                }
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


def embed(
    provider: EmbeddingProvider,
    cache: EmbeddingCache,
    texts: Sequence[str],
) -> list[EmbeddingVector]:
    """Embed texts, consulting the cache first; misses go to the provider in one batch."""
    for text in texts:
        if not isinstance(text, str) or not text:
            raise ValueError("texts must be non-empty strings")

    results: dict[str, EmbeddingVector] = {}
    misses: list[str] = []
    for text in texts:
        cached = cache.get(provider.model_id, text)
        if cached is not None:
            results[text] = EmbeddingVector(cached, provider.model_id)
        elif text not in misses:
            misses.append(text)

    if misses:
        fresh = provider.embed(misses)
        if len(fresh) != len(misses):
            raise ValueError(
                f"provider returned {len(fresh)} vectors for {len(misses)} texts"
            )
        for text, vector in zip(misses, fresh):
            cache.put(provider.model_id, text, np.asarray(vector.values))
            results[text] = vector

    dims = {v.dim for v in results.values()}
    if len(dims) > 1:
        raise ValueError(f"mixed embedding dims in one batch: {sorted(dims)}")
    return [results[text] for text in texts]


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1]. Zero vectors are rejected."""
    if a.dim != b.dim:
        raise ValueError(f"dim mismatch: {a.dim} vs {b.dim}")
    norm_a = float(np.linalg.norm(a.values))
    norm_b = float(np.linalg.norm(b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine is undefined for zero vectors")
    value = float(np.dot(a.values, b.values)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


def join_segments(events: Iterable[str]) -> str:
    """Canonical join used whenever an event sequence embeds as one segment."""
    return ". ".join(events)
