"""Embedding-to-text inversion behind a pluggable provider.

The live backend reconstructs text from a vector iteratively; the registry
provider is its deterministic stand-in: it returns the registered text whose
embedding is closest in cosine to the query, which is all the downstream
judge needs. In pipeline use the registry holds the kept donors' outcome
texts and embeddings.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from .embedding import EmbeddingVector


class InversionProvider(Protocol):
    def invert(self, vector: EmbeddingVector, steps: int, beam_width: int) -> str: ...


class RegistryInversionProvider:
    """Nearest-registry-text inversion; scale-invariant and total over
    non-zero vectors once the registry is non-empty. Ties break by registry
    order. steps and beam_width are accepted for interface parity and ignored.
    """

    def __init__(self, registry: Sequence[tuple[str, EmbeddingVector]] = ()):
        self.registry: list[tuple[str, EmbeddingVector]] = list(registry)

    def prime(self, registry: Sequence[tuple[str, EmbeddingVector]]) -> None:
        """Replace the registry; the pipeline primes it with kept donor outcomes."""
        self.registry = list(registry)

    def invert(self, vector: EmbeddingVector, steps: int, beam_width: int) -> str:
        if not self.registry:
            raise ValueError("inversion registry is empty")
        query = np.asarray(vector.values)
        query_norm = float(np.linalg.norm(query))
        if query_norm == 0.0:
            raise ValueError("cannot invert a zero vector")
        best_text = None
        best_cos = -np.inf
        for text, candidate in self.registry:
            if candidate.dim != vector.dim:
                raise ValueError(f"registry dim {candidate.dim} != query dim {vector.dim}")
            denom = query_norm * float(np.linalg.norm(candidate.values))
            cos = float(np.dot(query, candidate.values)) / denom
            if cos > best_cos:
                best_cos = cos
                best_text = text
        assert best_text is not None
        return best_text


def invert(provider: InversionProvider, o_synthetic: EmbeddingVector, steps: int, beam_width: int) -> str:
    """Invert a synthetic outcome embedding to text."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    return provider.invert(o_synthetic, steps, beam_width)
