"""Service configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class ServiceConfig:
    """Backend selection and model identities.

    The advertised embedding dim must match what the embedding backend really
    produces; /health reports it and /embed responses carry it. Decoding is
    greedy with temperature pinned to zero, so identical requests yield
    identical responses.
    """

    host: str = "127.0.0.1"
    port: int = 8080
    backend: str = "deterministic"  # or "cassette"
    embedding_model_id: str = "hash-sum-v1"
    embedding_dim: int = 256
    inversion_model_id: str = "registry-nearest-v1"
    judge_model_id: str = "token-overlap-v1"
    temperature: float = 0.0
    cassette_path: str | None = None
    record_path: str | None = None
    bearer_token: str | None = None

    def __post_init__(self) -> None:
        if self.temperature != 0.0:
            raise ValueError("temperature is pinned to 0 for deterministic serving")
        if self.backend not in ("deterministic", "cassette"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "cassette" and not self.cassette_path:
            raise ValueError("cassette backend needs cassette_path")
