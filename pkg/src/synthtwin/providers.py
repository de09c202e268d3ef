"""Live provider clients and shared retry plumbing.

Each client speaks the wire protocol of one model-service endpoint and retries
transient failures with exponential backoff before raising a ProviderError
tagged with the pipeline stage it serves.
"""

from __future__ import annotations

import logging
import time
from typing import Any, Callable, Sequence, TypeVar

import numpy as np
import requests

from .embedding import EmbeddingVector
from .judging import JudgeResponse, MalformedJudgeResponse, QUESTION_TEXTS
from .prompts import load_template, render

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
BASE_BACKOFF_SECONDS = 0.5

T = TypeVar("T")


class ProviderError(Exception):
    """A provider call failed after retries; `stage` names the pipeline stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def call_with_retries(
    fn: Callable[[], T],
    stage: str,
    attempts: int = MAX_ATTEMPTS,
    base_delay: float | None = None,
) -> T:
    """Run fn with exponential backoff on transport errors and 5xx responses."""
    if base_delay is None:
        base_delay = BASE_BACKOFF_SECONDS
    last_error: Exception | None = None
    for attempt in range(attempts):
        try:
            return fn()
        except (requests.ConnectionError, requests.Timeout, _RetryableStatus) as exc:
            last_error = exc
            if attempt + 1 < attempts:
                delay = base_delay * (2**attempt)
                logger.warning("%s attempt %d failed (%s); retrying in %.1fs", stage, attempt + 1, exc, delay)
                time.sleep(delay)
    raise ProviderError(stage, f"failed after {attempts} attempts: {last_error}")


class _RetryableStatus(Exception):
    pass


def _post_json(session: requests.Session, url: str, body: dict[str, Any], timeout: float) -> dict[str, Any]:
    response = session.post(url, json=body, timeout=timeout)
    if response.status_code >= 500:
        raise _RetryableStatus(f"{url} returned {response.status_code}")
    response.raise_for_status()
    return response.json()


class HttpEmbeddingProvider:
    """Client for POST /embed: {"model", "texts"} -> {"dim", "vectors"}."""

    def __init__(self, endpoint: str, model_id: str, timeout: float = 60.0, session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.model_id = model_id
        self.timeout = timeout
        self.session = session or requests.Session()

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        body = {"model": self.model_id, "texts": list(texts)}
        payload = call_with_retries(
            lambda: _post_json(self.session, f"{self.endpoint}/embed", body, self.timeout),
            stage="embed",
        )
        vectors = payload.get("vectors")
        if vectors is None or len(vectors) != len(texts):
            raise ProviderError("embed", f"expected {len(texts)} vectors, got {vectors and len(vectors)}")
        dim = int(payload["dim"])
        out = []
        for vec in vectors:
            if len(vec) != dim:
                raise ProviderError("embed", f"vector length {len(vec)} != advertised dim {dim}")
            out.append(EmbeddingVector(np.asarray(vec, dtype=np.float64), self.model_id))
        return out


class HttpInversionProvider:
    """Client for POST /invert: {"vector", "steps", "beam_width"} -> {"text"}."""

    def __init__(self, endpoint: str, timeout: float = 300.0, session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def invert(self, vector: EmbeddingVector, steps: int, beam_width: int) -> str:
        body = {"vector": vector.values.tolist(), "steps": steps, "beam_width": beam_width}
        payload = call_with_retries(
            lambda: _post_json(self.session, f"{self.endpoint}/invert", body, self.timeout),
            stage="invert",
        )
        text = payload.get("text")
        if not isinstance(text, str) or not text:
            raise ProviderError("invert", f"missing inverted text in response: {payload!r}")
        return text


class HttpJudgeProvider:
    """Client for POST /judge: {"event_a", "event_b", "question"} -> {"is_similar", "reasoning"}.

    The counterfactual baseline rides the same endpoint with a fully rendered
    prompt in the optional "prompt" field.
    """

    def __init__(self, endpoint: str, timeout: float = 60.0, session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def _post_judge(self, body: dict[str, Any], question_id: str) -> JudgeResponse:
        def once() -> dict[str, Any]:
            response = self.session.post(f"{self.endpoint}/judge", json=body, timeout=self.timeout)
            if response.status_code >= 500:
                raise _RetryableStatus(f"judge returned {response.status_code}")
            if response.status_code == 422:
                raise MalformedJudgeResponse(response.text)
            response.raise_for_status()
            return response.json()

        payload = call_with_retries(once, stage="judge")
        if "is_similar" not in payload or "reasoning" not in payload:
            raise MalformedJudgeResponse(f"judge response missing keys: {payload!r}")
        return JudgeResponse(
            is_similar=bool(payload["is_similar"]),
            reasoning=str(payload["reasoning"]),
            question_id=question_id,
        )

    def ask(self, event_a: str, event_b: str, question_id: str) -> JudgeResponse:
        question = QUESTION_TEXTS[question_id]
        body = {"event_a": event_a, "event_b": event_b, "question": question}
        return self._post_judge(body, question_id)

    def ask_counterfactual(self, events: list[str], treatment_idx: int) -> JudgeResponse:
        prompt = render(
            load_template("counterfactual"),
            {
                "story": " ".join(events),
                "i": str(treatment_idx),
                "event 1": events[treatment_idx - 1],
                "event 2": events[-1],
            },
        )
        body = {
            "event_a": events[treatment_idx - 1],
            "event_b": events[-1],
            "question": "counterfactual",
            "prompt": prompt,
        }
        return self._post_judge(body, "counterfactual")


class HttpTextTransformProvider:
    """Client for POST /transform: {"op", "text"} -> {"result"}."""

    deterministic = False

    def __init__(self, endpoint: str, timeout: float = 120.0, session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def _transform(self, op: str, text: str) -> Any:
        body = {"op": op, "text": text}
        payload = call_with_retries(
            lambda: _post_json(self.session, f"{self.endpoint}/transform", body, self.timeout),
            stage=op,
        )
        if "result" not in payload:
            raise ProviderError(op, f"missing result in response: {payload!r}")
        return payload["result"]

    def anonymize(self, text: str) -> str:
        return str(self._transform("anonymize", text))

    def summarize(self, text: str) -> list[str]:
        result = self._transform("summarize", text)
        if not isinstance(result, list):
            raise ProviderError("summarize", f"expected a list of events, got {type(result).__name__}")
        return [str(e) for e in result]

    def augment(self, treatment: str) -> list[str]:
        result = self._transform("augment", treatment)
        if not isinstance(result, list):
            raise ProviderError("augment", f"expected a list of events, got {type(result).__name__}")
        return [str(e) for e in result]
