"""Model backends.

The deterministic backend is the service's reference implementation: hashed
token embeddings, a token-overlap judge, dictionary anonymization, sentence
splitting, and vocabulary-nearest inversion. Everything is a pure function of
the request, which is what makes recorded-response testing meaningful.

Real model backends plug in behind the same Backend protocol; this module
deliberately contains no network or GPU code.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol

import numpy as np

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")

MAX_SUMMARY_EVENTS = 5
SUMMARY_WORD_CAP = 14
JUDGE_OVERLAP_THRESHOLD = 0.6

ANONYMIZE_ROLES = {
    "Mary": "a girl",
    "Denise": "a girl",
    "Sara": "a girl",
    "Timmy": "a boy",
    "Tim": "a boy",
    "Tom": "a boy",
    "Buddy": "a dog",
}

JUDGE_STOPWORDS = frozenset(
    """
    a an the and or but if then so to of in on at by for with from as into
    is are was were be been being he she it they them him his her its their
    this that these those i you we me my your our us
    not no now up down out over under had has have do does did will would
    can could there here when while who whom what which
    """.split()
)

#: Small vocabulary the inversion backend composes hypotheses from.
INVERSION_VOCABULARY = (
    "girl boy dog cat family children friends neighbor storm wave sun rain "
    "garden house field sea castle fence water plants morning day night "
    "walked played built washed watered rebuilt felt happy sad warm quiet "
    "small big new broken"
).split()


class JudgeOutputUnparseable(Exception):
    """The judge model produced output that could not be parsed."""


class Backend(Protocol):
    def embed(self, model: str, texts: list[str]) -> tuple[int, list[list[float]]]: ...

    def invert(self, vector: list[float], steps: int, beam_width: int) -> str: ...

    def judge(self, event_a: str, event_b: str, question: str, prompt: str | None) -> dict: ...

    def transform(self, op: str, text: str) -> str | list[str]: ...


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class DeterministicBackend:
    def __init__(self, model_id: str = "hash-sum-v1", dim: int = 256):
        self.model_id = model_id
        self.dim = dim
        ordered_names = sorted(ANONYMIZE_ROLES, key=len, reverse=True)
        self._name_pattern = re.compile(
            r"\b(" + "|".join(re.escape(n) for n in ordered_names) + r")\b"
        )

    # -- embedding ---------------------------------------------------------

    def _token_vector(self, token: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "big")
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def _embed_one(self, text: str) -> list[float]:
        tokens = _tokenize(text)
        if not tokens:
            raise ValueError(f"text has no tokens to embed: {text!r}")
        total = np.zeros(self.dim)
        for token in tokens:
            total += self._token_vector(token)
        norm = np.linalg.norm(total)
        if norm == 0.0:
            raise ValueError("token vectors cancelled to a zero embedding")
        return (total / norm).tolist()

    def embed(self, model: str, texts: list[str]) -> tuple[int, list[list[float]]]:
        if model != self.model_id:
            raise ValueError(f"unknown embedding model {model!r}; serving {self.model_id!r}")
        return self.dim, [self._embed_one(t) for t in texts]

    # -- inversion ---------------------------------------------------------

    def invert(self, vector: list[float], steps: int, beam_width: int) -> str:
        arr = np.asarray(vector, dtype=np.float64)
        if arr.shape[0] != self.dim:
            raise ValueError(f"vector dim {arr.shape[0]} != model dim {self.dim}")
        norm = np.linalg.norm(arr)
        if norm == 0.0:
            raise ValueError("cannot invert a zero vector")
        # Greedy hypothesis: the beam_width vocabulary tokens most aligned
        # with the target vector, most similar first. steps is accepted for
        # protocol parity; one pass is already exact for this backend.
        scored = []
        for token in INVERSION_VOCABULARY:
            tv = self._token_vector(token)
            scored.append((float(np.dot(arr, tv) / norm), token))
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        chosen = [token for _, token in scored[: max(1, beam_width)]]
        return "the " + " ".join(chosen) + "."

    # -- judging -----------------------------------------------------------

    def _content_tokens(self, text: str) -> set[str]:
        return {t for t in _tokenize(text) if t not in JUDGE_STOPWORDS}

    def _overlap_ratio(self, event_a: str, event_b: str) -> float:
        b_tokens = self._content_tokens(event_b)
        if not b_tokens:
            return 1.0 if _tokenize(event_a) == _tokenize(event_b) else 0.0
        return len(b_tokens & self._content_tokens(event_a)) / len(b_tokens)

    def judge(self, event_a: str, event_b: str, question: str, prompt: str | None) -> dict:
        ratio = self._overlap_ratio(event_a, event_b)
        similar = ratio >= JUDGE_OVERLAP_THRESHOLD
        return {
            "is_similar": similar,
            "reasoning": (
                f"content-token overlap {ratio:.2f} "
                f"{'meets' if similar else 'is below'} {JUDGE_OVERLAP_THRESHOLD}"
            ),
        }

    # -- transforms --------------------------------------------------------

    def transform(self, op: str, text: str) -> str | list[str]:
        if op == "anonymize":
            return self._name_pattern.sub(lambda m: ANONYMIZE_ROLES[m.group(1)], text)
        if op == "summarize":
            sentences = [s.strip() for s in _SENTENCE_SPLIT_RE.split(text.strip()) if s.strip()]
            events = []
            for sentence in sentences[:MAX_SUMMARY_EVENTS]:
                words = sentence.split()
                if len(words) > SUMMARY_WORD_CAP:
                    sentence = " ".join(words[:SUMMARY_WORD_CAP])
                events.append(sentence)
            return events
        if op == "augment":
            words = text.split()
            if not words:
                raise ValueError("cannot augment empty text")
            if words[0].lower() in ("a", "an", "the") and len(words) > 1:
                subject = " ".join(words[:2])
            else:
                subject = words[0]
            return [f"{subject.rstrip('.,!?')} was outside."]
        raise ValueError(f"unknown transform op {op!r}")
