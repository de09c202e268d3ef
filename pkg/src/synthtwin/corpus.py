"""Document ingestion and text preprocessing.

Raw documents are anonymized (person names to generic role terms) and then
summarized into short event sequences, via a pluggable transform provider.
Both steps are applied identically to study units and retrieved documents.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Protocol, Sequence

logger = logging.getLogger(__name__)

MAX_SUMMARY_EVENTS = 5
MOCK_TRUNCATE_WORDS = 14

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_ARTICLES = ("a", "an", "the")

#: Name-to-role substitutions used by the deterministic transform provider.
DEFAULT_NAME_ROLES: dict[str, str] = {
    "Mary": "a girl",
    "Denise": "a girl",
    "Sara": "a girl",
    "Timmy": "a boy",
    "Tim": "a boy",
    "Tom": "a boy",
    "Buddy": "a dog",
}


@dataclass(frozen=True)
class EventSequence:
    """Ordered short event texts extracted from one source document."""

    events: tuple[str, ...]
    source_id: str

    def __post_init__(self) -> None:
        if len(self.events) < 1:
            raise ValueError("an event sequence needs at least one event")
        if any(not e for e in self.events):
            raise ValueError("events must be non-empty strings")

    def __len__(self) -> int:
        return len(self.events)


@dataclass
class Document:
    id: str
    raw_text: str
    anonymized: str | None = None
    summary: EventSequence | None = None

    def __post_init__(self) -> None:
        if not self.raw_text:
            raise ValueError(f"document {self.id!r} has empty text")


class TextTransformProvider(Protocol):
    """Text transforms backing preprocessing; implementations must be shareable
    across concurrent calls."""

    deterministic: bool

    def anonymize(self, text: str) -> str: ...

    def summarize(self, text: str) -> list[str]: ...

    def augment(self, treatment: str) -> list[str]: ...


class MockTextTransform:
    """Deterministic transform provider for hermetic tests.

    Anonymization is word-boundary dictionary substitution, summarization is a
    sentence split capped at five events with long sentences cut to 14 words,
    and augmentation emits one templated sentence from the treatment subject.
    """

    deterministic = True

    def __init__(self, name_roles: Mapping[str, str] | None = None):
        roles = dict(DEFAULT_NAME_ROLES if name_roles is None else name_roles)
        # Longest names first so "Timmy" wins over "Tim".
        ordered = sorted(roles, key=len, reverse=True)
        self._roles = roles
        self._pattern = (
            re.compile(r"\b(" + "|".join(re.escape(n) for n in ordered) + r")\b")
            if ordered
            else None
        )

    def anonymize(self, text: str) -> str:
        if self._pattern is None:
            return text
        return self._pattern.sub(lambda m: self._roles[m.group(1)], text)

    def summarize(self, text: str) -> list[str]:
        sentences = [s.strip() for s in _SENTENCE_SPLIT_RE.split(text.strip()) if s.strip()]
        events = []
        for sentence in sentences[:MAX_SUMMARY_EVENTS]:
            words = sentence.split()
            if len(words) > MOCK_TRUNCATE_WORDS:
                sentence = " ".join(words[:MOCK_TRUNCATE_WORDS])
            events.append(sentence)
        return events

    def augment(self, treatment: str) -> list[str]:
        words = treatment.split()
        if not words:
            raise ValueError("cannot augment an empty treatment")
        if words[0].lower() in _ARTICLES and len(words) > 1:
            subject = " ".join(words[:2])
        else:
            subject = words[0]
        return [f"{subject.rstrip('.,!?')} was outside."]


class CorpusHandle:
    """Immutable-after-ingest collection of documents; safe for concurrent reads."""

    def __init__(self, documents: Sequence[Document]):
        self._docs: dict[str, Document] = {}
        for doc in documents:
            if doc.id in self._docs:
                raise ValueError(f"duplicate document id {doc.id!r}")
            self._docs[doc.id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def get(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    def documents(self) -> Iterator[Document]:
        return iter(self._docs.values())


def ingest_corpus(path: str | Path, format: str = "jsonl") -> CorpusHandle:
    """Parse a JSONL corpus of {"id": ..., "text": ...} records."""
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    path = Path(path)
    documents: list[Document] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {line_no}: {exc}") from exc
            if not isinstance(record, dict) or "id" not in record:
                raise ValueError(f"{path}: record on line {line_no} is missing 'id'")
            if "text" not in record:
                raise ValueError(f"{path}: record on line {line_no} is missing 'text'")
            documents.append(Document(id=str(record["id"]), raw_text=str(record["text"])))
    handle = CorpusHandle(documents)
    if len(handle) == 0:
        logger.warning("corpus %s is empty", path)
    else:
        logger.info("ingested %d documents from %s", len(handle), path)
    return handle


def write_corpus(corpus: CorpusHandle, path: str | Path) -> None:
    """Serialize back to the ingest format; (id, raw_text) pairs round-trip exactly."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in corpus.documents():
            fh.write(json.dumps({"id": doc.id, "text": doc.raw_text}, sort_keys=True) + "\n")


def anonymize(text: str, provider: TextTransformProvider) -> str:
    """Replace person names with generic role terms, preserving everything else."""
    if not text:
        raise ValueError("cannot anonymize empty text")
    return provider.anonymize(text)


def summarize(text: str, provider: TextTransformProvider, source_id: str = "") -> EventSequence:
    """Summarize a document into at most five chronological events.

    A provider returning more than five events is truncated to the first five;
    event wording is kept as the provider produced it.
    """
    if not text:
        raise ValueError("cannot summarize empty text")
    events = provider.summarize(text)
    if len(events) > MAX_SUMMARY_EVENTS:
        logger.warning(
            "summary for %s had %d events; truncating to %d",
            source_id or "<unknown>",
            len(events),
            MAX_SUMMARY_EVENTS,
        )
        events = events[:MAX_SUMMARY_EVENTS]
    return EventSequence(events=tuple(events), source_id=source_id)


def augment_context(
    treatment: str,
    provider: TextTransformProvider,
    existing_pretreatment: Sequence[str] = (),
) -> EventSequence:
    """Generate a plausible pretreatment context for a treatment with no prior events."""
    if existing_pretreatment:
        raise ValueError(
            "augment_context called although pretreatment events already exist; "
            "augmentation only applies when the treatment is the first event"
        )
    if not treatment:
        raise ValueError("cannot augment an empty treatment")
    events = provider.augment(treatment)
    if not events:
        raise ValueError("augmentation provider returned no context events")
    return EventSequence(events=tuple(events), source_id="augmented")


def preprocess_document(doc: Document, provider: TextTransformProvider) -> Document:
    doc.anonymized = anonymize(doc.raw_text, provider)
    doc.summary = summarize(doc.anonymized, provider, source_id=doc.id)
    return doc


def preprocess_corpus(
    corpus: CorpusHandle,
    provider: TextTransformProvider,
    cache_path: str | Path | None = None,
    max_workers: int = 1,
) -> CorpusHandle:
    """Fill anonymized text and summaries for every document.

    When `cache_path` exists it is loaded instead of recomputing; otherwise the
    preprocessed records are computed (optionally in parallel) and written out.
    """
    if cache_path is not None:
        cache_path = Path(cache_path)
        if cache_path.exists():
            _load_preprocessed(corpus, cache_path)
            return corpus

    docs = list(corpus.documents())
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(lambda d: preprocess_document(d, provider), docs))
    else:
        for doc in docs:
            preprocess_document(doc, provider)

    if cache_path is not None:
        with cache_path.open("w", encoding="utf-8") as fh:
            for doc in docs:
                record = {
                    "id": doc.id,
                    "anonymized": doc.anonymized,
                    "events": list(doc.summary.events) if doc.summary else [],
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        logger.info("wrote preprocessed cache for %d documents to %s", len(docs), cache_path)
    return corpus


def _load_preprocessed(corpus: CorpusHandle, cache_path: Path) -> None:
    loaded = 0
    with cache_path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            doc_id = record["id"]
            if doc_id not in corpus:
                logger.warning("preprocessed record for unknown document %r (line %d)", doc_id, line_no)
                continue
            doc = corpus.get(doc_id)
            doc.anonymized = record["anonymized"]
            events = record.get("events") or []
            doc.summary = EventSequence(tuple(events), source_id=doc_id) if events else None
            loaded += 1
    logger.info("loaded preprocessed cache for %d documents from %s", loaded, cache_path)
