"""Okapi BM25 ranked retrieval over an in-memory inverted index.

The index stores integer term frequencies and document lengths only, so a
saved index reloads to bit-identical scores.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .corpus import CorpusHandle

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

INDEX_FORMAT_VERSION = 1

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs. No stemming, no stopwords."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Index:
    """Inverted index plus the corpus statistics BM25 needs.

    Postings lists are kept sorted by doc id so serialization is canonical.
    """

    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    field_name: str = "anonymized"

    n_docs: int = field(init=False)
    avg_doc_length: float = field(init=False)

    def __post_init__(self) -> None:
        self.n_docs = len(self.doc_lengths)
        total = sum(self.doc_lengths.values())
        self.avg_doc_length = total / self.n_docs if self.n_docs else 0.0

    def idf(self, term: str) -> float:
        # The +1 inside the log keeps idf strictly positive even for terms
        # appearing in more than half the corpus.
        df = len(self.postings.get(term, ()))
        return math.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)

    def term_frequency(self, term: str, doc_id: str) -> int:
        for posting_doc, tf in self.postings.get(term, ()):
            if posting_doc == doc_id:
                return tf
        return 0


def build_index(corpus: "CorpusHandle", field_name: str = "anonymized") -> Index:
    """Index one text field of every document in the corpus.

    `field_name` is either "raw" or "anonymized"; the latter requires the
    corpus to have been preprocessed first.
    """
    if field_name not in ("raw", "anonymized"):
        raise ValueError(f"unknown index field {field_name!r}; use 'raw' or 'anonymized'")
    if len(corpus) == 0:
        raise ValueError("cannot build an index over an empty corpus")

    postings: dict[str, dict[str, int]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in corpus.documents():
        if field_name == "raw":
            text = doc.raw_text
        else:
            if doc.anonymized is None:
                raise ValueError(
                    f"document {doc.id!r} has no anonymized text; preprocess the corpus "
                    "before indexing the anonymized field"
                )
            text = doc.anonymized
        tokens = tokenize(text)
        doc_lengths[doc.id] = len(tokens)
        for token in tokens:
            postings.setdefault(token, {}).setdefault(doc.id, 0)
            postings[token][doc.id] += 1

    sorted_postings = {
        term: sorted(per_doc.items()) for term, per_doc in postings.items()
    }
    return Index(postings=sorted_postings, doc_lengths=doc_lengths, field_name=field_name)


def bm25_score(index: Index, query_terms: list[str], doc_id: str) -> float:
    """Okapi BM25 score of one document for a tokenized query.

    Terms absent from the document contribute zero; an empty query scores zero.
    """
    if doc_id not in index.doc_lengths:
        raise KeyError(f"document {doc_id!r} is not in the index")
    dl = index.doc_lengths[doc_id]
    norm = index.k1 * (1.0 - index.b + index.b * dl / index.avg_doc_length)
    score = 0.0
    for term in query_terms:
        tf = index.term_frequency(term, doc_id)
        if tf == 0:
            continue
        score += index.idf(term) * tf * (index.k1 + 1.0) / (tf + norm)
    return score


def search(index: Index, query: str, n: int) -> list[tuple[str, float]]:
    """Top-n documents by BM25 score, descending.

    Zero-score documents are excluded; ties break by ascending doc id.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    query_terms = tokenize(query)
    candidates: set[str] = set()
    for term in query_terms:
        candidates.update(doc_id for doc_id, _ in index.postings.get(term, ()))
    scored = [(doc_id, bm25_score(index, query_terms, doc_id)) for doc_id in candidates]
    scored = [(doc_id, s) for doc_id, s in scored if s > 0.0]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:n]


def save_index(index: Index, path: str | Path) -> None:
    """Persist the index as versioned JSON; integer statistics reload exactly."""
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "k1": index.k1,
        "b": index.b,
        "field": index.field_name,
        "doc_lengths": index.doc_lengths,
        "postings": {term: [[d, tf] for d, tf in docs] for term, docs in index.postings.items()},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_index(path: str | Path) -> Index:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != INDEX_FORMAT_VERSION:
        raise ValueError(f"unsupported index format version {version!r}")
    postings = {
        term: [(doc_id, int(tf)) for doc_id, tf in docs]
        for term, docs in payload["postings"].items()
    }
    return Index(
        postings=postings,
        doc_lengths={d: int(l) for d, l in payload["doc_lengths"].items()},
        k1=float(payload["k1"]),
        b=float(payload["b"]),
        field_name=payload.get("field", "anonymized"),
    )
