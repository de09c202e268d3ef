import pytest

from synthtwin.corpus import CorpusHandle, Document, MockTextTransform, preprocess_corpus
from synthtwin.pipeline import Providers
from synthtwin.retrieval import build_index


@pytest.fixture
def providers() -> Providers:
    return Providers.mock()


@pytest.fixture
def transform() -> MockTextTransform:
    return MockTextTransform()


def make_corpus(docs: list[tuple[str, str]], transform=None) -> CorpusHandle:
    """Build and preprocess an in-memory corpus from (id, text) pairs."""
    handle = CorpusHandle([Document(id=doc_id, raw_text=text) for doc_id, text in docs])
    preprocess_corpus(handle, transform or MockTextTransform())
    return handle


def make_indexed_corpus(docs: list[tuple[str, str]]):
    corpus = make_corpus(docs)
    return corpus, build_index(corpus, field_name="anonymized")
