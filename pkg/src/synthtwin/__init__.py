"""Event causality identification with synthetic-control twins.

Given a temporally ordered event sequence and a candidate (treatment,
outcome) pair, this package retrieves donor event sequences from a corpus,
fits ridge-regression weights that reconstruct the study unit's pretreatment
in embedding space, combines the donors' outcome embeddings into a synthetic
counterfactual outcome, inverts it back to text, and judges whether the
observed outcome still occurs without the treatment.
"""

from .corpus import (
    CorpusHandle,
    Document,
    EventSequence,
    MockTextTransform,
    anonymize,
    augment_context,
    ingest_corpus,
    preprocess_corpus,
    summarize,
)
from .embedding import EmbeddingCache, EmbeddingVector, HashEmbeddingProvider, cosine, embed
from .evaluation import CopesSample, MetricsReport, compute_metrics, load_copes, run_benchmark
from .inversion import RegistryInversionProvider, invert
from .judging import JudgeResponse, MockJudge, judge_similarity
from .pipeline import (
    CausalVerdict,
    ControlUnit,
    PipelineConfig,
    Providers,
    StudyUnit,
    VerdictLabel,
    decide_causality,
    filter_controls,
    segment_control,
    segment_study_unit,
)
from .retrieval import Index, bm25_score, build_index, search, tokenize
from .synthesis import DonorWeights, combine_outcomes, fit_weights

__version__ = "0.1.0"

__all__ = [
    "CausalVerdict",
    "ControlUnit",
    "CopesSample",
    "CorpusHandle",
    "Document",
    "DonorWeights",
    "EmbeddingCache",
    "EmbeddingVector",
    "EventSequence",
    "HashEmbeddingProvider",
    "Index",
    "JudgeResponse",
    "MetricsReport",
    "MockJudge",
    "MockTextTransform",
    "PipelineConfig",
    "Providers",
    "RegistryInversionProvider",
    "StudyUnit",
    "VerdictLabel",
    "anonymize",
    "augment_context",
    "bm25_score",
    "build_index",
    "combine_outcomes",
    "compute_metrics",
    "cosine",
    "decide_causality",
    "embed",
    "filter_controls",
    "fit_weights",
    "ingest_corpus",
    "invert",
    "judge_similarity",
    "load_copes",
    "preprocess_corpus",
    "run_benchmark",
    "search",
    "segment_control",
    "segment_study_unit",
    "summarize",
    "tokenize",
]
