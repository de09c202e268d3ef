"""Acceptance suite: one test per release criterion, at pinned tolerances.

Each test prints a PASS line on success (visible with `pytest -s`); a pytest
failure is the FAIL line. Tolerances here are contractual, do not loosen.
"""

import json
import time

import numpy as np
import pytest

from synthtwin.cli import main
from synthtwin.corpus import EventSequence
from synthtwin.embedding import EmbeddingVector
from synthtwin.evaluation import compute_metrics, f1_from_precision_recall, run_benchmark
from synthtwin.pipeline import (
    PipelineConfig,
    Providers,
    VerdictLabel,
    decide_causality,
    segment_study_unit,
)
from synthtwin.retrieval import build_index, bm25_score, search, tokenize
from synthtwin.synthesis import fit_weights
from synthtwin.evaluation import CopesSample

from conftest import make_corpus
from oracles import bm25_oracle, bm25_rank_oracle, ridge_oracle
from scenarios import (
    CORPUS_CAUSAL,
    CORPUS_INDETERMINATE,
    CORPUS_NOT_CAUSAL,
    STUDY_CAUSAL,
    STUDY_CAUSAL_LABELS,
    STUDY_INDETERMINATE,
    STUDY_INDETERMINATE_LABELS,
    STUDY_NOT_CAUSAL,
    STUDY_NOT_CAUSAL_LABELS,
    copes_record,
    write_copes_jsonl,
    write_corpus_jsonl,
)


def vec(values):
    return EmbeddingVector(np.asarray(values, dtype=float), "m")


def test_ridge_solver_matches_independent_oracle():
    """100 randomized instances against the pure-Python normal-equations oracle."""
    rng = np.random.default_rng(424242)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        j = int(rng.integers(1, 6))
        dim = int(rng.integers(2, 17))
        donors = [vec(rng.uniform(-3, 3, size=dim)) for _ in range(j)]
        u = vec(rng.uniform(-3, 3, size=dim))
        lam = float(rng.choice([0.01, 0.1, 1.0, 10.0]))
        got = fit_weights(u, donors, lam=lam).weights
        expected = np.asarray(ridge_oracle(list(u.values), [list(d.values) for d in donors], lam))
        rel = float(np.linalg.norm(got - expected) / (1.0 + np.linalg.norm(expected)))
        worst = max(worst, rel)
        assert rel < 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"ridge acceptance took {elapsed:.2f}s"
    print(f"\nPASS ridge-solver-oracle: 100 instances, worst rel err {worst:.2e}, {elapsed:.2f}s")


def test_ridge_shrinkage_and_residual_monotonicity():
    """Weight norm nonincreasing, residual nondecreasing along the lambda grid."""
    rng = np.random.default_rng(90210)
    grid = [0.0, 0.1, 1.0, 10.0, 100.0]
    for _ in range(20):
        j = int(rng.integers(1, 6))
        dim = int(rng.integers(j, 17)) if j > 2 else int(rng.integers(2, 17))
        dim = max(dim, j)  # full column rank so lam=0 is solvable
        donors = [vec(rng.uniform(-3, 3, size=dim)) for _ in range(j)]
        u = vec(rng.uniform(-3, 3, size=dim))
        fits = [fit_weights(u, donors, lam=lam) for lam in grid]
        norms = [float(np.linalg.norm(f.weights)) for f in fits]
        residuals = [f.residual_norm for f in fits]
        for smaller_lam, larger_lam in zip(range(len(grid) - 1), range(1, len(grid))):
            assert norms[larger_lam] <= norms[smaller_lam] + 1e-12
            assert residuals[smaller_lam] <= residuals[larger_lam] + 1e-12
    print("\nPASS ridge-shrinkage: 20 instances over lambda grid {0, 0.1, 1, 10, 100}")


def test_ridge_closed_form_scalar_anchor():
    """Single unit-norm donor equal to the study vector at lam=1 gives w = 0.5."""
    u = vec([0.6, 0.8])
    w = fit_weights(u, [u], lam=1.0).weights[0]
    assert w == pytest.approx(0.5, abs=1e-12)
    print("\nPASS ridge-scalar-anchor: w1 = 0.5 within 1e-12")


BM25_DOCS = [
    ("d1", "The ugly frog lived in a small pond."),
    ("d2", "The frog saw a shiny weight at the bottom of the pond."),
    ("d3", "A big fish helped the frog lift the shiny weight."),
    ("d4", "The fish and the frog became good friends."),
    ("d5", "A girl watered green plants in her garden."),
]

BM25_QUERIES = [
    "shiny weight",
    "frog pond",
    "big fish friends",
    "girl garden plants",
    "the frog",
    "weight",
    "ugly frog shiny weight",
    "good friends",
    "green garden",
    "fish helped lift",
]


def test_bm25_matches_formula_oracle_and_search_contract():
    """Scores equal a direct formula evaluation; ranking rules hold exactly."""
    from synthtwin.corpus import CorpusHandle, Document

    corpus = CorpusHandle([Document(id=i, raw_text=t) for i, t in BM25_DOCS])
    index = build_index(corpus, field_name="raw")
    doc_tokens = {i: tokenize(t) for i, t in BM25_DOCS}

    for query in BM25_QUERIES:
        terms = tokenize(query)
        for doc_id in doc_tokens:
            got = bm25_score(index, terms, doc_id)
            expected = bm25_oracle(doc_tokens, terms, doc_id)
            assert abs(got - expected) <= 1e-9
        for n in (1, 2, 5, 50):
            got_rank = search(index, query, n)
            expected_rank = bm25_rank_oracle(doc_tokens, terms, n)
            assert [d for d, _ in got_rank] == [d for d, _ in expected_rank]
            assert len(got_rank) <= n
            assert all(s > 0.0 for _, s in got_rank)

    # Tie-break: identical documents must list in ascending id order.
    from synthtwin.corpus import CorpusHandle as CH, Document as D

    tie_index = build_index(
        CH([D(id="b", raw_text="same words"), D(id="a", raw_text="same words")]),
        field_name="raw",
    )
    assert [d for d, _ in search(tie_index, "same", 5)] == ["a", "b"]
    print("\nPASS bm25-oracle: 5-doc fixture x 10 queries within 1e-9; search contract exact")


def test_metric_arithmetic():
    """F1 reproduces the reference operating point and a hand-counted case."""
    assert f1_from_precision_recall(0.2663, 0.75) == pytest.approx(0.3930, abs=1e-4)

    predictions = ["Causal"] * 8 + ["NotCausal"]
    gold = [True] * 3 + [False] * 5 + [True]
    report = compute_metrics(predictions, gold)
    assert (report.tp, report.fp, report.fn) == (3, 5, 1)
    assert report.precision == pytest.approx(0.375, abs=1e-12)
    assert report.recall == pytest.approx(0.75, abs=1e-12)
    assert report.f1 == pytest.approx(0.5, abs=1e-12)
    print("\nPASS metric-arithmetic: F1(0.2663, 0.75) = 0.3930 +- 1e-4; counts case exact")


SCENARIOS = [
    (STUDY_CAUSAL, STUDY_CAUSAL_LABELS, CORPUS_CAUSAL, VerdictLabel.CAUSAL),
    (STUDY_NOT_CAUSAL, STUDY_NOT_CAUSAL_LABELS, CORPUS_NOT_CAUSAL, VerdictLabel.NOT_CAUSAL),
    (STUDY_INDETERMINATE, STUDY_INDETERMINATE_LABELS, CORPUS_INDETERMINATE, VerdictLabel.INDETERMINATE),
]


def test_end_to_end_mock_determinism(tmp_path):
    """Three mini-corpora give the three verdicts; reruns are byte-identical."""
    start = time.perf_counter()
    for study_spec, labels, docs, expected_label in SCENARIOS:
        manifests = []
        for run in range(2):
            providers = Providers.mock()
            corpus = make_corpus(docs)
            index = build_index(corpus, field_name="anonymized")

            events = EventSequence(tuple(study_spec["events"]), source_id=study_spec["story_id"])
            study = segment_study_unit(events, study_spec["treatment_idx"], transform=providers.transform)
            verdict = decide_causality(study, corpus, index, PipelineConfig(), providers)
            assert verdict.label is expected_label

            manifest = tmp_path / f"{study_spec['story_id']}-run{run}.jsonl"
            sample = CopesSample(study_spec["story_id"], tuple(study_spec["events"]), tuple(labels))
            run_benchmark(
                [sample], "synthetic_control", PipelineConfig(), providers,
                corpus=corpus, index=index, manifest_path=manifest,
            )
            manifests.append(manifest.read_bytes())
        assert manifests[0] == manifests[1], f"manifest not reproducible for {study_spec['story_id']}"
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"end-to-end acceptance took {elapsed:.2f}s"
    print(f"\nPASS end-to-end-mock: Causal/NotCausal/Indeterminate, byte-identical reruns, {elapsed:.2f}s")


def test_filter_monotonicity_in_threshold():
    """Kept-donor sets form a descending chain as the cosine threshold rises."""
    thresholds = [0.6, 0.7, 0.8, 0.9]
    for study_spec, _labels, docs, _expected in SCENARIOS:
        providers = Providers.mock()
        corpus = make_corpus(docs)
        index = build_index(corpus, field_name="anonymized")
        events = EventSequence(tuple(study_spec["events"]), source_id=study_spec["story_id"])
        study = segment_study_unit(events, study_spec["treatment_idx"], transform=providers.transform)

        kept_sets = []
        for threshold in thresholds:
            cfg = PipelineConfig(cos_threshold=threshold)
            verdict = decide_causality(study, corpus, index, cfg, providers)
            kept_sets.append({d.doc_id for d in verdict.trace.kept})
        for larger, smaller in zip(kept_sets, kept_sets[1:]):
            assert smaller <= larger, f"{smaller} not within {larger}"
    print("\nPASS filter-monotonicity: thresholds 0.6..0.9 give descending kept sets")


def test_eval_harness_emits_benchmark_shaped_report(tmp_path):
    """Mock-mode harness ingests a benchmark file and emits the metric report."""
    corpus_path = tmp_path / "stories.jsonl"
    write_corpus_jsonl(corpus_path, CORPUS_CAUSAL)
    dataset_path = tmp_path / "benchmark.jsonl"
    write_copes_jsonl(
        dataset_path,
        [
            copes_record(STUDY_CAUSAL, STUDY_CAUSAL_LABELS),
            copes_record(STUDY_NOT_CAUSAL, STUDY_NOT_CAUSAL_LABELS),
            copes_record(STUDY_INDETERMINATE, STUDY_INDETERMINATE_LABELS),
        ],
    )
    report_path = tmp_path / "report.json"
    manifest_path = tmp_path / "manifest.jsonl"

    code = main([
        "eval", "--dataset", str(dataset_path), "--method", "synthetic_control",
        "--corpus", str(corpus_path), "--mode", "mock",
        "--manifest", str(manifest_path), "--out", str(report_path),
    ])
    assert code == 0

    payload = json.loads(report_path.read_text())
    metrics = payload["metrics"]
    for key in ("precision", "recall", "f1"):
        assert isinstance(metrics[key], float) and 0.0 <= metrics[key] <= 1.0
    assert set(metrics["counts"]) == {"tp", "fp", "fn", "tn"}
    assert payload["mode"] == "mock"
    assert len(payload["per_pair"]) == 12
    manifest_lines = manifest_path.read_text().splitlines()
    assert len(manifest_lines) == 12
    print("\nPASS eval-harness-shape: benchmark file in, metric report out (mock mode)")
