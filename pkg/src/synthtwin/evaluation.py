"""Benchmark loading, metric computation, and the evaluation harness.

Datasets are five-event stories with four boolean labels: does event i cause
the final event, for i = 1..4. Every (story, candidate-treatment) pair is one
prediction; precision/recall/F1 are micro-averaged over pairs. Runs persist a
per-pair manifest and are resumable by (story_id, treatment_idx).
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

from .corpus import CorpusHandle, EventSequence
from .pipeline import (
    PipelineConfig,
    Providers,
    VerdictLabel,
    append_manifest,
    decide_causality,
    load_manifest,
    segment_study_unit,
    verdict_record,
)
from .retrieval import Index

logger = logging.getLogger(__name__)

EVENTS_PER_SAMPLE = 5
LABELS_PER_SAMPLE = 4

IndeterminatePolicy = Literal["as_negative", "excluded"]


@dataclass(frozen=True)
class CopesSample:
    story_id: str
    events: tuple[str, ...]
    labels: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.events) != EVENTS_PER_SAMPLE:
            raise ValueError(f"sample {self.story_id!r}: expected {EVENTS_PER_SAMPLE} events, got {len(self.events)}")
        if len(self.labels) != LABELS_PER_SAMPLE:
            raise ValueError(f"sample {self.story_id!r}: expected {LABELS_PER_SAMPLE} labels, got {len(self.labels)}")


@dataclass
class MetricsReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    indeterminate_count: int
    records: tuple[dict, ...] = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "counts": {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn},
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "indeterminate": self.indeterminate_count,
        }


def load_copes(path: str | Path) -> list[CopesSample]:
    """Load a JSONL benchmark file of {"story_id", "events" x5, "labels" x4}."""
    path = Path(path)
    samples: list[CopesSample] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {line_no}: {exc}") from exc
            samples.append(
                CopesSample(
                    story_id=str(record["story_id"]),
                    events=tuple(record["events"]),
                    labels=tuple(bool(b) for b in record["labels"]),
                )
            )
    logger.info("loaded %d samples from %s", len(samples), path)
    return samples


def write_copes(samples: Sequence[CopesSample], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for sample in samples:
            record = {
                "story_id": sample.story_id,
                "events": list(sample.events),
                "labels": list(sample.labels),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def f1_from_precision_recall(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def compute_metrics(
    predictions: Sequence[VerdictLabel | str],
    gold: Sequence[bool],
    indeterminate_policy: IndeterminatePolicy = "as_negative",
) -> MetricsReport:
    """Micro-averaged precision/recall/F1 over aligned (prediction, gold) pairs.

    Indeterminate predictions either count as negative calls or are excluded
    from the confusion counts entirely, per the policy; either way they are
    tallied in indeterminate_count.
    """
    if len(predictions) != len(gold):
        raise ValueError(f"{len(predictions)} predictions vs {len(gold)} gold labels")
    tp = fp = fn = tn = 0
    indeterminate = 0
    records: list[dict] = []
    for prediction, truth in zip(predictions, gold):
        label = VerdictLabel(prediction)
        records.append({"predicted": label.value, "gold": bool(truth)})
        if label is VerdictLabel.INDETERMINATE:
            indeterminate += 1
            if indeterminate_policy == "excluded":
                continue
            predicted_causal = False
        else:
            predicted_causal = label is VerdictLabel.CAUSAL
        if predicted_causal and truth:
            tp += 1
        elif predicted_causal and not truth:
            fp += 1
        elif not predicted_causal and truth:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return MetricsReport(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        precision=precision,
        recall=recall,
        f1=f1_from_precision_recall(precision, recall),
        indeterminate_count=indeterminate,
        records=tuple(records),
    )


def _evaluate_pair_synthetic(
    sample: CopesSample,
    treatment_idx: int,
    cfg: PipelineConfig,
    providers: Providers,
    corpus: CorpusHandle,
    index: Index,
) -> dict:
    events = EventSequence(sample.events, source_id=sample.story_id)
    study = segment_study_unit(events, treatment_idx, transform=providers.transform)
    verdict = decide_causality(study, corpus, index, cfg, providers)
    return verdict_record(sample.story_id, treatment_idx, verdict)


def _evaluate_pair_counterfactual(sample: CopesSample, treatment_idx: int, providers: Providers) -> dict:
    response = providers.judge.ask_counterfactual(list(sample.events), treatment_idx)  # type: ignore[attr-defined]
    label = VerdictLabel.CAUSAL if response.is_similar else VerdictLabel.NOT_CAUSAL
    return {
        "story_id": sample.story_id,
        "treatment_idx": treatment_idx,
        "label": label.value,
        "delta_hat": 1 if label is VerdictLabel.CAUSAL else 0,
        "kept_donors": [],
        "synthetic_text": None,
        "judge_final": {"is_similar": response.is_similar, "reasoning": response.reasoning},
    }


def run_benchmark(
    dataset: Sequence[CopesSample],
    method: Literal["synthetic_control", "counterfactual_prompting"],
    cfg: PipelineConfig,
    providers: Providers,
    corpus: CorpusHandle | None = None,
    index: Index | None = None,
    manifest_path: str | Path | None = None,
    indeterminate_policy: IndeterminatePolicy = "as_negative",
    parallelism: int = 1,
) -> MetricsReport:
    """Evaluate every (sample, treatment-index) pair and aggregate metrics.

    Completed pairs found in an existing manifest are not re-evaluated, so an
    interrupted run resumes where it stopped. New records are appended in
    canonical (sample order, treatment index) order.
    """
    if method == "synthetic_control" and (corpus is None or index is None):
        raise ValueError("synthetic_control needs a corpus and an index")

    done: dict[tuple[str, int], dict] = {}
    if manifest_path is not None:
        for record in load_manifest(manifest_path):
            done[(record["story_id"], record["treatment_idx"])] = record
        if done:
            logger.info("resuming: %d pairs already in %s", len(done), manifest_path)

    pairs = [
        (sample, idx)
        for sample in dataset
        for idx in range(1, LABELS_PER_SAMPLE + 1)
    ]
    todo = [(s, i) for s, i in pairs if (s.story_id, i) not in done]

    def evaluate(pair: tuple[CopesSample, int]) -> dict:
        sample, idx = pair
        if method == "synthetic_control":
            assert corpus is not None and index is not None
            return _evaluate_pair_synthetic(sample, idx, cfg, providers, corpus, index)
        return _evaluate_pair_counterfactual(sample, idx, providers)

    if parallelism > 1 and todo:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = pool.map(evaluate, todo)
            for pair, record in zip(todo, results):
                done[(pair[0].story_id, pair[1])] = record
                if manifest_path is not None:
                    append_manifest(manifest_path, record)
    else:
        for pair in todo:
            record = evaluate(pair)
            done[(pair[0].story_id, pair[1])] = record
            if manifest_path is not None:
                append_manifest(manifest_path, record)

    predictions: list[str] = []
    gold: list[bool] = []
    for sample, idx in pairs:
        record = done[(sample.story_id, idx)]
        predictions.append(record["label"])
        gold.append(sample.labels[idx - 1])
    report = compute_metrics(predictions, gold, indeterminate_policy)
    report.records = tuple(
        {
            "story_id": sample.story_id,
            "treatment_idx": idx,
            "predicted": done[(sample.story_id, idx)]["label"],
            "gold": sample.labels[idx - 1],
        }
        for sample, idx in pairs
    )
    return report


def write_report(
    report: MetricsReport,
    path: str | Path,
    method: str,
    cfg: PipelineConfig,
    indeterminate_policy: IndeterminatePolicy = "as_negative",
) -> None:
    """Write the run report: metrics, counts, config echo, and per-pair records."""
    payload = {
        "method": method,
        "mode": cfg.mode,
        "metrics": report.as_dict(),
        "indeterminate_policy": indeterminate_policy,
        "config": {
            "n": cfg.n,
            "max_keep": cfg.max_keep,
            "min_keep": cfg.min_keep,
            "cos_threshold": cfg.cos_threshold,
            "lambda": cfg.lam,
            "steps": cfg.steps,
            "beam_width": cfg.beam_width,
        },
        "per_pair": list(report.records),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
