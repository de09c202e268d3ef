"""End-to-end causality pipeline.

For a (treatment, outcome) pair inside an event sequence: retrieve candidate
donor documents, segment and filter them into a control group, fit donor
weights on pretreatment embeddings, combine the donors' outcome embeddings
into a synthetic counterfactual, invert it to text, and judge that text
against the observed outcome. If the synthetic outcome still contains the
observed one, the treatment did not change its likelihood and the verdict is
NotCausal; if it does not, the verdict is Causal. Fewer than `min_keep`
acceptable donors yields Indeterminate.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from . import corpus as corpus_mod
from .corpus import CorpusHandle, EventSequence, TextTransformProvider
from .embedding import EmbeddingCache, EmbeddingProvider, EmbeddingVector, cosine, embed, join_segments
from .inversion import InversionProvider, RegistryInversionProvider, invert
from .judging import JudgeProvider, JudgeResponse, MalformedJudgeResponse, MockJudge, judge_similarity_detailed
from .retrieval import Index, search
from .synthesis import combine_outcomes, fit_weights

logger = logging.getLogger(__name__)


class VerdictLabel(str, Enum):
    CAUSAL = "Causal"
    NOT_CAUSAL = "NotCausal"
    INDETERMINATE = "Indeterminate"


@dataclass
class PipelineConfig:
    """Pipeline knobs; the defaults are the recommended operating point."""

    n: int = 100
    max_keep: int = 5
    min_keep: int = 2
    cos_threshold: float = 0.8
    lam: float = 1.0
    steps: int = 10
    beam_width: int = 4
    mode: str = "mock"
    endpoints: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.min_keep < 2:
            raise ValueError("min_keep must be >= 2; one donor cannot form a control group")
        if self.max_keep < self.min_keep:
            raise ValueError("max_keep must be >= min_keep")
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass
class Providers:
    """Provider bundle the pipeline runs against (all mock or all live)."""

    transform: TextTransformProvider
    embedder: EmbeddingProvider
    cache: EmbeddingCache
    judge: JudgeProvider
    inverter: InversionProvider

    @classmethod
    def mock(cls, dim: int = 256, cache_path: str | Path | None = None) -> "Providers":
        from .corpus import MockTextTransform
        from .embedding import HashEmbeddingProvider

        return cls(
            transform=MockTextTransform(),
            embedder=HashEmbeddingProvider(dim=dim),
            cache=EmbeddingCache(cache_path),
            judge=MockJudge(),
            inverter=RegistryInversionProvider(),
        )

    @classmethod
    def live(
        cls,
        endpoints: dict[str, str],
        embedding_model_id: str,
        cache_path: str | Path | None = None,
        token: str | None = None,
    ) -> "Providers":
        import requests

        from .providers import (
            HttpEmbeddingProvider,
            HttpInversionProvider,
            HttpJudgeProvider,
            HttpTextTransformProvider,
        )

        missing = {"embed", "invert", "judge"} - set(endpoints)
        if missing:
            raise ValueError(f"live mode requires endpoints for {sorted(missing)}")
        session = requests.Session()
        if token:
            session.headers["Authorization"] = f"Bearer {token}"
        return cls(
            transform=HttpTextTransformProvider(
                endpoints.get("transform", endpoints["judge"]), session=session
            ),
            embedder=HttpEmbeddingProvider(
                endpoints["embed"], model_id=embedding_model_id, session=session
            ),
            cache=EmbeddingCache(cache_path),
            judge=HttpJudgeProvider(endpoints["judge"], session=session),
            inverter=HttpInversionProvider(endpoints["invert"], session=session),
        )


@dataclass
class StudyUnit:
    """The protagonist's sequence: covariate events, treatment, and observed outcome."""

    pretreatment: EventSequence
    treatment: str
    outcome: str
    source_events: tuple[str, ...]
    treatment_idx: int
    source_id: str = "study"


@dataclass
class ControlUnit:
    """A donor summary split into the three segments the filters compare."""

    doc_id: str
    pretreatment_text: str
    intervention_text: str
    outcome_text: str
    u: EmbeddingVector | None = None
    o: EmbeddingVector | None = None
    retrieval_rank: int = 0


@dataclass(frozen=True)
class KeptDonor:
    doc_id: str
    cosine: float
    weight: float | None


@dataclass
class VerdictTrace:
    kept: tuple[KeptDonor, ...]
    synthetic_text: str | None
    judge_final: tuple[JudgeResponse, ...] | None
    retrieved: int
    query: str


@dataclass
class CausalVerdict:
    label: VerdictLabel
    delta_hat: int | None
    trace: VerdictTrace

    def __post_init__(self) -> None:
        if (self.label is VerdictLabel.INDETERMINATE) != (self.delta_hat is None):
            raise ValueError("delta_hat must be absent exactly when the verdict is Indeterminate")
        if self.label is VerdictLabel.CAUSAL and self.delta_hat != 1:
            raise ValueError("Causal verdicts carry delta_hat = 1")
        if self.label is VerdictLabel.NOT_CAUSAL and self.delta_hat != 0:
            raise ValueError("NotCausal verdicts carry delta_hat = 0")


def segment_study_unit(
    events: EventSequence,
    treatment_idx: int,
    transform: TextTransformProvider | None = None,
) -> StudyUnit:
    """Split an event sequence at a 1-based treatment position.

    Events before the treatment become the covariates and the last event is
    the observed outcome. A treatment in first position gets an augmented
    pretreatment, which requires a transform provider.
    """
    if len(events) < 2:
        raise ValueError("a study unit needs at least two events")
    if not 1 <= treatment_idx <= len(events) - 1:
        raise ValueError(
            f"treatment_idx {treatment_idx} out of range; must be in [1, {len(events) - 1}] "
            "(the last event is the outcome, not a treatment candidate)"
        )
    event_list = events.events
    treatment = event_list[treatment_idx - 1]
    outcome = event_list[-1]
    before = event_list[: treatment_idx - 1]
    if before:
        pretreatment = EventSequence(before, source_id=events.source_id)
    else:
        if transform is None:
            raise ValueError("treatment is the first event; a transform provider is needed to augment context")
        pretreatment = corpus_mod.augment_context(treatment, transform)
    return StudyUnit(
        pretreatment=pretreatment,
        treatment=treatment,
        outcome=outcome,
        source_events=event_list,
        treatment_idx=treatment_idx,
        source_id=events.source_id,
    )


def segment_control(summary: EventSequence, t: int) -> ControlUnit | None:
    """Split a donor summary into pretreatment / intervention / outcome.

    The pretreatment takes min(t, m-2) leading events so its length tracks the
    study unit's while always reserving one intervention and one outcome
    event. Summaries shorter than three events cannot form the three segments
    and are discarded (None).
    """
    m = len(summary)
    if m < 3:
        return None
    k = min(t, m - 2)
    events = summary.events
    return ControlUnit(
        doc_id=summary.source_id,
        pretreatment_text=join_segments(events[:k]),
        intervention_text=events[k],
        outcome_text=join_segments(events[k + 1 :]),
    )


def filter_controls(
    study: StudyUnit,
    candidates: Sequence[ControlUnit],
    cfg: PipelineConfig,
    providers: Providers,
    anon_pretreatment: str | None = None,
    anon_treatment: str | None = None,
) -> list[tuple[ControlUnit, float]]:
    """Select acceptable donors, best pretreatment match first.

    A candidate survives only if its pretreatment is close to the study
    unit's (cosine), its intervention is NOT close to the treatment (cosine),
    and the judge finds no trace of the treatment in any of its three
    segments. Candidate text is compared against the unanonymized treatment
    for the judge checks; cosine checks use anonymized text on both sides.
    A malformed judge response, after its single retry, drops the candidate:
    recall on treatment detection matters more than donor count.
    """
    if anon_pretreatment is None:
        anon_pretreatment = providers.transform.anonymize(join_segments(study.pretreatment.events))
    if anon_treatment is None:
        anon_treatment = providers.transform.anonymize(study.treatment)

    u_study, treatment_vec = embed(providers.embedder, providers.cache, [anon_pretreatment, anon_treatment])

    passed: list[tuple[ControlUnit, float]] = []
    for candidate in candidates:
        unit_vecs = embed(
            providers.embedder,
            providers.cache,
            [candidate.pretreatment_text, candidate.intervention_text],
        )
        candidate.u = unit_vecs[0]
        pre_cos = cosine(u_study, candidate.u)
        if pre_cos < cfg.cos_threshold:
            continue
        if cosine(unit_vecs[1], treatment_vec) >= cfg.cos_threshold:
            continue
        try:
            treatment_in_segment = any(
                judge_similarity_detailed(providers.judge, segment, study.treatment)[0]
                for segment in (
                    candidate.pretreatment_text,
                    candidate.intervention_text,
                    candidate.outcome_text,
                )
            )
        except MalformedJudgeResponse:
            logger.warning("judge output unusable for donor %s; dropping it", candidate.doc_id)
            continue
        if treatment_in_segment:
            continue
        passed.append((candidate, pre_cos))

    passed.sort(key=lambda pair: (-pair[1], pair[0].retrieval_rank))
    return passed[: cfg.max_keep]


def decide_causality(
    study: StudyUnit,
    corpus: CorpusHandle,
    index: Index,
    cfg: PipelineConfig,
    providers: Providers,
) -> CausalVerdict:
    """Run the full method for one study unit and return the verdict with its trace."""
    anon_pretreatment = providers.transform.anonymize(join_segments(study.pretreatment.events))
    anon_treatment = providers.transform.anonymize(study.treatment)
    anon_outcome = providers.transform.anonymize(study.outcome)
    query = join_segments([anon_pretreatment, anon_treatment, anon_outcome])

    ranked = search(index, query, cfg.n)
    candidates: list[ControlUnit] = []
    for rank, (doc_id, _score) in enumerate(ranked):
        doc = corpus.get(doc_id)
        if doc.summary is None:
            corpus_mod.preprocess_document(doc, providers.transform)
        if doc.summary is None:
            continue
        unit = segment_control(doc.summary, t=len(study.pretreatment.events))
        if unit is None:
            continue
        unit.retrieval_rank = rank
        candidates.append(unit)

    kept = filter_controls(
        study, candidates, cfg, providers,
        anon_pretreatment=anon_pretreatment, anon_treatment=anon_treatment,
    )

    if len(kept) < cfg.min_keep:
        trace = VerdictTrace(
            kept=tuple(KeptDonor(unit.doc_id, cos, None) for unit, cos in kept),
            synthetic_text=None,
            judge_final=None,
            retrieved=len(ranked),
            query=query,
        )
        return CausalVerdict(VerdictLabel.INDETERMINATE, None, trace)

    u_study = embed(providers.embedder, providers.cache, [anon_pretreatment])[0]
    donor_vecs = [unit.u for unit, _ in kept]
    outcome_vecs = embed(providers.embedder, providers.cache, [unit.outcome_text for unit, _ in kept])
    for (unit, _), o_vec in zip(kept, outcome_vecs):
        unit.o = o_vec

    weights = fit_weights(
        u_study,
        donor_vecs,
        lam=cfg.lam,
        donor_ids=[unit.doc_id for unit, _ in kept],
    )
    o_synthetic = combine_outcomes(weights, outcome_vecs)

    inverter = providers.inverter
    if isinstance(inverter, RegistryInversionProvider):
        # The registry inverter works off the kept donors' outcomes; build a
        # per-call instance so concurrent evaluations cannot race on it.
        inverter = RegistryInversionProvider([(unit.outcome_text, unit.o) for unit, _ in kept])
    synthetic_text = invert(inverter, o_synthetic, cfg.steps, cfg.beam_width)

    kept_donors = tuple(
        KeptDonor(unit.doc_id, cos, float(w))
        for (unit, cos), w in zip(kept, weights.weights)
    )
    try:
        still_occurs, final_responses = judge_similarity_detailed(providers.judge, synthetic_text, study.outcome)
    except MalformedJudgeResponse:
        trace = VerdictTrace(
            kept=kept_donors,
            synthetic_text=synthetic_text,
            judge_final=None,
            retrieved=len(ranked),
            query=query,
        )
        return CausalVerdict(VerdictLabel.INDETERMINATE, None, trace)

    trace = VerdictTrace(
        kept=kept_donors,
        synthetic_text=synthetic_text,
        judge_final=tuple(final_responses),
        retrieved=len(ranked),
        query=query,
    )
    if still_occurs:
        # The outcome shows up without the treatment: no likelihood change.
        return CausalVerdict(VerdictLabel.NOT_CAUSAL, 0, trace)
    return CausalVerdict(VerdictLabel.CAUSAL, 1, trace)


def verdict_record(story_id: str, treatment_idx: int, verdict: CausalVerdict) -> dict:
    """Manifest record for one evaluated pair; key set is fixed."""
    if verdict.trace.judge_final is None:
        judge_final = None
    else:
        judge_final = {
            "is_similar": any(r.is_similar for r in verdict.trace.judge_final),
            "reasoning": " | ".join(r.reasoning for r in verdict.trace.judge_final),
        }
    return {
        "story_id": story_id,
        "treatment_idx": treatment_idx,
        "label": verdict.label.value,
        "delta_hat": verdict.delta_hat,
        "kept_donors": [
            {"doc_id": d.doc_id, "cosine": d.cosine, "weight": d.weight}
            for d in verdict.trace.kept
        ],
        "synthetic_text": verdict.trace.synthetic_text,
        "judge_final": judge_final,
    }


def append_manifest(path: str | Path, record: dict) -> None:
    with Path(path).open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
