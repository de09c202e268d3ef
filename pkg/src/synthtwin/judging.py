"""Event-similarity adjudication through a chat judge.

Two directional questions are asked independently for each ordered pair and
their answers are OR-combined. Event A is always the candidate side (retrieved
segment or synthesized outcome) and event B the study-unit side; the asymmetry
is deliberate: we only look for indications of B within A.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from .retrieval import tokenize

QUESTION_SIMILAR_WITHIN = "similar-event-within"
QUESTION_SUBSET = "subset-of"

QUESTION_TEXTS: dict[str, str] = {
    QUESTION_SIMILAR_WITHIN: "does a similar event to event B take place in event A",
    QUESTION_SUBSET: "is event B a subset of event A",
}

MOCK_OVERLAP_THRESHOLD = 0.6

#: Small frozen stopword list for the deterministic judge; content tokens are
#: whatever survives it.
DEFAULT_STOPWORDS = frozenset(
    """
    a an the and or but if then so to of in on at by for with from as into
    is are was were be been being he she it they them him his her its their
    this that these those i you we me my your our us
    not no now up down out over under had has have do does did will would
    can could there here when while who whom what which
    """.split()
)


class MalformedJudgeResponse(Exception):
    """The judge backend produced output that could not be parsed."""


@dataclass(frozen=True)
class JudgeResponse:
    is_similar: bool
    reasoning: str
    question_id: str


class JudgeProvider(Protocol):
    """Chat judge; live backends run at temperature zero."""

    def ask(self, event_a: str, event_b: str, question_id: str) -> JudgeResponse: ...


class MockJudge:
    """Deterministic judge: event B counts as present in event A when at least
    `threshold` of B's content tokens appear among A's content tokens.

    A pure function of the ordered pair, so end-to-end tests can construct
    exact verdicts by controlling token overlap.
    """

    def __init__(self, threshold: float = MOCK_OVERLAP_THRESHOLD, stopwords: frozenset[str] = DEFAULT_STOPWORDS):
        self.threshold = threshold
        self.stopwords = stopwords

    def content_tokens(self, text: str) -> set[str]:
        return {t for t in tokenize(text) if t not in self.stopwords}

    def overlap_ratio(self, event_a: str, event_b: str) -> float:
        b_tokens = self.content_tokens(event_b)
        if not b_tokens:
            # No content to look for; fall back to whole-token comparison.
            return 1.0 if tokenize(event_a) == tokenize(event_b) else 0.0
        a_tokens = self.content_tokens(event_a)
        return len(b_tokens & a_tokens) / len(b_tokens)

    def ask(self, event_a: str, event_b: str, question_id: str) -> JudgeResponse:
        if question_id not in QUESTION_TEXTS:
            raise ValueError(f"unknown question id {question_id!r}")
        ratio = self.overlap_ratio(event_a, event_b)
        similar = ratio >= self.threshold
        return JudgeResponse(
            is_similar=similar,
            reasoning=f"content-token overlap {ratio:.2f} {'meets' if similar else 'is below'} {self.threshold}",
            question_id=question_id,
        )

    def ask_counterfactual(self, events: list[str], treatment_idx: int) -> JudgeResponse:
        """Single-call causality guess used by the prompting baseline.

        The outcome is deemed to still happen under intervention when it is
        already indicated by the remaining context events; in that case the
        treatment is judged not causal.
        """
        if not 1 <= treatment_idx <= len(events) - 1:
            raise ValueError(f"treatment index {treatment_idx} out of range")
        outcome = events[-1]
        context = [e for i, e in enumerate(events[:-1], start=1) if i != treatment_idx]
        still_happens = self.overlap_ratio(" ".join(context), outcome) >= self.threshold
        return JudgeResponse(
            is_similar=not still_happens,
            reasoning=(
                "outcome already indicated by remaining context"
                if still_happens
                else "outcome not indicated without the treatment"
            ),
            question_id="counterfactual",
        )


def _ask_with_one_retry(provider: JudgeProvider, event_a: str, event_b: str, question_id: str) -> JudgeResponse:
    try:
        return provider.ask(event_a, event_b, question_id)
    except MalformedJudgeResponse:
        return provider.ask(event_a, event_b, question_id)


def judge_similarity_detailed(
    provider: JudgeProvider, event_a: str, event_b: str
) -> tuple[bool, list[JudgeResponse]]:
    """Ask both questions and OR-combine; responses returned for the trace.

    A malformed response is re-asked once; if it stays malformed the exception
    propagates so the caller can apply its own policy.
    """
    responses = [
        _ask_with_one_retry(provider, event_a, event_b, QUESTION_SIMILAR_WITHIN),
        _ask_with_one_retry(provider, event_a, event_b, QUESTION_SUBSET),
    ]
    return responses[0].is_similar or responses[1].is_similar, responses


def judge_similarity(provider: JudgeProvider, event_a: str, event_b: str) -> bool:
    similar, _ = judge_similarity_detailed(provider, event_a, event_b)
    return similar
