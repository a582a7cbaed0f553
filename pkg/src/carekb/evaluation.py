"""Evaluating an effective knowledge base against factor answers.

Status is a pure function of the two rule values:

    relevance FALSE             -> NOT_RELEVANT
    relevance UNKNOWN           -> INDETERMINATE
    relevance TRUE, completion TRUE -> COMPLETE
    relevance TRUE, otherwise       -> GAP (flagged when completion is UNKNOWN)

Resolving UNKNOWN answers can move a recommendation out of INDETERMINATE or
flip a GAP's completion, but never turns NOT_RELEVANT into COMPLETE or back:
that is the Kleene refinement guarantee carried up to plan level.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Any, Callable, Mapping

from .errors import MissingAnswer
from .extraction import AnswerSet
from .rules import Formula, eval_formula, format_formula, free_variables
from .stacking import EffectiveKB
from .tribool import TriBool
from .errors import UnboundVariable

CLINICIAN_SOURCE = "clinician"


class RecommendationStatus(enum.Enum):
    NOT_RELEVANT = "NOT_RELEVANT"
    INDETERMINATE = "INDETERMINATE"
    GAP = "GAP"
    COMPLETE = "COMPLETE"


def derive_status(
    relevance: TriBool, completion: TriBool
) -> tuple[RecommendationStatus, bool]:
    """Map the two rule values to a status and the indeterminate-completion flag."""
    if relevance is TriBool.FALSE:
        return RecommendationStatus.NOT_RELEVANT, False
    if relevance is TriBool.UNKNOWN:
        return RecommendationStatus.INDETERMINATE, False
    if completion is TriBool.TRUE:
        return RecommendationStatus.COMPLETE, False
    return RecommendationStatus.GAP, completion is TriBool.UNKNOWN


@dataclass(frozen=True)
class RecommendationResult:
    recommendation_id: str
    title: str
    category: str
    relevance: TriBool
    completion: TriBool
    status: RecommendationStatus
    indeterminate_completion: bool
    fired_rule: str  # canonical relevance rule text; empty for clinician additions
    source_kb: str
    explanation: str = ""

    def sort_key(self) -> tuple[str, str, str]:
        return (self.status.value, self.category, self.recommendation_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.recommendation_id,
            "title": self.title,
            "category": self.category,
            "relevance": self.relevance.value,
            "completion": self.completion.value,
            "status": self.status.value,
            "indeterminate_completion": self.indeterminate_completion,
            "fired_rule": self.fired_rule,
            "source_kb": self.source_kb,
            "explanation": self.explanation,
        }


def result_from_dict(data: Mapping[str, Any]) -> RecommendationResult:
    return RecommendationResult(
        recommendation_id=data["id"],
        title=data["title"],
        category=data["category"],
        relevance=TriBool(data["relevance"]),
        completion=TriBool(data["completion"]),
        status=RecommendationStatus(data["status"]),
        indeterminate_completion=data["indeterminate_completion"],
        fired_rule=data["fired_rule"],
        source_kb=data["source_kb"],
        explanation=data.get("explanation", ""),
    )


def sort_results(
    results: list[RecommendationResult],
) -> tuple[RecommendationResult, ...]:
    return tuple(sorted(results, key=RecommendationResult.sort_key))


def evaluate(
    effective_kb: EffectiveKB, answers: AnswerSet
) -> tuple[RecommendationResult, ...]:
    """One result per merged recommendation, sorted by (status, category, id).

    Raises MissingAnswer when a rule mentions a factor the answer set does
    not cover; partial answer sets are a pipeline bug, not missing evidence.
    """
    assignment = {name: a.value for name, a in answers.answers.items()}
    results = []
    for rec_id in sorted(effective_kb.recommendations):
        rec = effective_kb.recommendations[rec_id]
        try:
            relevance = eval_formula(rec.relevance_rule, assignment)
            completion = eval_formula(rec.completion_rule, assignment)
        except UnboundVariable as exc:
            raise MissingAnswer(exc.name) from exc
        status, indeterminate = derive_status(relevance, completion)
        results.append(
            RecommendationResult(
                recommendation_id=rec_id,
                title=rec.title,
                category=rec.category,
                relevance=relevance,
                completion=completion,
                status=status,
                indeterminate_completion=indeterminate,
                fired_rule=format_formula(rec.relevance_rule),
                source_kb=effective_kb.recommendation_sources[rec_id],
            )
        )
    return sort_results(results)


# --- explanations ------------------------------------------------------------

# An explainer renders one result; the template below is the default, and a
# model-backed summarizer can be swapped in behind the same signature.
Explainer = Callable[[RecommendationResult, AnswerSet, EffectiveKB], str]


def _pivotal_atoms(
    rule: Formula, assignment: Mapping[str, TriBool]
) -> list[str]:
    """Atoms whose definite value currently forces the rule FALSE."""
    pivotal = []
    for atom in free_variables(rule):
        if assignment[atom] is TriBool.UNKNOWN:
            continue
        softened = dict(assignment)
        softened[atom] = TriBool.UNKNOWN
        if eval_formula(rule, softened) is not TriBool.FALSE:
            pivotal.append(atom)
    return pivotal


def _unknown_atoms(rule: Formula, assignment: Mapping[str, TriBool]) -> list[str]:
    return [a for a in free_variables(rule) if assignment[a] is TriBool.UNKNOWN]


_STATUS_PHRASES = {
    RecommendationStatus.GAP: "recommended and not yet done",
    RecommendationStatus.COMPLETE: "recommended and already done",
    RecommendationStatus.NOT_RELEVANT: "not indicated for this patient",
    RecommendationStatus.INDETERMINATE: "of undetermined relevance",
}


def explain(
    result: RecommendationResult, answers: AnswerSet, effective_kb: EffectiveKB
) -> str:
    """Deterministic template explanation for one evaluated result."""
    rec = effective_kb.recommendations[result.recommendation_id]
    assignment = {name: a.value for name, a in answers.answers.items()}
    lines = [
        f"{rec.title} is {_STATUS_PHRASES[result.status]}.",
        f"Relevance rule {format_formula(rec.relevance_rule)!r} evaluated to "
        f"{result.relevance.value}; completion rule "
        f"{format_formula(rec.completion_rule)!r} evaluated to "
        f"{result.completion.value}.",
    ]
    if result.status is RecommendationStatus.NOT_RELEVANT:
        pivotal = _pivotal_atoms(rec.relevance_rule, assignment)
        shown = pivotal or free_variables(rec.relevance_rule)
        rendered = ", ".join(
            f"{name}={assignment[name].as_answer()}" for name in shown
        )
        lines.append(f"Ruled out by: {rendered}.")
    elif result.status is RecommendationStatus.INDETERMINATE:
        unknowns = ", ".join(_unknown_atoms(rec.relevance_rule, assignment))
        lines.append(f"Cannot be determined until answered: {unknowns}.")
    elif result.indeterminate_completion:
        lines.append("Whether it was already done could not be confirmed.")
    for atom in rec.atoms():
        answer = answers.answers[atom]
        factor = effective_kb.factors[atom]
        lines.append(
            f"- {atom} ({factor.question}) = {answer.value.as_answer()}: "
            f"{answer.explanation}"
        )
    lines.append(f"Source: {result.source_kb}.")
    return "\n".join(lines)


def evaluate_with_explanations(
    effective_kb: EffectiveKB,
    answers: AnswerSet,
    explainer: Explainer = explain,
) -> tuple[RecommendationResult, ...]:
    return tuple(
        replace(result, explanation=explainer(result, answers, effective_kb))
        for result in evaluate(effective_kb, answers)
    )
