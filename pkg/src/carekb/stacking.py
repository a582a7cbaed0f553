"""Layering knowledge bases into one effective rule set.

A stack lists artifact references from lowest to highest priority, e.g. a
broad guideline base with an institutional overlay on top. Factors merge by
name and recommendations by id; the highest layer wins a collision outright.
Because a winning recommendation is evaluated against merged factor
definitions, a collision where the layers disagree on a factor's question
text silently changes what the rule is asking; that situation is surfaced as
an OVERRIDE_SHADOW warning rather than fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .errors import EmptyStack
from .kb import DecisionFactor, Recommendation
from .lint import LintCode, LintFinding, LintSeverity
from .registry import Registry, VersionedArtifact
from .rules import format_formula, parse_formula


@dataclass(frozen=True)
class Override:
    recommendation_id: str
    losing: str  # artifact ref that defined the displaced recommendation
    winning: str

    def to_dict(self) -> dict[str, str]:
        return {
            "recommendation_id": self.recommendation_id,
            "losing": self.losing,
            "winning": self.winning,
        }


@dataclass(frozen=True)
class EffectiveKB:
    """The merged view a session evaluates against."""

    stack: tuple[str, ...]  # refs, lowest to highest priority
    factors: Mapping[str, DecisionFactor]
    factor_sources: Mapping[str, str]
    recommendations: Mapping[str, Recommendation]
    recommendation_sources: Mapping[str, str]
    overrides: tuple[Override, ...] = field(default_factory=tuple)
    warnings: tuple[LintFinding, ...] = field(default_factory=tuple)

    def required_factor_names(self) -> list[str]:
        names: set[str] = set()
        for rec in self.recommendations.values():
            names.update(rec.atoms())
        return sorted(names)

    def required_factors(self) -> list[DecisionFactor]:
        return [self.factors[name] for name in self.required_factor_names()]


def resolve_stack(registry: Registry, refs: Sequence[str]) -> EffectiveKB:
    """Resolve and merge a stack of artifact references.

    Raises EmptyStack for an empty list and NotFound for a missing artifact.
    A single-artifact stack merges to exactly that knowledge base.
    """
    if not refs:
        raise EmptyStack("a stack needs at least one artifact reference")
    artifacts: list[VersionedArtifact] = [registry.resolve_ref(ref) for ref in refs]

    factors: dict[str, DecisionFactor] = {}
    factor_sources: dict[str, str] = {}
    for artifact in artifacts:
        for factor in artifact.kb.factors:
            factors[factor.name] = factor
            factor_sources[factor.name] = artifact.ref

    # Group collision chains by id in stack order; the last definer wins.
    definers: dict[str, list[VersionedArtifact]] = {}
    for artifact in artifacts:
        for rec in artifact.kb.recommendations:
            definers.setdefault(rec.id, []).append(artifact)

    recommendations: dict[str, Recommendation] = {}
    recommendation_sources: dict[str, str] = {}
    overrides: list[Override] = []
    warnings: list[LintFinding] = []
    for artifact in artifacts:
        for rec in artifact.kb.recommendations:
            recommendations[rec.id] = rec
            recommendation_sources[rec.id] = artifact.ref

    for rec_id in recommendations:
        chain = definers[rec_id]
        if len(chain) < 2:
            continue
        winner = chain[-1]
        winning_rec = winner.kb.recommendation_map()[rec_id]
        winning_factors = winner.kb.factor_map()
        for loser in chain[:-1]:
            overrides.append(Override(rec_id, loser.ref, winner.ref))
            losing_factors = loser.kb.factor_map()
            for atom in winning_rec.atoms():
                winning_factor = winning_factors.get(atom)
                losing_factor = losing_factors.get(atom)
                if (
                    winning_factor is not None
                    and losing_factor is not None
                    and winning_factor.question != losing_factor.question
                ):
                    warnings.append(
                        LintFinding(
                            LintSeverity.WARNING,
                            LintCode.OVERRIDE_SHADOW,
                            rec_id,
                            f"override of {rec_id!r} ({loser.ref} -> {winner.ref}) "
                            f"references factor {atom!r} whose question differs "
                            f"between the layers: {losing_factor.question!r} vs "
                            f"{winning_factor.question!r}",
                        )
                    )

    warnings.sort(key=LintFinding.sort_key)
    return EffectiveKB(
        stack=tuple(a.ref for a in artifacts),
        factors=factors,
        factor_sources=factor_sources,
        recommendations=recommendations,
        recommendation_sources=recommendation_sources,
        overrides=tuple(overrides),
        warnings=tuple(warnings),
    )


# --- serialization -----------------------------------------------------------
# Session logs embed the resolved effective KB so they replay without a
# registry at hand.


def effective_kb_to_dict(ekb: EffectiveKB) -> dict[str, Any]:
    factors = {}
    for name in sorted(ekb.factors):
        factor = ekb.factors[name]
        entry: dict[str, Any] = {"question": factor.question}
        if factor.description is not None:
            entry["description"] = factor.description
        entry["source"] = ekb.factor_sources[name]
        factors[name] = entry
    recommendations = {}
    for rec_id in sorted(ekb.recommendations):
        rec = ekb.recommendations[rec_id]
        entry = {
            "title": rec.title,
            "category": rec.category,
            "relevance_rule": format_formula(rec.relevance_rule),
            "completion_rule": format_formula(rec.completion_rule),
            "source": ekb.recommendation_sources[rec_id],
        }
        if rec.guideline_note is not None:
            entry["guideline_note"] = rec.guideline_note
        recommendations[rec_id] = entry
    return {
        "stack": list(ekb.stack),
        "factors": factors,
        "recommendations": recommendations,
        "overrides": [o.to_dict() for o in ekb.overrides],
        "warnings": [w.to_dict() for w in ekb.warnings],
    }


def effective_kb_from_dict(data: Mapping[str, Any]) -> EffectiveKB:
    factors: dict[str, DecisionFactor] = {}
    factor_sources: dict[str, str] = {}
    for name, entry in data["factors"].items():
        factors[name] = DecisionFactor(
            name=name,
            question=entry["question"],
            description=entry.get("description"),
        )
        factor_sources[name] = entry["source"]
    recommendations: dict[str, Recommendation] = {}
    recommendation_sources: dict[str, str] = {}
    for rec_id, entry in data["recommendations"].items():
        recommendations[rec_id] = Recommendation(
            id=rec_id,
            title=entry["title"],
            category=entry["category"],
            relevance_rule=parse_formula(entry["relevance_rule"]),
            completion_rule=parse_formula(entry["completion_rule"]),
            guideline_note=entry.get("guideline_note"),
        )
        recommendation_sources[rec_id] = entry["source"]
    overrides = tuple(
        Override(o["recommendation_id"], o["losing"], o["winning"])
        for o in data.get("overrides", [])
    )
    warnings = tuple(
        LintFinding(
            LintSeverity(w["severity"]),
            LintCode(w["code"]),
            w["subject"],
            w["message"],
        )
        for w in data.get("warnings", [])
    )
    return EffectiveKB(
        stack=tuple(data["stack"]),
        factors=factors,
        factor_sources=factor_sources,
        recommendations=recommendations,
        recommendation_sources=recommendation_sources,
        overrides=overrides,
        warnings=warnings,
    )
