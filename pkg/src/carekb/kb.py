"""Knowledge-base documents: decision factors plus rule-driven recommendations.

A knowledge base is authored as JSON. ``parse_kb_document`` builds the typed
model while tolerating duplicate names and undefined rule atoms so that lint
can report them; ``load_kb`` is the strict entry point that refuses such
documents outright.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import DuplicateName, SchemaError, UndefinedAtom
from .rules import (
    Formula,
    IDENTIFIER_RE,
    ParseError,
    DepthExceeded,
    format_formula,
    free_variables,
    parse_formula,
)

NAMESPACE_RE = re.compile(r"[a-z][a-z0-9_]*(\.[a-z][a-z0-9_]*)*\Z")
VERSION_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*\Z")


@dataclass(frozen=True)
class DecisionFactor:
    """A single yes/no/unknown question about the patient."""

    name: str
    question: str
    description: str | None = None

    def __post_init__(self):
        if not IDENTIFIER_RE.match(self.name):
            raise SchemaError(f"invalid factor name: {self.name!r}")
        if not self.question.strip():
            raise SchemaError(f"factor {self.name}: question must be non-empty")


@dataclass(frozen=True)
class Recommendation:
    """A guideline action with rules for when it applies and when it is done."""

    id: str
    title: str
    category: str
    relevance_rule: Formula
    completion_rule: Formula
    guideline_note: str | None = None

    def __post_init__(self):
        if not IDENTIFIER_RE.match(self.id):
            raise SchemaError(f"invalid recommendation id: {self.id!r}")
        if not self.title.strip():
            raise SchemaError(f"recommendation {self.id}: title must be non-empty")
        if not self.category.strip():
            raise SchemaError(f"recommendation {self.id}: category must be non-empty")

    def rules(self) -> tuple[tuple[str, Formula], ...]:
        return (("relevance", self.relevance_rule), ("completion", self.completion_rule))

    def atoms(self) -> list[str]:
        """Factor names referenced by either rule, sorted, deduplicated."""
        return sorted(
            set(free_variables(self.relevance_rule))
            | set(free_variables(self.completion_rule))
        )


@dataclass(frozen=True)
class KnowledgeBase:
    """One versioned bundle of factors and recommendations.

    Name uniqueness and atom resolution are load_kb's job, not the type's:
    lint needs to hold malformed bundles long enough to describe them.
    """

    namespace: str
    version: str
    factors: tuple[DecisionFactor, ...] = field(default_factory=tuple)
    recommendations: tuple[Recommendation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not NAMESPACE_RE.match(self.namespace):
            raise SchemaError(f"invalid namespace: {self.namespace!r}")
        if self.version == "latest" or not VERSION_RE.match(self.version):
            raise SchemaError(f"invalid version: {self.version!r}")

    @property
    def ref(self) -> str:
        return f"{self.namespace}@{self.version}"

    def factor_names(self) -> set[str]:
        return {factor.name for factor in self.factors}

    def factor_map(self) -> dict[str, DecisionFactor]:
        return {factor.name: factor for factor in self.factors}

    def recommendation_map(self) -> dict[str, Recommendation]:
        return {rec.id: rec for rec in self.recommendations}


# --- document parsing ------------------------------------------------------


def _require(mapping: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in mapping:
        raise SchemaError(f"{path}: missing required key {key!r}")
    return mapping[key]


def _string(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"{path}: expected a string, got {type(value).__name__}")
    return value


def _optional_string(mapping: Mapping[str, Any], key: str, path: str) -> str | None:
    if key not in mapping or mapping[key] is None:
        return None
    return _string(mapping[key], f"{path}.{key}")


def _rule(value: Any, path: str) -> Formula:
    text = _string(value, path)
    try:
        return parse_formula(text)
    except (ParseError, DepthExceeded) as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def _factor(entry: Any, path: str) -> DecisionFactor:
    if not isinstance(entry, Mapping):
        raise SchemaError(f"{path}: expected an object")
    return DecisionFactor(
        name=_string(_require(entry, "name", path), f"{path}.name"),
        question=_string(_require(entry, "question", path), f"{path}.question"),
        description=_optional_string(entry, "description", path),
    )


def _recommendation(entry: Any, path: str) -> Recommendation:
    if not isinstance(entry, Mapping):
        raise SchemaError(f"{path}: expected an object")
    return Recommendation(
        id=_string(_require(entry, "id", path), f"{path}.id"),
        title=_string(_require(entry, "title", path), f"{path}.title"),
        category=_string(_require(entry, "category", path), f"{path}.category"),
        relevance_rule=_rule(_require(entry, "relevance_rule", path), f"{path}.relevance_rule"),
        completion_rule=_rule(_require(entry, "completion_rule", path), f"{path}.completion_rule"),
        guideline_note=_optional_string(entry, "guideline_note", path),
    )


def parse_kb_document(data: bytes | str | Mapping[str, Any]) -> KnowledgeBase:
    """Build a KnowledgeBase from a JSON document without structural checks.

    Duplicate names and undefined atoms survive parsing; use load_kb when the
    result must be sound.
    """
    if isinstance(data, (bytes, str)):
        try:
            document = json.loads(data)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    else:
        document = data
    if not isinstance(document, Mapping):
        raise SchemaError("top level: expected an object")

    factors_raw = document.get("factors", [])
    recs_raw = document.get("recommendations", [])
    if not isinstance(factors_raw, list):
        raise SchemaError("factors: expected an array")
    if not isinstance(recs_raw, list):
        raise SchemaError("recommendations: expected an array")

    return KnowledgeBase(
        namespace=_string(_require(document, "namespace", "top level"), "namespace"),
        version=_string(_require(document, "version", "top level"), "version"),
        factors=tuple(
            _factor(entry, f"factors[{i}]") for i, entry in enumerate(factors_raw)
        ),
        recommendations=tuple(
            _recommendation(entry, f"recommendations[{i}]")
            for i, entry in enumerate(recs_raw)
        ),
    )


def _first_duplicate(names: Iterable[str]) -> str | None:
    seen: set[str] = set()
    for name in names:
        if name in seen:
            return name
        seen.add(name)
    return None


def load_kb(data: bytes | str | Mapping[str, Any]) -> KnowledgeBase:
    """Parse and fully validate a knowledge-base document.

    Raises SchemaError for shape problems, DuplicateName for repeated factor
    names or recommendation ids, and UndefinedAtom when a rule references a
    factor the document does not declare.
    """
    kb = parse_kb_document(data)
    duplicate = _first_duplicate(f.name for f in kb.factors)
    if duplicate is None:
        duplicate = _first_duplicate(r.id for r in kb.recommendations)
    if duplicate is not None:
        raise DuplicateName(duplicate)
    declared = kb.factor_names()
    for rec in kb.recommendations:
        for atom in rec.atoms():
            if atom not in declared:
                raise UndefinedAtom(rec.id, atom)
    return kb


# --- canonical serialization ------------------------------------------------


def kb_to_document(kb: KnowledgeBase) -> dict[str, Any]:
    """Canonical document form: arrays sorted, rules in canonical text,
    optional fields omitted when absent."""
    factors = []
    for factor in sorted(kb.factors, key=lambda f: f.name):
        entry: dict[str, Any] = {"name": factor.name, "question": factor.question}
        if factor.description is not None:
            entry["description"] = factor.description
        factors.append(entry)
    recommendations = []
    for rec in sorted(kb.recommendations, key=lambda r: r.id):
        entry = {
            "id": rec.id,
            "title": rec.title,
            "category": rec.category,
            "relevance_rule": format_formula(rec.relevance_rule),
            "completion_rule": format_formula(rec.completion_rule),
        }
        if rec.guideline_note is not None:
            entry["guideline_note"] = rec.guideline_note
        recommendations.append(entry)
    return {
        "namespace": kb.namespace,
        "version": kb.version,
        "factors": factors,
        "recommendations": recommendations,
    }


def canonical_kb_bytes(kb: KnowledgeBase) -> bytes:
    """Byte form that two semantically equal documents share regardless of
    key order, rule spelling, or whitespace in the source JSON."""
    return json.dumps(
        kb_to_document(kb), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
