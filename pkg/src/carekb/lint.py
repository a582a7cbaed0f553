"""Static checks for knowledge bases.

Rules are checked for satisfiability and tautology over definite (TRUE/FALSE)
assignments: exhaustively up to ``exhaustive_limit`` variables, by seeded
random sampling above it. Sampled verdicts cannot be certain, so they are
reported as warnings.
"""

from __future__ import annotations

import enum
import hashlib
import itertools
import random
from dataclasses import dataclass

from .kb import KnowledgeBase
from .rules import Formula, eval_formula, format_formula, free_variables
from .tribool import TriBool

SAMPLE_COUNT = 10_000
DEFAULT_EXHAUSTIVE_LIMIT = 12


class LintSeverity(enum.Enum):
    ERROR = "ERROR"
    WARNING = "WARNING"


class LintCode(enum.Enum):
    UNDEFINED_ATOM = "UNDEFINED_ATOM"
    DUPLICATE_NAME = "DUPLICATE_NAME"
    UNSATISFIABLE_RULE = "UNSATISFIABLE_RULE"
    TAUTOLOGY_RULE = "TAUTOLOGY_RULE"
    UNUSED_FACTOR = "UNUSED_FACTOR"
    OVERRIDE_SHADOW = "OVERRIDE_SHADOW"


@dataclass(frozen=True)
class LintFinding:
    severity: LintSeverity
    code: LintCode
    subject: str
    message: str

    def sort_key(self) -> tuple[str, str, str]:
        return (self.code.value, self.subject, self.message)

    def to_dict(self) -> dict[str, str]:
        return {
            "severity": self.severity.value,
            "code": self.code.value,
            "subject": self.subject,
            "message": self.message,
        }


def _rule_seed(text: str) -> int:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _truth_profile(
    rule: Formula, variables: list[str], exhaustive_limit: int
) -> tuple[bool, bool, bool]:
    """Return (ever_true, ever_not_true, sampled) over definite assignments."""
    ever_true = False
    ever_not_true = False
    if len(variables) <= exhaustive_limit:
        sampled = False
        combos = itertools.product((TriBool.TRUE, TriBool.FALSE), repeat=len(variables))
        assignments = (dict(zip(variables, combo)) for combo in combos)
    else:
        sampled = True
        rng = random.Random(_rule_seed(format_formula(rule)))
        assignments = (
            {name: TriBool.from_bool(rng.random() < 0.5) for name in variables}
            for _ in range(SAMPLE_COUNT)
        )
    for assignment in assignments:
        if eval_formula(rule, assignment) is TriBool.TRUE:
            ever_true = True
        else:
            ever_not_true = True
        if ever_true and ever_not_true:
            break
    return ever_true, ever_not_true, sampled


def lint_kb(
    kb: KnowledgeBase, exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
) -> list[LintFinding]:
    """All findings for one knowledge base, sorted by (code, subject)."""
    findings: list[LintFinding] = []
    declared = kb.factor_names()

    seen_factors: set[str] = set()
    for factor in kb.factors:
        if factor.name in seen_factors:
            findings.append(
                LintFinding(
                    LintSeverity.ERROR,
                    LintCode.DUPLICATE_NAME,
                    factor.name,
                    f"factor {factor.name!r} is declared more than once",
                )
            )
        seen_factors.add(factor.name)

    seen_recs: set[str] = set()
    for rec in kb.recommendations:
        if rec.id in seen_recs:
            findings.append(
                LintFinding(
                    LintSeverity.ERROR,
                    LintCode.DUPLICATE_NAME,
                    rec.id,
                    f"recommendation {rec.id!r} is declared more than once",
                )
            )
        seen_recs.add(rec.id)

    referenced: set[str] = set()
    for rec in kb.recommendations:
        for rule_kind, rule in rec.rules():
            variables = free_variables(rule)
            referenced.update(variables)
            for atom in variables:
                if atom not in declared:
                    findings.append(
                        LintFinding(
                            LintSeverity.ERROR,
                            LintCode.UNDEFINED_ATOM,
                            rec.id,
                            f"{rule_kind} rule references undefined factor {atom!r}",
                        )
                    )
            ever_true, ever_not_true, sampled = _truth_profile(
                rule, variables, exhaustive_limit
            )
            qualifier = (
                f" over {SAMPLE_COUNT} sampled assignments" if sampled else ""
            )
            if not ever_true:
                findings.append(
                    LintFinding(
                        LintSeverity.WARNING if sampled else LintSeverity.ERROR,
                        LintCode.UNSATISFIABLE_RULE,
                        rec.id,
                        f"{rule_kind} rule {format_formula(rule)!r} is never "
                        f"true{qualifier}",
                    )
                )
            if not ever_not_true:
                findings.append(
                    LintFinding(
                        LintSeverity.WARNING,
                        LintCode.TAUTOLOGY_RULE,
                        rec.id,
                        f"{rule_kind} rule {format_formula(rule)!r} is always "
                        f"true{qualifier}",
                    )
                )

    for factor in kb.factors:
        if factor.name not in referenced:
            findings.append(
                LintFinding(
                    LintSeverity.WARNING,
                    LintCode.UNUSED_FACTOR,
                    factor.name,
                    f"factor {factor.name!r} is referenced by no rule",
                )
            )

    findings.sort(key=LintFinding.sort_key)
    return findings


def has_errors(findings: list[LintFinding]) -> bool:
    return any(f.severity is LintSeverity.ERROR for f in findings)
