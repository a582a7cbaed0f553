"""Deterministic calendar arithmetic.

Language models are unreliable at date math, so these helpers are offered to
extraction backends as callable tools and are also applied locally when a
record's structured fields bind a factor to a date expression instead of a
literal answer.

A date expression looks like::

    {"tool": "age_at", "of": "date_of_birth", "at": "2025-01-20", "lt": 65}
    {"tool": "days_between", "from": "last_ct", "to": "2025-01-20", "le": 90}

Operand strings name another structured field when one exists, otherwise
they must be literal ISO dates. Exactly one comparison key (lt, le, gt, ge,
eq) turns the computed quantity into a yes/no answer.
"""

from __future__ import annotations

import operator
from datetime import date
from typing import Any, Mapping

from .errors import InvalidDate, NegativeInterval
from .tribool import TriBool


def _coerce_date(value: Any) -> date:
    if isinstance(value, date):
        return value
    if isinstance(value, str):
        try:
            return date.fromisoformat(value)
        except ValueError as exc:
            raise InvalidDate(f"not an ISO calendar date: {value!r}") from exc
    raise InvalidDate(f"not a calendar date: {value!r}")


def age_at(date_of_birth: Any, reference: Any) -> int:
    """Completed years of age on the reference date.

    A year completes on the month/day anniversary; a Feb-29 birthday
    completes its year on Mar-1 in non-leap years because (2, 29) never
    occurs in them.
    """
    born = _coerce_date(date_of_birth)
    ref = _coerce_date(reference)
    if ref < born:
        raise NegativeInterval(
            f"reference date {ref.isoformat()} precedes birth {born.isoformat()}"
        )
    years = ref.year - born.year
    if (ref.month, ref.day) < (born.month, born.day):
        years -= 1
    return years


def days_between(start: Any, end: Any) -> int:
    """Signed day count from start to end on the proleptic Gregorian calendar."""
    return (_coerce_date(end) - _coerce_date(start)).days


# --- tool registry ------------------------------------------------------------

TOOLS = {
    "age_at": age_at,
    "days_between": days_between,
}


def tool_specs() -> list[dict[str, Any]]:
    """Machine-readable descriptions advertised to extraction backends."""
    return [
        {
            "name": "age_at",
            "description": "Completed years of age on the reference date.",
            "parameters": {
                "date_of_birth": "ISO date (YYYY-MM-DD)",
                "reference": "ISO date (YYYY-MM-DD)",
            },
        },
        {
            "name": "days_between",
            "description": "Signed number of days from start to end.",
            "parameters": {
                "start": "ISO date (YYYY-MM-DD)",
                "end": "ISO date (YYYY-MM-DD)",
            },
        },
    ]


def call_tool(name: str, arguments: Mapping[str, Any]) -> int:
    if name not in TOOLS:
        raise ValueError(f"unknown tool: {name!r}")
    try:
        return TOOLS[name](**dict(arguments))
    except TypeError as exc:
        raise ValueError(f"bad arguments for {name}: {exc}") from exc


# --- date expressions in structured fields ------------------------------------

_COMPARATORS = {
    "lt": operator.lt,
    "le": operator.le,
    "gt": operator.gt,
    "ge": operator.ge,
    "eq": operator.eq,
}

_OPERAND_KEYS = {
    "age_at": ("of", "at"),
    "days_between": ("from", "to"),
}


def is_date_expression(value: Any) -> bool:
    return isinstance(value, Mapping) and value.get("tool") in TOOLS


def _resolve_operand(raw: Any, fields: Mapping[str, Any]) -> date:
    if isinstance(raw, str) and raw in fields:
        return _coerce_date(fields[raw])
    return _coerce_date(raw)


def evaluate_date_expression(
    expression: Mapping[str, Any], fields: Mapping[str, Any]
) -> tuple[TriBool, str]:
    """Answer a factor from a date expression; degrades to UNKNOWN on any
    malformed or unresolvable input instead of raising."""
    tool = expression.get("tool")
    keys = _OPERAND_KEYS.get(tool)
    if keys is None:
        return TriBool.UNKNOWN, f"date expression names unknown tool {tool!r}"
    comparisons = [k for k in _COMPARATORS if k in expression]
    if len(comparisons) != 1:
        return (
            TriBool.UNKNOWN,
            "date expression needs exactly one comparison key (lt, le, gt, ge, eq)",
        )
    comparison = comparisons[0]
    threshold = expression[comparison]
    if isinstance(threshold, bool) or not isinstance(threshold, int):
        return TriBool.UNKNOWN, f"comparison value must be an integer: {threshold!r}"
    try:
        operands = [_resolve_operand(expression.get(k), fields) for k in keys]
        quantity = TOOLS[tool](*operands)
    except (InvalidDate, NegativeInterval) as exc:
        return TriBool.UNKNOWN, f"date expression could not be evaluated: {exc}"
    holds = _COMPARATORS[comparison](quantity, threshold)
    rendered = ", ".join(
        f"{key}={value.isoformat()}" for key, value in zip(keys, operands)
    )
    return (
        TriBool.from_bool(holds),
        f"{tool}({rendered}) = {quantity}; "
        f"{quantity} {comparison} {threshold} is {str(holds).lower()}",
    )
