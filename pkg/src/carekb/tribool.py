"""Three-valued truth values with strong Kleene connectives.

UNKNOWN models a question the available evidence cannot settle. The
connectives are chosen so that resolving an UNKNOWN to a definite value can
never flip an already-definite result, only sharpen an UNKNOWN one.
"""

from __future__ import annotations

import enum


class TriBool(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    @classmethod
    def from_text(cls, text: str) -> "TriBool":
        """Parse a truth value; accepts yes/no synonyms used for answers."""
        normalized = text.strip().lower()
        mapping = {
            "true": cls.TRUE,
            "yes": cls.TRUE,
            "false": cls.FALSE,
            "no": cls.FALSE,
            "unknown": cls.UNKNOWN,
        }
        try:
            return mapping[normalized]
        except KeyError:
            raise ValueError(f"not a truth value: {text!r}") from None

    @classmethod
    def from_bool(cls, value: bool) -> "TriBool":
        return cls.TRUE if value else cls.FALSE

    def as_answer(self) -> str:
        """Render as the yes/no/unknown vocabulary used for factor answers."""
        if self is TriBool.TRUE:
            return "yes"
        if self is TriBool.FALSE:
            return "no"
        return "unknown"

    def negate(self) -> "TriBool":
        if self is TriBool.TRUE:
            return TriBool.FALSE
        if self is TriBool.FALSE:
            return TriBool.TRUE
        return TriBool.UNKNOWN

    def and_(self, other: "TriBool") -> "TriBool":
        # FALSE dominates; otherwise any UNKNOWN taints the result.
        if TriBool.FALSE in (self, other):
            return TriBool.FALSE
        if TriBool.UNKNOWN in (self, other):
            return TriBool.UNKNOWN
        return TriBool.TRUE

    def or_(self, other: "TriBool") -> "TriBool":
        # TRUE dominates; otherwise any UNKNOWN taints the result.
        if TriBool.TRUE in (self, other):
            return TriBool.TRUE
        if TriBool.UNKNOWN in (self, other):
            return TriBool.UNKNOWN
        return TriBool.FALSE

    def implies(self, other: "TriBool") -> "TriBool":
        return self.negate().or_(other)

    def __str__(self) -> str:
        return self.value
