"""Exception types shared across the package.

Every error that can cross a module boundary lives here so that the HTTP
layer and the CLI can map them to status codes without importing half the
package.
"""

from __future__ import annotations


class CarekbError(Exception):
    """Base class for all domain errors raised by this package."""


# --- rule language ---------------------------------------------------------


class ParseError(CarekbError):
    """Rule text could not be parsed.

    Carries the byte offset of the offending token and the set of token
    descriptions that would have been accepted at that position.
    """

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += " (expected " + " | ".join(self.expected) + ")"
        super().__init__(detail)


class DepthExceeded(CarekbError):
    """Rule nesting is deeper than the supported maximum."""


class UnboundVariable(CarekbError):
    """A rule referenced a variable the assignment does not bind."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable: {name}")


# --- knowledge bases -------------------------------------------------------


class SchemaError(CarekbError):
    """A document does not match the expected shape."""


class UndefinedAtom(CarekbError):
    """A rule references a factor the knowledge base does not declare."""

    def __init__(self, rule_id: str, atom: str):
        self.rule_id = rule_id
        self.atom = atom
        super().__init__(f"rule {rule_id} references undefined factor: {atom}")


class DuplicateName(CarekbError):
    """Two factors or two recommendations share a name within one KB."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate name in knowledge base: {name}")


class LintBlocked(CarekbError):
    """A snapshot was refused because lint reported errors."""

    def __init__(self, findings):
        self.findings = tuple(findings)
        codes = ", ".join(f"{f.code.value}({f.subject})" for f in self.findings)
        super().__init__(f"knowledge base has lint errors: {codes}")


class VersionConflict(CarekbError):
    """An artifact with this namespace and version is already registered."""


class NotFound(CarekbError):
    """The requested resource does not exist."""


class EmptyStack(CarekbError):
    """A knowledge-base stack must contain at least one artifact."""


class IntegrityError(CarekbError):
    """Stored artifact bytes do not match their recorded content hash."""


# --- extraction ------------------------------------------------------------


class ExtractorUnavailable(CarekbError):
    """The extraction backend could not produce a reply."""


class CitationError(CarekbError):
    """A citation does not resolve against the patient record."""

    def __init__(self, which, reason: str):
        self.which = which
        self.reason = reason
        super().__init__(f"citation {which} rejected: {reason}")


class InvalidDate(CarekbError):
    """A value could not be interpreted as a calendar date."""


class NegativeInterval(CarekbError):
    """The reference date precedes the date of birth."""


class EmptyFactorSet(CarekbError):
    """The effective knowledge base references no factors at all."""


# --- review sessions -------------------------------------------------------


class WrongState(CarekbError):
    """The operation is not permitted in the session's current step."""


class UnknownFactor(CarekbError):
    """The session has no answer for the named factor."""


class UnknownRecommendation(CarekbError):
    """The session's plan has no recommendation with the given id."""


class NoChange(CarekbError):
    """The mutation would leave the session exactly as it is."""


class DuplicateId(CarekbError):
    """A clinician-added recommendation reused an existing id."""


class InvalidAction(CarekbError):
    """The adjustment payload is malformed or not applicable."""


class MissingAnswer(CarekbError):
    """Evaluation requires a factor the answer set does not cover."""

    def __init__(self, factor: str):
        self.factor = factor
        super().__init__(f"no answer for factor: {factor}")


class ConflictError(CarekbError):
    """The supplied revision is stale; the session changed concurrently."""


class EmptyInput(CarekbError):
    """Statistics require at least one session."""


# --- service ---------------------------------------------------------------


class ConfigError(CarekbError):
    """Service configuration is incomplete or contradictory."""
