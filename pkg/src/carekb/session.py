"""Two-step clinician review of an extracted, evaluated patient workup.

Step 1 reviews factor answers (override with a reason); finalizing step 1
evaluates the knowledge base and opens step 2, where the generated plan is
adjusted (edit, add, remove, move); finalizing step 2 freezes the session.

Every mutation appends exactly one audit event and bumps the revision, so a
session file is a header line plus its events, and replaying those events
rebuilds the live state bit for bit. Mutations are guarded by
compare-and-set on the revision to keep concurrent reviewers from silently
overwriting each other.
"""

from __future__ import annotations

import enum
import json
import secrets
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import (
    ConflictError,
    DuplicateId,
    EmptyStack,
    InvalidAction,
    NoChange,
    NotFound,
    SchemaError,
    UnknownFactor,
    UnknownRecommendation,
    WrongState,
)
from .evaluation import (
    CLINICIAN_SOURCE,
    Explainer,
    RecommendationResult,
    RecommendationStatus,
    evaluate_with_explanations,
    explain,
    result_from_dict,
    sort_results,
)
from .extraction import (
    AnswerSet,
    AnswerSource,
    FactorAnswer,
    Extractor,
    answer_set_from_dict,
    extract_all,
)
from .records import PatientRecord, load_record, record_to_dict
from .registry import Registry
from .rules import IDENTIFIER_RE
from .stacking import EffectiveKB, effective_kb_from_dict, effective_kb_to_dict, resolve_stack
from .tribool import TriBool


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


class SessionState(enum.Enum):
    STEP1_FACTOR_REVIEW = "STEP1_FACTOR_REVIEW"
    STEP2_WORKUP_REVIEW = "STEP2_WORKUP_REVIEW"
    FINALIZED = "FINALIZED"


class AuditKind(enum.Enum):
    FACTOR_OVERRIDE = "FACTOR_OVERRIDE"
    REC_EDIT = "REC_EDIT"
    REC_ADD = "REC_ADD"
    REC_REMOVE = "REC_REMOVE"
    REC_MOVE = "REC_MOVE"
    STEP_FINALIZED = "STEP_FINALIZED"


REC_KINDS = frozenset(
    {AuditKind.REC_EDIT, AuditKind.REC_ADD, AuditKind.REC_REMOVE, AuditKind.REC_MOVE}
)


@dataclass(frozen=True)
class AuditEvent:
    timestamp: str
    actor: str
    kind: AuditKind
    subject: str
    before: Any
    after: Any
    reason: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "timestamp": self.timestamp,
            "actor": self.actor,
            "kind": self.kind.value,
            "subject": self.subject,
            "before": self.before,
            "after": self.after,
            "reason": self.reason,
        }


def audit_event_from_dict(data: Mapping[str, Any]) -> AuditEvent:
    return AuditEvent(
        timestamp=data["timestamp"],
        actor=data["actor"],
        kind=AuditKind(data["kind"]),
        subject=data["subject"],
        before=data.get("before"),
        after=data.get("after"),
        reason=data.get("reason", ""),
    )


@dataclass
class ReviewSession:
    session_id: str
    patient_id: str
    record: PatientRecord
    stack: tuple[str, ...]
    effective_kb: EffectiveKB
    extractor_id: str
    created_at: str
    state: SessionState = SessionState.STEP1_FACTOR_REVIEW
    answers: AnswerSet | None = None
    results: tuple[RecommendationResult, ...] = field(default_factory=tuple)
    presented_ids: tuple[str, ...] = field(default_factory=tuple)
    audit: list[AuditEvent] = field(default_factory=list)
    finalized_at: str | None = None

    @property
    def revision(self) -> int:
        # Creation is revision 1; every audited mutation adds one.
        return 1 + len(self.audit)

    def require_revision(self, expected: int) -> None:
        if expected != self.revision:
            raise ConflictError(
                f"session {self.session_id} is at revision {self.revision}, "
                f"request expected {expected}"
            )

    def result_map(self) -> dict[str, RecommendationResult]:
        return {r.recommendation_id: r for r in self.results}


# --- creation ----------------------------------------------------------------


def create_session(
    record: PatientRecord,
    stack_refs: Iterable[str],
    extractor: Extractor,
    registry: Registry,
    *,
    session_id: str | None = None,
    timestamp: str | None = None,
) -> ReviewSession:
    """Resolve the stack, extract all factors, and open step 1."""
    refs = list(stack_refs)
    if not refs:
        raise EmptyStack("a session needs at least one knowledge base")
    effective_kb = resolve_stack(registry, refs)
    answers = extract_all(effective_kb, record, extractor)
    return ReviewSession(
        session_id=session_id or secrets.token_hex(8),
        patient_id=record.patient_id,
        record=record,
        stack=tuple(refs),
        effective_kb=effective_kb,
        extractor_id=extractor.extractor_id,
        created_at=timestamp or utc_now_iso(),
        answers=answers,
    )


# --- event application ---------------------------------------------------------
# Application is driven purely by event content so that replaying a log and
# performing the original mutations are the same code path.


def _apply_factor_override(session: ReviewSession, event: AuditEvent) -> None:
    answer = FactorAnswer(
        factor_name=event.subject,
        value=TriBool.from_text(event.after),
        explanation=event.reason,
        citations=(),
        source=AnswerSource.CLINICIAN,
        extractor_id=CLINICIAN_SOURCE,
    )
    assert session.answers is not None
    updated = dict(session.answers.answers)
    updated[event.subject] = answer
    session.answers = replace(session.answers, answers=updated)


def _apply_rec_edit(session: ReviewSession, event: AuditEvent) -> None:
    current = session.result_map()[event.subject]
    session.results = sort_results(
        [
            replace(current, **event.after) if r.recommendation_id == event.subject else r
            for r in session.results
        ]
    )


def _apply_rec_add(session: ReviewSession, event: AuditEvent) -> None:
    session.results = sort_results(
        list(session.results) + [result_from_dict(event.after)]
    )


def _apply_rec_remove(session: ReviewSession, event: AuditEvent) -> None:
    session.results = tuple(
        r for r in session.results if r.recommendation_id != event.subject
    )


def _apply_rec_move(session: ReviewSession, event: AuditEvent) -> None:
    target = RecommendationStatus(event.after)
    completion = TriBool.TRUE if target is RecommendationStatus.COMPLETE else TriBool.FALSE
    session.results = sort_results(
        [
            replace(
                r,
                status=target,
                completion=completion,
                indeterminate_completion=False,
            )
            if r.recommendation_id == event.subject
            else r
            for r in session.results
        ]
    )


def _apply_step_finalized(
    session: ReviewSession, event: AuditEvent, explainer: Explainer
) -> None:
    if event.subject == "step1":
        assert session.answers is not None
        session.results = evaluate_with_explanations(
            session.effective_kb, session.answers, explainer
        )
        session.presented_ids = tuple(r.recommendation_id for r in session.results)
        session.state = SessionState.STEP2_WORKUP_REVIEW
    else:
        session.state = SessionState.FINALIZED
        session.finalized_at = event.timestamp


def apply_event(
    session: ReviewSession, event: AuditEvent, explainer: Explainer = explain
) -> None:
    if event.kind is AuditKind.FACTOR_OVERRIDE:
        _apply_factor_override(session, event)
    elif event.kind is AuditKind.REC_EDIT:
        _apply_rec_edit(session, event)
    elif event.kind is AuditKind.REC_ADD:
        _apply_rec_add(session, event)
    elif event.kind is AuditKind.REC_REMOVE:
        _apply_rec_remove(session, event)
    elif event.kind is AuditKind.REC_MOVE:
        _apply_rec_move(session, event)
    elif event.kind is AuditKind.STEP_FINALIZED:
        _apply_step_finalized(session, event, explainer)
    else:
        raise InvalidAction(f"unknown audit kind: {event.kind}")
    session.audit.append(event)


# --- mutations -----------------------------------------------------------------


def _require_state(session: ReviewSession, expected: SessionState, doing: str) -> None:
    if session.state is not expected:
        raise WrongState(
            f"cannot {doing} in state {session.state.value}; "
            f"requires {expected.value}"
        )


def _require_reason(reason: str) -> str:
    if not reason or not reason.strip():
        raise InvalidAction("a non-empty reason is required")
    return reason.strip()


def override_factor(
    session: ReviewSession,
    factor: str,
    value: TriBool,
    reason: str,
    *,
    actor: str = "clinician",
    timestamp: str | None = None,
) -> AuditEvent:
    """Replace one extracted answer with the clinician's value."""
    _require_state(session, SessionState.STEP1_FACTOR_REVIEW, "override a factor")
    reason = _require_reason(reason)
    assert session.answers is not None
    current = session.answers.answers.get(factor)
    if current is None:
        raise UnknownFactor(f"session has no factor {factor!r}")
    if current.value is value:
        raise NoChange(f"factor {factor!r} already has value {value.as_answer()!r}")
    event = AuditEvent(
        timestamp=timestamp or utc_now_iso(),
        actor=actor,
        kind=AuditKind.FACTOR_OVERRIDE,
        subject=factor,
        before=current.value.as_answer(),
        after=value.as_answer(),
        reason=reason,
    )
    apply_event(session, event)
    return event


def finalize_step1(
    session: ReviewSession,
    *,
    actor: str = "clinician",
    timestamp: str | None = None,
    explainer: Explainer = explain,
) -> AuditEvent:
    """Evaluate the knowledge base over the reviewed answers and open step 2."""
    _require_state(session, SessionState.STEP1_FACTOR_REVIEW, "finalize step 1")
    event = AuditEvent(
        timestamp=timestamp or utc_now_iso(),
        actor=actor,
        kind=AuditKind.STEP_FINALIZED,
        subject="step1",
        before=SessionState.STEP1_FACTOR_REVIEW.value,
        after=SessionState.STEP2_WORKUP_REVIEW.value,
        reason="",
    )
    apply_event(session, event, explainer)
    return event


_EDITABLE_FIELDS = ("title", "category", "explanation")


def adjust_recommendation(
    session: ReviewSession,
    action: str,
    payload: Mapping[str, Any] | None,
    reason: str,
    *,
    recommendation_id: str | None = None,
    actor: str = "clinician",
    timestamp: str | None = None,
) -> AuditEvent:
    """Apply one step-2 plan adjustment: edit, add, remove, or move."""
    _require_state(session, SessionState.STEP2_WORKUP_REVIEW, "adjust the plan")
    reason = _require_reason(reason)
    payload = dict(payload or {})
    stamp = timestamp or utc_now_iso()

    if action == "add":
        rec_id = payload.get("id", recommendation_id)
        if not isinstance(rec_id, str) or not IDENTIFIER_RE.match(rec_id):
            raise InvalidAction(f"added recommendation needs a valid id, got {rec_id!r}")
        if rec_id in session.result_map():
            raise DuplicateId(f"recommendation {rec_id!r} already exists")
        title = payload.get("title")
        category = payload.get("category")
        if not isinstance(title, str) or not title.strip():
            raise InvalidAction("added recommendation needs a title")
        if not isinstance(category, str) or not category.strip():
            raise InvalidAction("added recommendation needs a category")
        try:
            status = RecommendationStatus(payload.get("status", "GAP"))
        except ValueError:
            raise InvalidAction(
                f"invalid status {payload.get('status')!r} for added recommendation"
            ) from None
        # Synthesize rule values consistent with the status derivation table.
        relevance = {
            RecommendationStatus.NOT_RELEVANT: TriBool.FALSE,
            RecommendationStatus.INDETERMINATE: TriBool.UNKNOWN,
        }.get(status, TriBool.TRUE)
        completion = (
            TriBool.TRUE if status is RecommendationStatus.COMPLETE else TriBool.FALSE
        )
        result = RecommendationResult(
            recommendation_id=rec_id,
            title=title.strip(),
            category=category.strip(),
            relevance=relevance,
            completion=completion,
            status=status,
            indeterminate_completion=False,
            fired_rule="",
            source_kb=CLINICIAN_SOURCE,
            explanation=payload.get("explanation", reason),
        )
        event = AuditEvent(
            timestamp=stamp,
            actor=actor,
            kind=AuditKind.REC_ADD,
            subject=rec_id,
            before=None,
            after=result.to_dict(),
            reason=reason,
        )
        apply_event(session, event)
        return event

    rec_id = recommendation_id or payload.get("id")
    if not isinstance(rec_id, str):
        raise InvalidAction("the adjustment must name a recommendation id")
    current = session.result_map().get(rec_id)
    if current is None:
        raise UnknownRecommendation(f"plan has no recommendation {rec_id!r}")

    if action == "edit":
        unknown_keys = set(payload) - set(_EDITABLE_FIELDS) - {"id"}
        if unknown_keys:
            raise InvalidAction(
                f"edit accepts only {list(_EDITABLE_FIELDS)}, got {sorted(unknown_keys)}"
            )
        changed = {}
        for key in _EDITABLE_FIELDS:
            if key not in payload:
                continue
            value = payload[key]
            if not isinstance(value, str):
                raise InvalidAction(f"edit field {key} must be a string")
            if value != getattr(current, key):
                changed[key] = value
        if not changed:
            raise NoChange(f"edit changes nothing on {rec_id!r}")
        event = AuditEvent(
            timestamp=stamp,
            actor=actor,
            kind=AuditKind.REC_EDIT,
            subject=rec_id,
            before={key: getattr(current, key) for key in changed},
            after=changed,
            reason=reason,
        )
        apply_event(session, event)
        return event

    if action == "remove":
        event = AuditEvent(
            timestamp=stamp,
            actor=actor,
            kind=AuditKind.REC_REMOVE,
            subject=rec_id,
            before=current.to_dict(),
            after=None,
            reason=reason,
        )
        apply_event(session, event)
        return event

    if action == "move":
        if current.status not in (
            RecommendationStatus.GAP,
            RecommendationStatus.COMPLETE,
        ):
            raise InvalidAction(
                f"move toggles GAP and COMPLETE; {rec_id!r} is {current.status.value}"
            )
        target = (
            RecommendationStatus.COMPLETE
            if current.status is RecommendationStatus.GAP
            else RecommendationStatus.GAP
        )
        event = AuditEvent(
            timestamp=stamp,
            actor=actor,
            kind=AuditKind.REC_MOVE,
            subject=rec_id,
            before=current.status.value,
            after=target.value,
            reason=reason,
        )
        apply_event(session, event)
        return event

    raise InvalidAction(f"unknown adjustment action: {action!r}")


def finalize(
    session: ReviewSession,
    *,
    actor: str = "clinician",
    timestamp: str | None = None,
) -> AuditEvent:
    """Freeze the session; the plan becomes read-only."""
    _require_state(session, SessionState.STEP2_WORKUP_REVIEW, "finalize the session")
    event = AuditEvent(
        timestamp=timestamp or utc_now_iso(),
        actor=actor,
        kind=AuditKind.STEP_FINALIZED,
        subject="step2",
        before=SessionState.STEP2_WORKUP_REVIEW.value,
        after=SessionState.FINALIZED.value,
        reason="",
    )
    apply_event(session, event)
    return event


# --- serialization ---------------------------------------------------------------


def session_to_dict(session: ReviewSession) -> dict[str, Any]:
    assert session.answers is not None
    return {
        "session_id": session.session_id,
        "patient_id": session.patient_id,
        "state": session.state.value,
        "revision": session.revision,
        "created_at": session.created_at,
        "finalized_at": session.finalized_at,
        "extractor_id": session.extractor_id,
        "stack": list(session.stack),
        "record": record_to_dict(session.record),
        "effective_kb": effective_kb_to_dict(session.effective_kb),
        "answers": session.answers.to_dict(),
        "results": [r.to_dict() for r in session.results],
        "presented_ids": list(session.presented_ids),
        "audit": [e.to_dict() for e in session.audit],
    }


def session_to_json(session: ReviewSession) -> bytes:
    return json.dumps(
        session_to_dict(session), sort_keys=True, separators=(",", ":"),
        ensure_ascii=False,
    ).encode("utf-8")


def export_plan(session: ReviewSession) -> dict[str, Any]:
    """The reviewed plan: what leaves the system when review is done."""
    return {
        "patient_id": session.patient_id,
        "stack": list(session.stack),
        "results": [r.to_dict() for r in session.results],
        "finalized_at": session.finalized_at,
    }


def _header_dict(session: ReviewSession) -> dict[str, Any]:
    assert session.answers is not None
    return {
        "type": "header",
        "session_id": session.session_id,
        "patient_id": session.patient_id,
        "created_at": session.created_at,
        "extractor_id": session.extractor_id,
        "stack": list(session.stack),
        "record": record_to_dict(session.record),
        "effective_kb": effective_kb_to_dict(session.effective_kb),
        "answers": session.answers.to_dict(),
    }


def session_from_header(header: Mapping[str, Any]) -> ReviewSession:
    return ReviewSession(
        session_id=header["session_id"],
        patient_id=header["patient_id"],
        record=load_record(header["record"]),
        stack=tuple(header["stack"]),
        effective_kb=effective_kb_from_dict(header["effective_kb"]),
        extractor_id=header["extractor_id"],
        created_at=header["created_at"],
        answers=answer_set_from_dict(header["answers"]),
    )


def replay_session(
    header: Mapping[str, Any],
    events: Iterable[Mapping[str, Any]],
    *,
    explainer: Explainer = explain,
) -> ReviewSession:
    """Rebuild a session from its log; the result is byte-identical to the
    state the original mutations produced."""
    session = session_from_header(header)
    for entry in events:
        apply_event(session, audit_event_from_dict(entry), explainer)
    return session


# --- persistence ------------------------------------------------------------------


class SessionStore:
    """One append-only JSONL file per session under a root directory."""

    def __init__(self, root: str | Path):
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)

    def path(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise SchemaError(f"invalid session id: {session_id!r}")
        return self._root / f"{session_id}.jsonl"

    def create(self, session: ReviewSession) -> None:
        path = self.path(session.session_id)
        if path.exists():
            raise ConflictError(f"session {session.session_id} already exists")
        lines = [json.dumps(_header_dict(session), sort_keys=True, ensure_ascii=False)]
        lines.extend(
            json.dumps(
                {"type": "event", **event.to_dict()},
                sort_keys=True,
                ensure_ascii=False,
            )
            for event in session.audit
        )
        path.write_text("\n".join(lines) + "\n", "utf-8")

    def append_event(self, session_id: str, event: AuditEvent) -> None:
        path = self.path(session_id)
        if not path.exists():
            raise NotFound(f"no session {session_id}")
        with path.open("a", encoding="utf-8") as handle:
            handle.write(
                json.dumps(
                    {"type": "event", **event.to_dict()},
                    sort_keys=True,
                    ensure_ascii=False,
                )
                + "\n"
            )

    def load(self, session_id: str, *, explainer: Explainer = explain) -> ReviewSession:
        path = self.path(session_id)
        if not path.exists():
            raise NotFound(f"no session {session_id}")
        header: Mapping[str, Any] | None = None
        events: list[Mapping[str, Any]] = []
        with path.open(encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(
                        f"session {session_id} line {line_number}: invalid JSON: {exc}"
                    ) from exc
                if entry.get("type") == "header":
                    if header is not None:
                        raise SchemaError(
                            f"session {session_id}: multiple header lines"
                        )
                    header = entry
                elif entry.get("type") == "event":
                    events.append(entry)
                else:
                    raise SchemaError(
                        f"session {session_id} line {line_number}: unknown entry type"
                    )
        if header is None:
            raise SchemaError(f"session {session_id}: missing header line")
        return replay_session(header, events, explainer=explainer)

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self._root.glob("*.jsonl"))

    def load_all(self, *, explainer: Explainer = explain) -> list[ReviewSession]:
        return [self.load(sid, explainer=explainer) for sid in self.list_ids()]
