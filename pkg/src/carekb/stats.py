"""Adjustment-rate statistics over reviewed sessions.

The rate answers one question per review step: of everything the system put
in front of the clinician, what share did they change? Distinct subjects
count once no matter how many times they were touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

from .errors import EmptyInput
from .session import REC_KINDS, AuditKind, ReviewSession

STAGES = ("step1", "step2")


@dataclass(frozen=True)
class AdjustmentStats:
    stage: str
    total_items: int
    adjusted_items: int
    adjustment_percentage: float  # two decimal places

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "total_items": self.total_items,
            "adjusted_items": self.adjusted_items,
            "adjustment_percentage": self.adjustment_percentage,
        }


def compute_stats(sessions: Iterable[ReviewSession], stage: str) -> AdjustmentStats:
    """Aggregate adjustment counts across sessions for one review step.

    step1: total = factors extracted, adjusted = distinct overridden factors.
    step2: total = recommendations presented at step-1 finalization,
    adjusted = distinct recommendations touched by any plan adjustment.
    """
    if stage not in STAGES:
        raise ValueError(f"stage must be one of {STAGES}, got {stage!r}")
    sessions = list(sessions)
    if not sessions:
        raise EmptyInput("statistics require at least one session")
    total = 0
    adjusted = 0
    for session in sessions:
        if stage == "step1":
            assert session.answers is not None
            total += len(session.answers.answers)
            adjusted += len(
                {
                    event.subject
                    for event in session.audit
                    if event.kind is AuditKind.FACTOR_OVERRIDE
                }
            )
        else:
            total += len(session.presented_ids)
            adjusted += len(
                {
                    event.subject
                    for event in session.audit
                    if event.kind in REC_KINDS
                }
            )
    percentage = round(100 * adjusted / total, 2) if total else 0.0
    return AdjustmentStats(
        stage=stage,
        total_items=total,
        adjusted_items=adjusted,
        adjustment_percentage=percentage,
    )
