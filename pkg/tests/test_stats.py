"""Adjustment-rate aggregation across review sessions."""

from __future__ import annotations

import random

import pytest

from carekb.errors import EmptyInput
from carekb.session import (
    AuditEvent,
    AuditKind,
    adjust_recommendation,
    finalize_step1,
    override_factor,
)
from carekb.stats import compute_stats
from carekb.tribool import TriBool


def synthetic_session(review_session, factor_names, overridden, presented, touched):
    """Shape one session's countable surface directly.

    The aggregate only reads answers, presented_ids, and audit, so tests can
    dial in exact totals without scripting hundreds of real mutations.
    """
    template = next(iter(review_session.answers.answers.values()))
    review_session.answers = type(review_session.answers)(
        record_ref=review_session.answers.record_ref,
        kb_refs=review_session.answers.kb_refs,
        answers={name: template for name in factor_names},
    )
    review_session.presented_ids = tuple(presented)
    review_session.audit = []
    for name in overridden:
        review_session.audit.append(
            AuditEvent(
                timestamp="2025-02-01T09:00:00+00:00",
                actor="clinician",
                kind=AuditKind.FACTOR_OVERRIDE,
                subject=name,
                before="no",
                after="yes",
                reason="synthetic",
            )
        )
    kinds = [AuditKind.REC_EDIT, AuditKind.REC_REMOVE, AuditKind.REC_MOVE, AuditKind.REC_ADD]
    for i, rec_id in enumerate(touched):
        review_session.audit.append(
            AuditEvent(
                timestamp="2025-02-01T10:00:00+00:00",
                actor="clinician",
                kind=kinds[i % len(kinds)],
                subject=rec_id,
                before=None,
                after=None,
                reason="synthetic",
            )
        )
    return review_session


def make_sessions(review_session_factory, shapes):
    return [
        synthetic_session(review_session_factory(i), *shape)
        for i, shape in enumerate(shapes)
    ]


@pytest.fixture
def session_factory(review_registry, review_extractor):
    from carekb.records import load_record
    from carekb.session import create_session
    from conftest import review_record_document

    def build(i):
        return create_session(
            load_record(review_record_document()),
            ["onc.review@1.0"],
            review_extractor,
            review_registry,
            session_id=f"sess-{i}",
            timestamp="2025-02-01T09:00:00+00:00",
        )

    return build


def test_step1_counts_factors_and_distinct_overrides(session_factory):
    sessions = make_sessions(
        session_factory,
        [
            ([f"f{i}" for i in range(10)], ["f1", "f2"], [], []),
            ([f"g{i}" for i in range(5)], ["g0"], [], []),
        ],
    )
    stats = compute_stats(sessions, "step1")
    assert stats.total_items == 15
    assert stats.adjusted_items == 3
    assert stats.adjustment_percentage == 20.0
    assert stats.stage == "step1"


def test_step1_counts_a_factor_overridden_twice_once(session_factory):
    session = session_factory(0)
    override_factor(session, "pet_ct_done", TriBool.TRUE, "first pass")
    override_factor(session, "pet_ct_done", TriBool.UNKNOWN, "second thoughts")
    override_factor(session, "cea_measured", TriBool.UNKNOWN, "lab provenance")
    stats = compute_stats([session], "step1")
    assert stats.total_items == 5
    assert stats.adjusted_items == 2
    assert stats.adjustment_percentage == 40.0


def test_step2_counts_presented_and_distinct_touched(session_factory):
    sessions = make_sessions(
        session_factory,
        [
            ([], [], ["r1", "r2", "r3", "r4"], ["r1", "r1", "r2"]),
            ([], [], ["q1", "q2"], []),
        ],
    )
    stats = compute_stats(sessions, "step2")
    assert stats.total_items == 6
    assert stats.adjusted_items == 2
    assert stats.adjustment_percentage == 33.33


def test_step2_added_recommendations_count_as_adjustments(session_factory):
    session = session_factory(0)
    finalize_step1(session)
    adjust_recommendation(
        session,
        "add",
        {"id": "tumor_board", "title": "Tumor board", "category": "coordination"},
        "complex case",
    )
    stats = compute_stats([session], "step2")
    assert stats.total_items == 2  # pet_ct and cea_baseline were presented
    assert stats.adjusted_items == 1
    assert stats.adjustment_percentage == 50.0


def test_step_finalized_events_are_not_adjustments(session_factory):
    session = session_factory(0)
    finalize_step1(session)
    assert compute_stats([session], "step1").adjusted_items == 0
    assert compute_stats([session], "step2").adjusted_items == 0


def test_untouched_sessions_have_zero_rate(session_factory):
    stats = compute_stats([session_factory(0)], "step1")
    assert stats.adjusted_items == 0
    assert stats.adjustment_percentage == 0.0


def test_zero_total_is_zero_percent_not_an_error(session_factory):
    session = session_factory(0)  # never finalized: nothing presented
    stats = compute_stats([session], "step2")
    assert stats.total_items == 0
    assert stats.adjusted_items == 0
    assert stats.adjustment_percentage == 0.0


def test_rounding_to_two_decimals(session_factory):
    sessions = make_sessions(
        session_factory,
        [([f"f{i}" for i in range(3)], ["f0"], [], [])],
    )
    assert compute_stats(sessions, "step1").adjustment_percentage == 33.33
    sessions = make_sessions(
        session_factory,
        [([f"f{i}" for i in range(6)], ["f0"], [], [])],
    )
    assert compute_stats(sessions, "step1").adjustment_percentage == 16.67


def test_no_sessions_is_an_error():
    with pytest.raises(EmptyInput):
        compute_stats([], "step1")


def test_unknown_stage_is_an_error(session_factory):
    with pytest.raises(ValueError):
        compute_stats([session_factory(0)], "overall")


def test_to_dict(session_factory):
    stats = compute_stats([session_factory(0)], "step1")
    assert stats.to_dict() == {
        "stage": "step1",
        "total_items": 5,
        "adjusted_items": 0,
        "adjustment_percentage": 0.0,
    }


def test_aggregate_matches_brute_force_recount(session_factory):
    rng = random.Random(424242)
    shapes = []
    for _ in range(12):
        factors = [f"f{i}" for i in range(rng.randint(1, 20))]
        overridden = rng.sample(factors, rng.randint(0, len(factors)))
        presented = [f"r{i}" for i in range(rng.randint(0, 10))]
        touched = [rng.choice(presented) for _ in range(rng.randint(0, 6))] if presented else []
        shapes.append((factors, overridden, presented, touched))
    sessions = make_sessions(session_factory, shapes)

    expected_total1 = sum(len(s[0]) for s in shapes)
    expected_adj1 = sum(len(set(s[1])) for s in shapes)
    stats1 = compute_stats(sessions, "step1")
    assert (stats1.total_items, stats1.adjusted_items) == (expected_total1, expected_adj1)
    assert stats1.adjustment_percentage == round(100 * expected_adj1 / expected_total1, 2)

    expected_total2 = sum(len(s[2]) for s in shapes)
    expected_adj2 = sum(len(set(s[3])) for s in shapes)
    stats2 = compute_stats(sessions, "step2")
    assert (stats2.total_items, stats2.adjusted_items) == (expected_total2, expected_adj2)
