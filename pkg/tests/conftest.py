"""Shared fixtures: a small oncology review KB, a matching record, and
pattern config for the mock extractor. Used by the session, service, CLI,
and acceptance tests so they all exercise the same realistic shapes.
"""

from __future__ import annotations

import copy

import pytest

from carekb.extractors import MockExtractor
from carekb.kb import load_kb
from carekb.registry import Registry, snapshot
from carekb.session import create_session

REVIEW_KB = {
    "namespace": "onc.review",
    "version": "1.0",
    "factors": [
        {"name": "cancer_confirmed", "question": "Is invasive cancer confirmed by pathology?"},
        {"name": "metastases_suspected", "question": "Are distant metastases suspected on imaging?"},
        {"name": "pregnant", "question": "Is the patient pregnant?"},
        {"name": "pet_ct_done", "question": "Has a PET-CT been performed?"},
        {"name": "cea_measured", "question": "Has a baseline CEA level been measured?"},
    ],
    "recommendations": [
        {
            "id": "pet_ct",
            "title": "PET-CT",
            "category": "imaging",
            "relevance_rule": "cancer_confirmed AND metastases_suspected AND NOT pregnant",
            "completion_rule": "pet_ct_done",
        },
        {
            "id": "cea_baseline",
            "title": "Baseline CEA",
            "category": "labs",
            "relevance_rule": "cancer_confirmed",
            "completion_rule": "cea_measured",
        },
    ],
}

REVIEW_RECORD = {
    "patient_id": "pt-001",
    "structured_fields": {"pregnant": "no"},
    "documents": [
        {
            "doc_id": "note-1",
            "doc_type": "note",
            "date": "2025-01-10",
            "text": (
                "Pathology confirmed invasive adenocarcinoma. "
                "CT imaging raises concern for hepatic metastases."
            ),
        },
        {
            "doc_id": "lab-1",
            "doc_type": "lab",
            "date": "2025-01-11",
            "text": "CEA level measured at 4.1 ng/mL.",
        },
    ],
}

REVIEW_PATTERNS = {
    "cancer_confirmed": {
        "pattern": "confirmed invasive",
        "value_if_match": "yes",
        "value_if_absent": "unknown",
    },
    "metastases_suspected": {
        "pattern": "concern for hepatic metastases",
        "value_if_match": "yes",
        "value_if_absent": "no",
    },
    "pet_ct_done": {"pattern": "PET[- ]?CT", "value_if_match": "yes", "value_if_absent": "no"},
    "cea_measured": {"pattern": "CEA level measured", "value_if_match": "yes", "value_if_absent": "no"},
}

# Extracted values, given the record and patterns above:
#   cancer_confirmed=yes, metastases_suspected=yes, pregnant=no (structured),
#   pet_ct_done=no, cea_measured=yes
# so pet_ct evaluates to GAP and cea_baseline to COMPLETE.


def review_kb_document() -> dict:
    return copy.deepcopy(REVIEW_KB)


def review_record_document() -> dict:
    return copy.deepcopy(REVIEW_RECORD)


@pytest.fixture
def registry(tmp_path) -> Registry:
    return Registry(tmp_path / "registry")


@pytest.fixture
def review_registry(tmp_path) -> Registry:
    reg = Registry(tmp_path / "registry")
    reg.register(snapshot(load_kb(REVIEW_KB)))
    return reg


@pytest.fixture
def review_extractor() -> MockExtractor:
    return MockExtractor(REVIEW_PATTERNS)


@pytest.fixture
def review_session(review_registry, review_extractor):
    from carekb.records import load_record

    return create_session(
        load_record(review_record_document()),
        ["onc.review@1.0"],
        review_extractor,
        review_registry,
        session_id="sess-fixture",
        timestamp="2025-02-01T09:00:00+00:00",
    )
