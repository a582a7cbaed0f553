"""KB document loading, validation, and canonical serialization."""

from __future__ import annotations

import json

import pytest

from carekb.errors import DuplicateName, SchemaError, UndefinedAtom
from carekb.kb import (
    KnowledgeBase,
    canonical_kb_bytes,
    kb_to_document,
    load_kb,
    parse_kb_document,
)
from carekb.registry import content_hash


def minimal_doc(**overrides):
    doc = {
        "namespace": "nccn.breast",
        "version": "2024.2",
        "factors": [
            {"name": "cn_positive", "question": "Are clinically positive nodes present?"}
        ],
        "recommendations": [
            {
                "id": "pet_ct",
                "title": "PET-CT",
                "category": "imaging",
                "relevance_rule": "cn_positive",
                "completion_rule": "cn_positive",
            }
        ],
    }
    doc.update(overrides)
    return doc


def test_load_valid_document():
    kb = load_kb(minimal_doc())
    assert kb.ref == "nccn.breast@2024.2"
    assert len(kb.factors) == 1
    assert len(kb.recommendations) == 1
    assert kb.factor_names() == {"cn_positive"}


def test_load_accepts_bytes_and_str():
    raw = json.dumps(minimal_doc())
    assert load_kb(raw) == load_kb(raw.encode("utf-8"))


def test_undefined_atom_rejected():
    doc = minimal_doc()
    doc["recommendations"][0]["relevance_rule"] = "stage_iv"
    with pytest.raises(UndefinedAtom) as exc_info:
        load_kb(doc)
    assert exc_info.value.rule_id == "pet_ct"
    assert exc_info.value.atom == "stage_iv"


def test_duplicate_factor_rejected():
    doc = minimal_doc()
    doc["factors"].append({"name": "cn_positive", "question": "Again?"})
    with pytest.raises(DuplicateName) as exc_info:
        load_kb(doc)
    assert exc_info.value.name == "cn_positive"


def test_duplicate_recommendation_rejected():
    doc = minimal_doc()
    doc["recommendations"].append(dict(doc["recommendations"][0]))
    with pytest.raises(DuplicateName):
        load_kb(doc)


def test_lenient_parse_keeps_duplicates_and_undefined_atoms():
    doc = minimal_doc()
    doc["factors"].append({"name": "cn_positive", "question": "Again?"})
    doc["recommendations"][0]["relevance_rule"] = "stage_iv"
    kb = parse_kb_document(doc)  # lint needs to see the broken document
    assert len(kb.factors) == 2
    assert kb.recommendations[0].atoms() == ["cn_positive", "stage_iv"]


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("namespace"),
        lambda d: d.pop("version"),
        lambda d: d.update(namespace="Not.Valid"),
        lambda d: d.update(namespace="trailing."),
        lambda d: d.update(version="latest"),
        lambda d: d.update(version="@bad"),
        lambda d: d.update(factors={"not": "a list"}),
        lambda d: d["factors"][0].pop("question"),
        lambda d: d["factors"][0].update(question="   "),
        lambda d: d["factors"][0].update(name="Bad-Name"),
        lambda d: d["recommendations"][0].pop("title"),
        lambda d: d["recommendations"][0].update(category=""),
        lambda d: d["recommendations"][0].update(relevance_rule=17),
        lambda d: d["recommendations"][0].update(relevance_rule="AND oops"),
    ],
)
def test_malformed_documents_raise_schema_error(mutate):
    doc = minimal_doc()
    mutate(doc)
    with pytest.raises(SchemaError):
        load_kb(doc)


def test_rule_parse_failure_reports_path():
    doc = minimal_doc()
    doc["recommendations"][0]["completion_rule"] = "a AND"
    with pytest.raises(SchemaError) as exc_info:
        load_kb(doc)
    assert "recommendations[0].completion_rule" in str(exc_info.value)


def test_not_json_raises_schema_error():
    with pytest.raises(SchemaError):
        load_kb(b"{nope")
    with pytest.raises(SchemaError):
        load_kb("[1, 2]")


def test_nested_namespace_and_flexible_versions_accepted():
    kb = load_kb(minimal_doc(namespace="nccn.breast.invasive", version="2024.3-rc1"))
    assert kb.ref == "nccn.breast.invasive@2024.3-rc1"


# --- canonical form ----------------------------------------------------------


def shuffled_doc():
    """Same logical content as minimal_doc, different key and array order."""
    return {
        "version": "2024.2",
        "recommendations": [
            {
                "completion_rule": "cn_positive",
                "relevance_rule": "  cn_positive ",
                "category": "imaging",
                "title": "PET-CT",
                "id": "pet_ct",
            }
        ],
        "factors": [
            {"question": "Are clinically positive nodes present?", "name": "cn_positive"}
        ],
        "namespace": "nccn.breast",
    }


def test_content_hash_ignores_field_order_and_rule_spelling():
    assert content_hash(load_kb(minimal_doc())) == content_hash(load_kb(shuffled_doc()))


def test_content_hash_ignores_array_order():
    two = minimal_doc()
    two["factors"].append({"name": "age_lt_50", "question": "Is the patient under 50?"})
    reversed_two = json.loads(json.dumps(two))
    reversed_two["factors"].reverse()
    assert content_hash(load_kb(two)) == content_hash(load_kb(reversed_two))


def test_content_hash_changes_with_rule_semantics():
    doc = minimal_doc()
    doc["factors"].append({"name": "pregnant", "question": "Is the patient pregnant?"})
    doc["recommendations"][0]["relevance_rule"] = "cn_positive AND pregnant"
    a = content_hash(load_kb(doc))
    doc["recommendations"][0]["relevance_rule"] = "cn_positive OR pregnant"
    b = content_hash(load_kb(doc))
    assert a != b


def test_canonical_document_sorts_arrays_and_omits_absent_optionals():
    doc = minimal_doc()
    doc["factors"].insert(0, {"name": "zeta", "question": "Z?"})
    doc["factors"].insert(0, {"name": "alpha", "question": "A?", "description": None})
    kb = load_kb(doc)
    canonical = kb_to_document(kb)
    assert [f["name"] for f in canonical["factors"]] == ["alpha", "cn_positive", "zeta"]
    assert "description" not in canonical["factors"][0]
    assert "guideline_note" not in canonical["recommendations"][0]


def test_canonical_document_normalizes_rule_text():
    doc = minimal_doc()
    doc["recommendations"][0]["relevance_rule"] = "not ( cn_positive )"
    canonical = kb_to_document(load_kb(doc))
    assert canonical["recommendations"][0]["relevance_rule"] == "NOT cn_positive"


def test_canonical_bytes_are_compact_sorted_utf8():
    raw = canonical_kb_bytes(load_kb(minimal_doc()))
    parsed = json.loads(raw)
    assert raw == json.dumps(
        parsed, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    assert b": " not in raw


def test_optional_fields_survive_round_trip():
    doc = minimal_doc()
    doc["factors"][0]["description"] = "Palpable or imaged nodal disease."
    doc["recommendations"][0]["guideline_note"] = "Category 2A."
    canonical = kb_to_document(load_kb(doc))
    assert canonical["factors"][0]["description"] == "Palpable or imaged nodal disease."
    assert canonical["recommendations"][0]["guideline_note"] == "Category 2A."


def test_knowledge_base_type_rejects_bad_identity():
    with pytest.raises(SchemaError):
        KnowledgeBase(namespace="", version="1")
    with pytest.raises(SchemaError):
        KnowledgeBase(namespace="ok.ns", version="latest")
