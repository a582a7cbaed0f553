"""Record loading and citation-grade sentence segmentation."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from carekb.errors import SchemaError
from carekb.records import (
    Document,
    PatientRecord,
    Sentence,
    build_sentence_index,
    load_record,
    record_to_dict,
    segment,
    sentence_spans,
)


def doc(text, doc_id="d1", doc_type="note", date="2025-01-01"):
    return Document(doc_id=doc_id, doc_type=doc_type, date=date, text=text)


def split(text):
    return [text[a:b] for a, b in sentence_spans(text)]


# --- segmentation behavior ----------------------------------------------------


def test_plain_two_sentence_split():
    assert split("Tumor is 3 cm in size. Margins are clear.") == [
        "Tumor is 3 cm in size.",
        "Margins are clear.",
    ]


def test_exclamation_and_question_split():
    assert split("Stop the drug now! Was the dose held? Yes.") == [
        "Stop the drug now!",
        "Was the dose held?",
        "Yes.",
    ]


@pytest.mark.parametrize(
    "abbrev,sentence",
    [
        ("Dr.", "Seen by Dr. Smith today."),
        ("mg.", "Dose was 20 mg. Given daily."),
        ("cm.", "Lesion measures 2 cm. Margins clear."),
        ("e.g.", "Imaging options, e.g. MRI, were discussed."),
        ("i.e.", "The index lesion, i.e. The largest one, shrank."),
        ("vs.", "We weighed surgery vs. Radiation."),
        ("St.", "Transferred from St. Mary hospital."),
    ],
)
def test_abbreviations_do_not_split(abbrev, sentence):
    assert abbrev in sentence
    assert split(sentence) == [sentence]


def test_abbreviation_guard_requires_token_boundary():
    # "Facm." merely ends with the letters of "cm." so it should still split,
    # while a real "3 cm." measurement should not.
    assert split("The Facm. Next step.") == ["The Facm.", "Next step."]
    assert split("Measured 3 cm. Margins were clear.") == [
        "Measured 3 cm. Margins were clear."
    ]


def test_lowercase_after_period_does_not_split():
    text = "The value was 3.2 ng/mL. this was repeated."
    assert split(text) == [text]


def test_digit_after_period_does_not_split():
    text = "See section 2. 3 items follow."
    assert split(text) == [text]


def test_period_without_following_space_does_not_split():
    text = "Version 2.Next stage."
    assert split(text) == [text]


def test_no_terminator_yields_single_sentence():
    assert split("no terminal punctuation here") == ["no terminal punctuation here"]


def test_trailing_terminator_stays_in_last_sentence():
    assert split("One. Two.") == ["One.", "Two."]
    assert split("One. Two") == ["One.", "Two"]


def test_surrounding_whitespace_is_trimmed():
    assert split("  Padded start. Padded end.  \n") == ["Padded start.", "Padded end."]


def test_multiple_spaces_between_sentences():
    assert split("First one.   Second one.") == ["First one.", "Second one."]


def test_newline_separated_sentences():
    assert split("First line.\nSecond line.") == ["First line.", "Second line."]


def test_empty_text_rejected():
    with pytest.raises(ValueError):
        sentence_spans("")
    with pytest.raises(ValueError):
        sentence_spans("   \n\t ")


def test_spans_reconstruct_original_text():
    text = "  Seen by Dr. Smith. Tumor is 3 cm. Margins clear!  Follow up in 2 wk.\n"
    spans = sentence_spans(text)
    # spans are ordered, non-overlapping, and gaps are whitespace only
    rebuilt_end = spans[0][0]
    assert text[: spans[0][0]].strip() == ""
    for a, b in spans:
        assert a >= rebuilt_end
        assert text[rebuilt_end:a].strip() == ""
        rebuilt_end = b
    assert text[rebuilt_end:].strip() == ""
    joined = "".join(text[a:b] for a, b in spans)
    assert joined.replace(" ", "") in text.replace(" ", "").replace("\n", "")


_text_alphabet = st.sampled_from(
    list("abcz ABCZ.!? \n\t09") + ["Dr.", "cm.", "e.g."]
)


@given(st.lists(_text_alphabet, min_size=1, max_size=60).map("".join))
def test_reconstruction_invariant_on_arbitrary_text(text):
    if not text.strip():
        return
    spans = sentence_spans(text)
    assert spans, "stripped text must yield at least one sentence"
    # spans tile the stripped region: whitespace-only gaps, full coverage
    assert text[: spans[0][0]].strip() == ""
    previous_end = spans[0][0]
    for a, b in spans:
        assert a >= previous_end
        assert text[previous_end:a].strip() == ""
        assert a < b
        assert not text[a].isspace() and not text[b - 1].isspace()
        previous_end = b
    assert text[previous_end:].strip() == ""
    # sentences plus the whitespace between them rebuild the stripped text
    rebuilt = []
    cursor = spans[0][0]
    for a, b in spans:
        rebuilt.append(text[cursor:a])
        rebuilt.append(text[a:b])
        cursor = b
    assert "".join(rebuilt) == text[spans[0][0] : spans[-1][1]]


def test_segment_assigns_stable_indices():
    sentences = segment(doc("One here. Two here. Three here."))
    assert sentences == [
        Sentence("d1", 0, "One here."),
        Sentence("d1", 1, "Two here."),
        Sentence("d1", 2, "Three here."),
    ]


def test_build_sentence_index_covers_all_documents():
    record = PatientRecord(
        patient_id="p1",
        documents=(
            doc("Alpha one. Beta two.", doc_id="a"),
            doc("Gamma three.", doc_id="b", doc_type="lab"),
        ),
    )
    index = build_sentence_index(record)
    assert set(index) == {"a", "b"}
    assert [s.text for s in index["a"]] == ["Alpha one.", "Beta two."]
    assert index["b"] == [Sentence("b", 0, "Gamma three.")]


# --- record validation ---------------------------------------------------------


def test_load_record_happy_path():
    record = load_record(
        {
            "patient_id": "p9",
            "documents": [
                {"doc_id": "n1", "doc_type": "note", "date": "2024-12-31", "text": "Hi."}
            ],
            "structured_fields": {"age": 61},
        }
    )
    assert record.patient_id == "p9"
    assert record.documents[0].doc_id == "n1"
    assert record.structured_fields == {"age": 61}
    assert record_to_dict(record)["documents"][0]["text"] == "Hi."


def test_load_record_accepts_json_text():
    record = load_record('{"patient_id": "p1", "documents": []}')
    assert record.patient_id == "p1"
    assert record.documents == ()
    assert record.structured_fields == {}


@pytest.mark.parametrize(
    "payload",
    [
        '{"oops"',
        "[]",
        {"documents": []},
        {"patient_id": ""},
        {"patient_id": "p", "documents": {"not": "a list"}},
        {"patient_id": "p", "documents": ["not an object"]},
        {"patient_id": "p", "structured_fields": ["not an object"]},
        {
            "patient_id": "p",
            "documents": [
                {"doc_id": "d", "doc_type": "diary", "date": "2024-01-01", "text": "x"}
            ],
        },
        {
            "patient_id": "p",
            "documents": [
                {"doc_id": "d", "doc_type": "note", "date": "01/02/2024", "text": "x"}
            ],
        },
        {
            "patient_id": "p",
            "documents": [
                {"doc_id": "d", "doc_type": "note", "date": "2024-01-01", "text": "  "}
            ],
        },
        {
            "patient_id": "p",
            "documents": [
                {"doc_id": "d", "doc_type": "note", "date": "2024-01-01", "text": "x"},
                {"doc_id": "d", "doc_type": "lab", "date": "2024-01-02", "text": "y"},
            ],
        },
    ],
)
def test_load_record_rejects_malformed_payloads(payload):
    with pytest.raises(SchemaError):
        load_record(payload)


def test_document_map():
    record = load_record(
        {
            "patient_id": "p",
            "documents": [
                {"doc_id": "a", "doc_type": "note", "date": "2024-01-01", "text": "x"},
                {"doc_id": "b", "doc_type": "lab", "date": "2024-01-02", "text": "y"},
            ],
        }
    )
    assert set(record.document_map()) == {"a", "b"}
    assert record.document_map()["b"].text == "y"
