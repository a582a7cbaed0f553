"""Patient records and sentence segmentation.

Sentences are the unit of citation: an extracted answer points at exact
stored sentences, so segmentation must be reproducible and lossless. The
splitter breaks after ``. ! ?`` followed by whitespace and a capital letter,
with an allowlist for common abbreviations, and keeps enough positional
discipline that the original document text is recoverable from the sentences
plus the whitespace between them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import SchemaError

DOC_TYPES = frozenset({"note", "lab", "imaging", "path", "structured"})

_ISO_DATE_RE = re.compile(r"\d{4}-\d{2}-\d{2}\Z")

# Periods ending these tokens do not end a sentence.
ABBREVIATIONS = ("Dr.", "mg.", "cm.", "e.g.", "i.e.", "vs.", "St.")


@dataclass(frozen=True)
class Document:
    doc_id: str
    doc_type: str
    date: str
    text: str

    def __post_init__(self):
        if not self.doc_id:
            raise SchemaError("document: doc_id must be non-empty")
        if self.doc_type not in DOC_TYPES:
            raise SchemaError(
                f"document {self.doc_id}: doc_type must be one of "
                f"{sorted(DOC_TYPES)}, got {self.doc_type!r}"
            )
        if not _ISO_DATE_RE.match(self.date):
            raise SchemaError(
                f"document {self.doc_id}: date must be YYYY-MM-DD, got {self.date!r}"
            )
        if not self.text.strip():
            raise SchemaError(f"document {self.doc_id}: text must be non-empty")


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    documents: tuple[Document, ...] = field(default_factory=tuple)
    structured_fields: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.patient_id:
            raise SchemaError("record: patient_id must be non-empty")
        seen: set[str] = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise SchemaError(f"record: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)

    def document_map(self) -> dict[str, Document]:
        return {doc.doc_id: doc for doc in self.documents}


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index: int
    text: str


def load_record(data: bytes | str | Mapping[str, Any]) -> PatientRecord:
    if isinstance(data, (bytes, str)):
        try:
            document = json.loads(data)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    else:
        document = data
    if not isinstance(document, Mapping):
        raise SchemaError("top level: expected an object")
    patient_id = document.get("patient_id")
    if not isinstance(patient_id, str):
        raise SchemaError("patient_id: expected a string")
    docs_raw = document.get("documents", [])
    if not isinstance(docs_raw, list):
        raise SchemaError("documents: expected an array")
    documents = []
    for i, entry in enumerate(docs_raw):
        if not isinstance(entry, Mapping):
            raise SchemaError(f"documents[{i}]: expected an object")
        try:
            documents.append(
                Document(
                    doc_id=entry.get("doc_id", ""),
                    doc_type=entry.get("doc_type", ""),
                    date=entry.get("date", ""),
                    text=entry.get("text", ""),
                )
            )
        except TypeError as exc:
            raise SchemaError(f"documents[{i}]: {exc}") from exc
    structured = document.get("structured_fields", {})
    if not isinstance(structured, Mapping):
        raise SchemaError("structured_fields: expected an object")
    return PatientRecord(
        patient_id=patient_id,
        documents=tuple(documents),
        structured_fields=dict(structured),
    )


def record_to_dict(record: PatientRecord) -> dict[str, Any]:
    return {
        "patient_id": record.patient_id,
        "documents": [
            {
                "doc_id": d.doc_id,
                "doc_type": d.doc_type,
                "date": d.date,
                "text": d.text,
            }
            for d in record.documents
        ],
        "structured_fields": dict(record.structured_fields),
    }


# --- segmentation ------------------------------------------------------------


def _ends_with_abbreviation(text: str, period_index: int) -> bool:
    """True when the '.' at period_index terminates an allowlisted token."""
    end = period_index + 1
    for abbreviation in ABBREVIATIONS:
        start = end - len(abbreviation)
        if start < 0 or text[start:end] != abbreviation:
            continue
        if start == 0 or not text[start - 1].isalpha():
            return True
    return False


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Half-open character spans of each sentence.

    The first span starts at the first non-whitespace character, the last
    ends after the last one, and the gaps between spans are whitespace only,
    so spans plus gaps reproduce the stripped document exactly.
    """
    length = len(text)
    start = 0
    while start < length and text[start].isspace():
        start += 1
    if start == length:
        raise ValueError("document text is empty")
    end = length
    while text[end - 1].isspace():
        end -= 1

    spans: list[tuple[int, int]] = []
    i = start
    while i < end:
        ch = text[i]
        if ch in ".!?":
            j = i + 1
            while j < end and text[j].isspace():
                j += 1
            if (
                j > i + 1  # at least one whitespace character follows
                and j < end
                and text[j].isupper()
                and not (ch == "." and _ends_with_abbreviation(text, i))
            ):
                spans.append((start, i + 1))
                start = j
                i = j
                continue
        i += 1
    spans.append((start, end))
    return spans


def segment(document: Document) -> list[Sentence]:
    """Split a document into index-stable sentences."""
    return [
        Sentence(document.doc_id, index, document.text[a:b])
        for index, (a, b) in enumerate(sentence_spans(document.text))
    ]


def build_sentence_index(record: PatientRecord) -> dict[str, list[Sentence]]:
    """Segment every document once, keyed by doc_id."""
    return {doc.doc_id: segment(doc) for doc in record.documents}
