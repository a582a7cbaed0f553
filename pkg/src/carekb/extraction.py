"""Turning a patient record into verified factor answers.

Every answer that claims textual evidence must cite stored sentences, and
every citation is checked against the record before the answer is accepted.
A failed check or an unreachable backend converts the answer to UNKNOWN with
a diagnostic note; extraction never crashes a run and never stores evidence
that cannot be shown.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .datetools import evaluate_date_expression, is_date_expression
from .errors import CitationError, EmptyFactorSet, ExtractorUnavailable
from .extractors import CitationClaim, ExtractionReply, ExtractionRequest, Extractor
from .kb import DecisionFactor
from .records import PatientRecord, Sentence, build_sentence_index
from .stacking import EffectiveKB
from .tribool import TriBool

DATE_TOOL_EXTRACTOR_ID = "date-tools"


class AnswerSource(enum.Enum):
    EXTRACTOR = "extractor"
    CLINICIAN = "clinician"


@dataclass(frozen=True)
class FactorAnswer:
    factor_name: str
    value: TriBool
    explanation: str
    citations: tuple[tuple[str, int], ...] = field(default_factory=tuple)
    source: AnswerSource = AnswerSource.EXTRACTOR
    extractor_id: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "factor": self.factor_name,
            "value": self.value.as_answer(),
            "explanation": self.explanation,
            "citations": [
                {"doc_id": doc_id, "index": index} for doc_id, index in self.citations
            ],
            "source": self.source.value,
            "extractor_id": self.extractor_id,
        }


def factor_answer_from_dict(data: Mapping[str, Any]) -> FactorAnswer:
    return FactorAnswer(
        factor_name=data["factor"],
        value=TriBool.from_text(data["value"]),
        explanation=data["explanation"],
        citations=tuple((c["doc_id"], c["index"]) for c in data.get("citations", [])),
        source=AnswerSource(data.get("source", "extractor")),
        extractor_id=data.get("extractor_id", ""),
    )


@dataclass(frozen=True)
class AnswerSet:
    """Answers for exactly the factors the effective KB's rules mention."""

    record_ref: str
    kb_refs: tuple[str, ...]
    answers: Mapping[str, FactorAnswer]

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_ref": self.record_ref,
            "kb_refs": list(self.kb_refs),
            "answers": {
                name: self.answers[name].to_dict() for name in sorted(self.answers)
            },
        }


def answer_set_from_dict(data: Mapping[str, Any]) -> AnswerSet:
    return AnswerSet(
        record_ref=data["record_ref"],
        kb_refs=tuple(data["kb_refs"]),
        answers={
            name: factor_answer_from_dict(entry)
            for name, entry in data["answers"].items()
        },
    )


# --- citation validation --------------------------------------------------------


def validate_citations(
    citations: Iterable[CitationClaim | tuple[str, int]],
    sentences_by_doc: Mapping[str, list[Sentence]],
) -> None:
    """Check that every citation resolves to a stored sentence.

    Accepts backend claims (with an optional echoed sentence that must match
    the stored text byte-for-byte) as well as bare (doc_id, index) pairs.
    Raises CitationError on the first citation that does not hold up.
    """
    for citation in citations:
        if isinstance(citation, CitationClaim):
            doc_id, index, echoed = (
                citation.doc_id,
                citation.sentence_index,
                citation.echoed_text,
            )
        else:
            (doc_id, index), echoed = citation, None
        sentences = sentences_by_doc.get(doc_id)
        if sentences is None:
            raise CitationError((doc_id, index), f"no document {doc_id!r} in record")
        if not 0 <= index < len(sentences):
            raise CitationError(
                (doc_id, index),
                f"document {doc_id!r} has {len(sentences)} sentences, "
                f"index {index} does not exist",
            )
        if echoed is not None and echoed != sentences[index].text:
            raise CitationError(
                (doc_id, index),
                f"echoed text does not match the stored sentence: "
                f"{echoed!r} != {sentences[index].text!r}",
            )


# --- per-factor extraction --------------------------------------------------------


def _unknown(factor: DecisionFactor, explanation: str, extractor_id: str) -> FactorAnswer:
    return FactorAnswer(
        factor_name=factor.name,
        value=TriBool.UNKNOWN,
        explanation=explanation,
        citations=(),
        source=AnswerSource.EXTRACTOR,
        extractor_id=extractor_id,
    )


def extract_factor(
    factor: DecisionFactor,
    record: PatientRecord,
    extractor: Extractor,
    *,
    sentences_by_doc: Mapping[str, list[Sentence]] | None = None,
) -> FactorAnswer:
    """Answer one factor question against one record.

    Structured date expressions are computed locally and bypass the backend.
    Backend failures and citation rejections degrade to UNKNOWN.
    """
    if sentences_by_doc is None:
        sentences_by_doc = build_sentence_index(record)

    structured_value = record.structured_fields.get(factor.name)
    if is_date_expression(structured_value):
        value, explanation = evaluate_date_expression(
            structured_value, record.structured_fields
        )
        return FactorAnswer(
            factor_name=factor.name,
            value=value,
            explanation=explanation,
            citations=(),
            source=AnswerSource.EXTRACTOR,
            extractor_id=DATE_TOOL_EXTRACTOR_ID,
        )

    request = ExtractionRequest(
        factor_name=factor.name,
        question=factor.question,
        sentences=tuple(
            sentence
            for doc in record.documents
            for sentence in sentences_by_doc[doc.doc_id]
        ),
        structured_fields=record.structured_fields,
    )
    try:
        reply: ExtractionReply = extractor.answer(request)
    except ExtractorUnavailable as exc:
        return _unknown(
            factor, f"Extraction backend unavailable: {exc}", extractor.extractor_id
        )
    except Exception as exc:  # a misbehaving backend must not sink the run
        return _unknown(
            factor,
            f"Extraction backend failed ({type(exc).__name__}: {exc})",
            extractor.extractor_id,
        )

    try:
        value = TriBool.from_text(reply.value)
    except ValueError:
        return _unknown(
            factor,
            f"Extraction backend returned an invalid value {reply.value!r}; "
            f"treating the answer as unknown.",
            extractor.extractor_id,
        )

    try:
        validate_citations(reply.citations, sentences_by_doc)
    except CitationError as exc:
        return _unknown(
            factor,
            f"Answer rejected: cited evidence could not be verified against "
            f"the record ({exc}). Original answer was {reply.value!r}.",
            extractor.extractor_id,
        )

    return FactorAnswer(
        factor_name=factor.name,
        value=value,
        explanation=reply.explanation,
        citations=tuple((c.doc_id, c.sentence_index) for c in reply.citations),
        source=AnswerSource.EXTRACTOR,
        extractor_id=extractor.extractor_id,
    )


def extract_all(
    effective_kb: EffectiveKB,
    record: PatientRecord,
    extractor: Extractor,
    *,
    max_workers: int = 8,
) -> AnswerSet:
    """Answer every factor any rule in the effective KB mentions.

    Factors extract independently, concurrently when the backend allows it;
    the result does not depend on scheduling order.
    """
    factors = effective_kb.required_factors()
    if not factors:
        raise EmptyFactorSet("the effective knowledge base references no factors")
    sentences_by_doc = build_sentence_index(record)

    def one(factor: DecisionFactor) -> FactorAnswer:
        return extract_factor(
            factor, record, extractor, sentences_by_doc=sentences_by_doc
        )

    if extractor.concurrency_safe and len(factors) > 1:
        with ThreadPoolExecutor(max_workers=min(max_workers, len(factors))) as pool:
            results = list(pool.map(one, factors))
    else:
        results = [one(factor) for factor in factors]

    return AnswerSet(
        record_ref=record.patient_id,
        kb_refs=tuple(effective_kb.stack),
        answers={answer.factor_name: answer for answer in results},
    )
