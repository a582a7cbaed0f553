"""Extraction backends: the interface plus the two bundled implementations.

A backend answers one factor question at a time from a bag of sentences and
structured fields. It must cite the sentences it relied on; the pipeline
rejects citations that do not resolve, so a backend that fabricates evidence
only ever degrades its answer to UNKNOWN, never corrupts a record.
"""

from __future__ import annotations

import abc
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import httpx

from .datetools import call_tool, tool_specs
from .errors import ExtractorUnavailable, SchemaError
from .records import Sentence


@dataclass(frozen=True)
class CitationClaim:
    """A backend's claim that a stored sentence supports its answer."""

    doc_id: str
    sentence_index: int
    echoed_text: str | None = None


@dataclass(frozen=True)
class ExtractionRequest:
    factor_name: str
    question: str
    sentences: tuple[Sentence, ...]
    structured_fields: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ExtractionReply:
    value: str  # yes | no | unknown
    explanation: str
    citations: tuple[CitationClaim, ...] = field(default_factory=tuple)


class Extractor(abc.ABC):
    """One extraction backend instance, identified for audit purposes."""

    extractor_id: str = "extractor"
    # Backends that keep per-call mutable state must set this to False;
    # the pipeline then serializes calls instead of fanning out.
    concurrency_safe: bool = True

    @abc.abstractmethod
    def answer(self, request: ExtractionRequest) -> ExtractionReply:
        """Answer one factor question. Raise ExtractorUnavailable on transport
        or protocol failure; never guess."""


# --- deterministic mock --------------------------------------------------------


_MATCH_VALUES = frozenset({"yes", "no"})
_ABSENT_VALUES = frozenset({"unknown", "no"})


@dataclass(frozen=True)
class _MockRule:
    pattern: re.Pattern
    value_if_match: str
    value_if_absent: str


class MockExtractor(Extractor):
    """Pattern-driven extractor for offline runs and tests.

    Config maps factor names to ``{"pattern": ..., "value_if_match":
    "yes"|"no", "value_if_absent": "unknown"|"no"}``. The pattern is a
    regular expression when it compiles, a literal substring otherwise; both
    match case-insensitively. A structured field equal to the factor name
    short-circuits pattern matching entirely.
    """

    def __init__(self, config: Mapping[str, Any], extractor_id: str = "mock"):
        self.extractor_id = extractor_id
        self.concurrency_safe = True
        self._rules: dict[str, _MockRule] = {}
        for factor_name, entry in config.items():
            if not isinstance(entry, Mapping):
                raise SchemaError(f"mock config {factor_name}: expected an object")
            pattern = entry.get("pattern")
            if not isinstance(pattern, str) or not pattern:
                raise SchemaError(
                    f"mock config {factor_name}: pattern must be a non-empty string"
                )
            value_if_match = entry.get("value_if_match", "yes")
            value_if_absent = entry.get("value_if_absent", "unknown")
            if value_if_match not in _MATCH_VALUES:
                raise SchemaError(
                    f"mock config {factor_name}: value_if_match must be yes or no"
                )
            if value_if_absent not in _ABSENT_VALUES:
                raise SchemaError(
                    f"mock config {factor_name}: value_if_absent must be unknown or no"
                )
            try:
                compiled = re.compile(pattern, re.IGNORECASE)
            except re.error:
                compiled = re.compile(re.escape(pattern), re.IGNORECASE)
            self._rules[factor_name] = _MockRule(compiled, value_if_match, value_if_absent)

    @classmethod
    def from_file(cls, path: str | Path, extractor_id: str = "mock") -> "MockExtractor":
        try:
            config = json.loads(Path(path).read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"mock config is not valid JSON: {exc}") from exc
        if not isinstance(config, Mapping):
            raise SchemaError("mock config: expected an object")
        return cls(config, extractor_id=extractor_id)

    @staticmethod
    def _structured_answer(request: ExtractionRequest) -> ExtractionReply | None:
        raw = request.structured_fields.get(request.factor_name)
        if isinstance(raw, bool):
            raw = "yes" if raw else "no"
        if not isinstance(raw, str):
            return None
        normalized = raw.strip().lower()
        if normalized not in {"yes", "no", "unknown", "true", "false"}:
            return None
        value = {"true": "yes", "false": "no"}.get(normalized, normalized)
        return ExtractionReply(
            value=value,
            explanation=(
                f"Structured field {request.factor_name!r} answers the "
                f"question directly: {raw!r}."
            ),
        )

    def answer(self, request: ExtractionRequest) -> ExtractionReply:
        structured = self._structured_answer(request)
        if structured is not None:
            return structured
        rule = self._rules.get(request.factor_name)
        if rule is None:
            return ExtractionReply(
                value="unknown",
                explanation=(
                    f"No extraction rule is configured for factor "
                    f"{request.factor_name!r}."
                ),
            )
        for sentence in request.sentences:
            if rule.pattern.search(sentence.text):
                return ExtractionReply(
                    value=rule.value_if_match,
                    explanation=(
                        f"Matched pattern {rule.pattern.pattern!r} in document "
                        f"{sentence.doc_id!r}: {sentence.text!r}."
                    ),
                    citations=(
                        CitationClaim(sentence.doc_id, sentence.index, sentence.text),
                    ),
                )
        return ExtractionReply(
            value=rule.value_if_absent,
            explanation=(
                f"Pattern {rule.pattern.pattern!r} matched no sentence in the record."
            ),
        )


# --- HTTP backend ---------------------------------------------------------------


class LlmExtractor(Extractor):
    """Client for a chat-style extraction service.

    Sends the question, candidate sentences, and structured fields; the
    service must reply with ``{"value", "explanation", "citations"}`` or ask
    for one of the advertised date tools via ``{"tool_call": {"name",
    "arguments"}}``, in which case the tool runs locally and its result is
    appended to the next request.
    """

    MAX_TOOL_ROUNDS = 4

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        *,
        timeout: float = 30.0,
        retries: int = 2,
        backoff: float = 0.5,
        extractor_id: str = "llm",
        transport: httpx.BaseTransport | None = None,
    ):
        self.extractor_id = extractor_id
        self.concurrency_safe = True
        self._url = base_url
        self._retries = retries
        self._backoff = backoff
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            timeout=timeout, headers=headers, transport=transport
        )

    def _post(self, payload: dict[str, Any]) -> dict[str, Any]:
        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            if attempt:
                time.sleep(self._backoff * 2 ** (attempt - 1))
            try:
                response = self._client.post(self._url, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = ExtractorUnavailable(
                    f"extraction service returned {response.status_code}"
                )
                continue
            if response.status_code >= 400:
                raise ExtractorUnavailable(
                    f"extraction service rejected the request "
                    f"({response.status_code}): {response.text[:200]}"
                )
            try:
                data = response.json()
            except ValueError as exc:
                raise ExtractorUnavailable(
                    "extraction service replied with invalid JSON"
                ) from exc
            if not isinstance(data, dict):
                raise ExtractorUnavailable(
                    "extraction service reply is not an object"
                )
            return data
        raise ExtractorUnavailable(
            f"extraction service unreachable after {self._retries + 1} attempts: "
            f"{last_error}"
        )

    @staticmethod
    def _parse_reply(data: Mapping[str, Any]) -> ExtractionReply:
        value = data.get("value")
        if value not in ("yes", "no", "unknown"):
            raise ExtractorUnavailable(
                f"extraction service returned invalid value {value!r}"
            )
        citations = []
        raw_citations = data.get("citations", [])
        if not isinstance(raw_citations, list):
            raise ExtractorUnavailable("citations must be an array")
        for entry in raw_citations:
            if (
                not isinstance(entry, Mapping)
                or not isinstance(entry.get("doc_id"), str)
                or not isinstance(entry.get("sentence_index"), int)
            ):
                raise ExtractorUnavailable(f"malformed citation: {entry!r}")
            echoed = entry.get("echoed_text")
            if echoed is not None and not isinstance(echoed, str):
                raise ExtractorUnavailable(f"malformed citation echo: {entry!r}")
            citations.append(
                CitationClaim(entry["doc_id"], entry["sentence_index"], echoed)
            )
        explanation = data.get("explanation", "")
        if not isinstance(explanation, str):
            raise ExtractorUnavailable("explanation must be a string")
        return ExtractionReply(value, explanation, tuple(citations))

    def answer(self, request: ExtractionRequest) -> ExtractionReply:
        payload: dict[str, Any] = {
            "factor": request.factor_name,
            "question": request.question,
            "sentences": [
                {"doc_id": s.doc_id, "index": s.index, "text": s.text}
                for s in request.sentences
            ],
            "structured_fields": dict(request.structured_fields),
            "tools": tool_specs(),
            "tool_results": [],
        }
        for _ in range(self.MAX_TOOL_ROUNDS):
            data = self._post(payload)
            tool_call = data.get("tool_call")
            if tool_call is None:
                return self._parse_reply(data)
            if not isinstance(tool_call, Mapping) or not isinstance(
                tool_call.get("name"), str
            ):
                raise ExtractorUnavailable(f"malformed tool call: {tool_call!r}")
            name = tool_call["name"]
            arguments = tool_call.get("arguments", {})
            if not isinstance(arguments, Mapping):
                raise ExtractorUnavailable(f"malformed tool arguments: {arguments!r}")
            try:
                result: Any = call_tool(name, arguments)
            except Exception as exc:  # surfaced to the service, not fatal here
                result = {"error": str(exc)}
            payload["tool_results"] = payload["tool_results"] + [
                {"name": name, "arguments": dict(arguments), "result": result}
            ]
        raise ExtractorUnavailable(
            f"extraction service exceeded {self.MAX_TOOL_ROUNDS} tool rounds"
        )

    def close(self) -> None:
        self._client.close()
