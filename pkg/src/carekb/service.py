"""HTTP interface: knowledge-base registry plus review sessions.

Every domain error maps to exactly one (status, code) pair and a JSON body
of ``{"code", "message"}``, so clients can branch on codes instead of
parsing prose. Session mutations carry the caller's last-seen revision and
fail with 409 when it is stale; retrying a successful mutation therefore
cannot apply twice.
"""

from __future__ import annotations

import json
import os
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from fastapi import Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import errors as err
from .extractors import Extractor, LlmExtractor, MockExtractor
from .kb import kb_to_document, load_kb, parse_kb_document
from .lint import has_errors, lint_kb
from .records import build_sentence_index, load_record
from .registry import Registry, register_kb_document
from .session import (
    ReviewSession,
    SessionStore,
    adjust_recommendation,
    create_session,
    export_plan,
    finalize,
    finalize_step1,
    override_factor,
)
from .stats import STAGES, compute_stats
from .tribool import TriBool

TOKEN_ENV = "CAREKB_API_TOKEN"
LLM_URL_ENV = "CAREKB_LLM_BASE_URL"
LLM_KEY_ENV = "CAREKB_LLM_API_KEY"


@dataclass
class ServiceConfig:
    registry_dir: str
    session_dir: str
    extractor: str = "mock"  # "mock" or "llm"
    mock_config_path: str | None = None
    records_dir: str | None = None
    api_token: str | None = None

    @classmethod
    def from_env(cls, **overrides: Any) -> "ServiceConfig":
        values: dict[str, Any] = {
            "registry_dir": os.environ.get("CAREKB_REGISTRY_DIR", "registry"),
            "session_dir": os.environ.get("CAREKB_SESSION_DIR", "sessions"),
            "extractor": os.environ.get("CAREKB_EXTRACTOR", "mock"),
            "mock_config_path": os.environ.get("CAREKB_MOCK_CONFIG"),
            "records_dir": os.environ.get("CAREKB_RECORDS_DIR"),
            "api_token": os.environ.get(TOKEN_ENV),
        }
        values.update(overrides)
        return cls(**values)


def build_extractor(config: ServiceConfig) -> Extractor:
    if config.extractor == "mock":
        if config.mock_config_path:
            return MockExtractor.from_file(config.mock_config_path)
        return MockExtractor({})
    if config.extractor == "llm":
        base_url = os.environ.get(LLM_URL_ENV)
        if not base_url:
            raise err.ConfigError(
                f"the llm extractor needs {LLM_URL_ENV} in the environment"
            )
        return LlmExtractor(base_url, api_key=os.environ.get(LLM_KEY_ENV))
    raise err.ConfigError(f"unknown extractor kind: {config.extractor!r}")


# --- error mapping -------------------------------------------------------------

_ERROR_MAP: list[tuple[type[Exception], int, str]] = [
    (err.ParseError, 422, "parse_error"),
    (err.DepthExceeded, 422, "depth_exceeded"),
    (err.UnboundVariable, 422, "unbound_variable"),
    (err.SchemaError, 422, "schema_error"),
    (err.UndefinedAtom, 422, "undefined_atom"),
    (err.DuplicateName, 422, "duplicate_name"),
    (err.LintBlocked, 422, "lint_blocked"),
    (err.VersionConflict, 409, "version_conflict"),
    (err.NotFound, 404, "not_found"),
    (err.EmptyStack, 422, "empty_stack"),
    (err.IntegrityError, 500, "integrity_error"),
    (err.ExtractorUnavailable, 502, "extractor_unavailable"),
    (err.CitationError, 422, "citation_error"),
    (err.InvalidDate, 422, "invalid_date"),
    (err.NegativeInterval, 422, "negative_interval"),
    (err.EmptyFactorSet, 422, "empty_factor_set"),
    (err.WrongState, 409, "wrong_state"),
    (err.UnknownFactor, 404, "unknown_factor"),
    (err.NoChange, 422, "no_change"),
    (err.UnknownRecommendation, 404, "unknown_recommendation"),
    (err.DuplicateId, 409, "duplicate_id"),
    (err.InvalidAction, 422, "invalid_action"),
    (err.MissingAnswer, 422, "missing_answer"),
    (err.ConflictError, 409, "conflict"),
    (err.EmptyInput, 422, "empty_input"),
    (err.ConfigError, 500, "config_error"),
]


def _map_error(exc: Exception) -> tuple[int, str]:
    for klass, status, code in _ERROR_MAP:
        if type(exc) is klass:
            return status, code
    for klass, status, code in _ERROR_MAP:
        if isinstance(exc, klass):
            return status, code
    return 500, "internal_error"


# --- request bodies -------------------------------------------------------------


class CreateSessionBody(BaseModel):
    stack: list[str]
    record: dict[str, Any] | None = None
    record_ref: str | None = None


class OverrideFactorBody(BaseModel):
    value: str
    reason: str
    revision: int


class RevisionBody(BaseModel):
    revision: int


class AdjustRecommendationBody(BaseModel):
    action: str
    payload: dict[str, Any] = Field(default_factory=dict)
    reason: str
    revision: int


# --- session coordination --------------------------------------------------------


class SessionHub:
    """Live sessions with per-session write locks backed by the store."""

    def __init__(self, store: SessionStore, registry: Registry, extractor: Extractor):
        self.store = store
        self.registry = registry
        self.extractor = extractor
        self._cache: dict[str, ReviewSession] = {}
        self._locks: defaultdict[str, threading.Lock] = defaultdict(threading.Lock)
        self._guard = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks[session_id]

    def create(self, record_data: dict[str, Any], stack: list[str]) -> ReviewSession:
        record = load_record(record_data)
        session = create_session(record, stack, self.extractor, self.registry)
        self.store.create(session)
        with self._guard:
            self._cache[session.session_id] = session
        return session

    def get(self, session_id: str) -> ReviewSession:
        with self._guard:
            cached = self._cache.get(session_id)
        if cached is not None:
            return cached
        session = self.store.load(session_id)
        with self._guard:
            self._cache.setdefault(session_id, session)
            return self._cache[session_id]

    def mutate(self, session_id: str, revision: int, operation) -> ReviewSession:
        with self._lock(session_id):
            session = self.get(session_id)
            session.require_revision(revision)
            event = operation(session)
            self.store.append_event(session_id, event)
            return session


# --- views ------------------------------------------------------------------------


def session_view(session: ReviewSession) -> dict[str, Any]:
    return {
        "session_id": session.session_id,
        "patient_id": session.patient_id,
        "state": session.state.value,
        "revision": session.revision,
        "created_at": session.created_at,
        "finalized_at": session.finalized_at,
        "extractor_id": session.extractor_id,
        "stack": list(session.stack),
        "overrides": [o.to_dict() for o in session.effective_kb.overrides],
        "warnings": [w.to_dict() for w in session.effective_kb.warnings],
    }


def factors_view(session: ReviewSession) -> dict[str, Any]:
    sentences = build_sentence_index(session.record)
    assert session.answers is not None
    factors = []
    for name in sorted(session.answers.answers):
        answer = session.answers.answers[name]
        factor = session.effective_kb.factors[name]
        factors.append(
            {
                "name": name,
                "question": factor.question,
                "value": answer.value.as_answer(),
                "explanation": answer.explanation,
                "citations": [
                    {
                        "doc_id": doc_id,
                        "index": index,
                        "text": sentences[doc_id][index].text,
                    }
                    for doc_id, index in answer.citations
                ],
                "source": answer.source.value,
                "extractor_id": answer.extractor_id,
            }
        )
    return {"revision": session.revision, "state": session.state.value, "factors": factors}


def recommendations_view(session: ReviewSession) -> dict[str, Any]:
    return {
        "revision": session.revision,
        "state": session.state.value,
        "results": [r.to_dict() for r in session.results],
    }


# --- application -------------------------------------------------------------------


def create_app(config: ServiceConfig) -> FastAPI:
    registry = Registry(config.registry_dir)
    store = SessionStore(config.session_dir)
    extractor = build_extractor(config)
    hub = SessionHub(store, registry, extractor)

    async def require_token(request: Request) -> None:
        if not config.api_token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {config.api_token}":
            raise err.NotFound("not found")  # do not leak which routes exist

    app = FastAPI(title="carekb", dependencies=[Depends(require_token)])
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.hub = hub
    app.state.registry = registry

    @app.exception_handler(err.CarekbError)
    async def handle_domain_error(_request: Request, exc: err.CarekbError):
        status, code = _map_error(exc)
        return JSONResponse(
            status_code=status, content={"code": code, "message": str(exc)}
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"code": "validation_error", "message": str(exc.errors()[:3])},
        )

    # -- health --

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    # -- knowledge bases --

    @app.post("/kb", status_code=201)
    def register_kb(document: dict[str, Any]):
        artifact = register_kb_document(registry, document)
        return {
            "namespace": artifact.kb.namespace,
            "version": artifact.kb.version,
            "content_hash": artifact.content_hash,
            "created_at": artifact.created_at,
        }

    @app.get("/kb")
    def list_kbs():
        return {"artifacts": registry.list_artifacts()}

    @app.get("/kb/{namespace}/{version}")
    def get_kb(namespace: str, version: str):
        artifact = registry.resolve(namespace, version)
        return {
            "namespace": artifact.kb.namespace,
            "version": artifact.kb.version,
            "content_hash": artifact.content_hash,
            "created_at": artifact.created_at,
            "kb": kb_to_document(artifact.kb),
        }

    @app.post("/kb/{namespace}/{version}/lint")
    def lint_registered_kb(namespace: str, version: str):
        artifact = registry.resolve(namespace, version)
        findings = lint_kb(artifact.kb)
        return {
            "findings": [f.to_dict() for f in findings],
            "errors": has_errors(findings),
        }

    # -- sessions --

    def _record_from_body(body: CreateSessionBody) -> dict[str, Any]:
        if body.record is not None:
            return body.record
        if body.record_ref:
            if not config.records_dir:
                raise err.ConfigError("record_ref needs a configured records_dir")
            if "/" in body.record_ref or body.record_ref.startswith("."):
                raise err.SchemaError(f"invalid record_ref: {body.record_ref!r}")
            path = Path(config.records_dir) / f"{body.record_ref}.json"
            if not path.exists():
                raise err.NotFound(f"no record {body.record_ref!r}")
            return json.loads(path.read_text("utf-8"))
        raise err.SchemaError("request needs either record or record_ref")

    @app.post("/sessions", status_code=201)
    def post_session(body: CreateSessionBody):
        session = hub.create(_record_from_body(body), body.stack)
        return session_view(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return session_view(hub.get(session_id))

    @app.get("/sessions/{session_id}/factors")
    def get_factors(session_id: str):
        return factors_view(hub.get(session_id))

    @app.patch("/sessions/{session_id}/factors/{factor_name}")
    def patch_factor(session_id: str, factor_name: str, body: OverrideFactorBody):
        try:
            value = TriBool.from_text(body.value)
        except ValueError as exc:
            raise err.InvalidAction(str(exc)) from exc
        session = hub.mutate(
            session_id,
            body.revision,
            lambda s: override_factor(s, factor_name, value, body.reason),
        )
        return factors_view(session)

    @app.post("/sessions/{session_id}/finalize-step1")
    def post_finalize_step1(session_id: str, body: RevisionBody):
        session = hub.mutate(
            session_id, body.revision, lambda s: finalize_step1(s)
        )
        return recommendations_view(session)

    @app.get("/sessions/{session_id}/recommendations")
    def get_recommendations(session_id: str):
        return recommendations_view(hub.get(session_id))

    @app.patch("/sessions/{session_id}/recommendations/{recommendation_id}")
    def patch_recommendation(
        session_id: str, recommendation_id: str, body: AdjustRecommendationBody
    ):
        session = hub.mutate(
            session_id,
            body.revision,
            lambda s: adjust_recommendation(
                s,
                body.action,
                body.payload,
                body.reason,
                recommendation_id=recommendation_id,
            ),
        )
        return recommendations_view(session)

    @app.post("/sessions/{session_id}/finalize")
    def post_finalize(session_id: str, body: RevisionBody):
        session = hub.mutate(session_id, body.revision, lambda s: finalize(s))
        return {
            "revision": session.revision,
            "state": session.state.value,
            "finalized_at": session.finalized_at,
        }

    @app.get("/sessions/{session_id}/export")
    def get_export(session_id: str):
        session = hub.get(session_id)
        if session.state.value == "STEP1_FACTOR_REVIEW":
            raise err.WrongState("the plan does not exist until step 1 is finalized")
        return export_plan(session)

    # -- metrics --

    @app.get("/metrics")
    def get_metrics(stage: str):
        if stage not in STAGES:
            raise err.InvalidAction(f"stage must be one of {list(STAGES)}")
        return compute_stats(store.load_all(), stage).to_dict()

    return app


def serve(config: ServiceConfig, *, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the service until interrupted; uvicorn handles signals gracefully."""
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
