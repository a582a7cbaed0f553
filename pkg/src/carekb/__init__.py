"""Guideline logic as versioned knowledge bases, evaluated over extracted
patient facts, reviewed step by step by a clinician."""

from .tribool import TriBool
from .rules import (
    And,
    Const,
    Formula,
    Implies,
    Not,
    Or,
    Var,
    eval_formula,
    format_formula,
    free_variables,
    parse_formula,
)
from .kb import DecisionFactor, KnowledgeBase, Recommendation, load_kb
from .lint import LintCode, LintFinding, LintSeverity, lint_kb
from .registry import Registry, VersionedArtifact, snapshot
from .stacking import EffectiveKB, resolve_stack
from .records import Document, PatientRecord, Sentence, load_record, segment
from .datetools import age_at, days_between
from .extractors import Extractor, LlmExtractor, MockExtractor
from .extraction import AnswerSet, FactorAnswer, extract_all, extract_factor, validate_citations
from .evaluation import (
    RecommendationResult,
    RecommendationStatus,
    derive_status,
    evaluate,
    explain,
)
from .session import (
    AuditEvent,
    AuditKind,
    ReviewSession,
    SessionState,
    SessionStore,
    adjust_recommendation,
    create_session,
    export_plan,
    finalize,
    finalize_step1,
    override_factor,
)
from .stats import AdjustmentStats, compute_stats

__all__ = [name for name in dir() if not name.startswith("_")]
