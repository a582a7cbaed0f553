// Payload shapes for the review service API. Field names mirror the wire
// format exactly; everything the UI shows comes from these documents.

export type Answer = "yes" | "no" | "unknown";

// Rule values use the logic's own vocabulary rather than the answer surface.
export type TriValue = "true" | "false" | "unknown";

export type SessionState =
  | "STEP1_FACTOR_REVIEW"
  | "STEP2_WORKUP_REVIEW"
  | "FINALIZED";

export type RecommendationStatus =
  | "GAP"
  | "COMPLETE"
  | "NOT_RELEVANT"
  | "INDETERMINATE";

export interface ApiErrorBody {
  code: string;
  message: string;
}

export interface StackOverride {
  recommendation_id: string;
  losing: string;
  winning: string;
}

export interface StackWarning {
  severity: string;
  code: string;
  subject: string;
  message: string;
}

export interface SessionView {
  session_id: string;
  patient_id: string;
  state: SessionState;
  revision: number;
  created_at: string;
  finalized_at: string | null;
  extractor_id: string;
  stack: string[];
  overrides: StackOverride[];
  warnings: StackWarning[];
}

// Citation text is resolved server-side against the stored record; the
// client only ever displays it.
export interface CitationView {
  doc_id: string;
  index: number;
  text: string;
}

export interface FactorView {
  name: string;
  question: string;
  value: Answer;
  explanation: string;
  citations: CitationView[];
  source: string;
  extractor_id: string;
}

export interface FactorsView {
  revision: number;
  state: SessionState;
  factors: FactorView[];
}

export interface RecommendationView {
  id: string;
  title: string;
  category: string;
  relevance: TriValue;
  completion: TriValue;
  status: RecommendationStatus;
  indeterminate_completion: boolean;
  fired_rule: string;
  source_kb: string;
  explanation: string;
}

export interface RecommendationsView {
  revision: number;
  state: SessionState;
  results: RecommendationView[];
}

export interface FinalizeView {
  revision: number;
  state: SessionState;
  finalized_at: string | null;
}

export interface PlanExport {
  patient_id: string;
  stack: string[];
  results: RecommendationView[];
  finalized_at: string | null;
}

export interface KbRegistration {
  namespace: string;
  version: string;
  content_hash: string;
  created_at: string;
}

export type AdjustAction = "edit" | "add" | "remove" | "move";

export interface AdjustPayload {
  id?: string;
  title?: string;
  category?: string;
  explanation?: string;
  status?: RecommendationStatus;
}

export interface CreateSessionBody {
  record?: unknown;
  record_ref?: string;
  stack: string[];
}

export interface MetricsView {
  stage: string;
  total_items: number;
  adjusted_items: number;
  adjustment_percentage: number;
}
