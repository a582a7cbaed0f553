import { ApiClient, ApiError } from "./api.js";
import type {
  AdjustAction,
  AdjustPayload,
  Answer,
  ApiErrorBody,
  FactorsView,
  PlanExport,
  RecommendationsView,
  SessionState,
  SessionView,
} from "./types.js";

/** Raised before any request is sent when the input cannot be submitted. */
export class ValidationError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ValidationError";
  }
}

/**
 * Raised when the server rejected a mutation because another tab moved the
 * session forward. By the time this propagates the controller has already
 * refetched, so the caller only needs to re-render and let the clinician
 * retry against the fresh state.
 */
export class ConflictError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConflictError";
  }
}

/** One confirmed mutation, kept client-side for the audit trail panel. */
export interface AuditNote {
  action: string;
  subject: string;
  reason: string;
  revision: number;
}

/**
 * Client-side session state. All fields mirror the last confirmed server
 * reply: nothing here is ever updated optimistically, so a render after any
 * await always shows exactly what the server holds. Mutations send the
 * confirmed revision; a 409 means another writer got there first, in which
 * case the controller refetches before surfacing the conflict.
 */
export class SessionController {
  session: SessionView | null = null;
  factors: FactorsView | null = null;
  recommendations: RecommendationsView | null = null;
  plan: PlanExport | null = null;
  conflict: string | null = null;
  lastError: ApiErrorBody | null = null;
  auditTrail: AuditNote[] = [];

  private confirmedRevision = 0;

  constructor(readonly client: ApiClient) {}

  get sessionId(): string {
    if (!this.session) {
      throw new Error("no session is open");
    }
    return this.session.session_id;
  }

  get state(): SessionState {
    if (!this.session) {
      throw new Error("no session is open");
    }
    return this.session.state;
  }

  get revision(): number {
    return this.confirmedRevision;
  }

  async open(sessionId: string): Promise<void> {
    const session = await this.client.getSession(sessionId);
    this.session = session;
    this.confirmedRevision = session.revision;
    this.factors = await this.client.getFactors(sessionId);
    this.recommendations =
      session.state === "STEP1_FACTOR_REVIEW"
        ? null
        : await this.client.getRecommendations(sessionId);
    this.plan =
      session.state === "FINALIZED"
        ? await this.client.exportPlan(sessionId)
        : null;
    this.conflict = null;
    this.lastError = null;
  }

  /** Re-pull every view for the current state; used after 409 conflicts. */
  async refresh(): Promise<void> {
    await this.open(this.sessionId);
  }

  async overrideFactor(
    factorName: string,
    value: Answer,
    reason: string,
  ): Promise<void> {
    this.requireReason(reason);
    const view = await this.mutate(
      () =>
        this.client.overrideFactor(
          this.sessionId,
          factorName,
          value,
          reason,
          this.confirmedRevision,
        ),
      `override of ${factorName}`,
    );
    this.factors = view;
    this.adopt(view.revision, view.state);
    this.note("override", factorName, reason);
  }

  async finalizeStep1(): Promise<void> {
    const view = await this.mutate(
      () => this.client.finalizeStep1(this.sessionId, this.confirmedRevision),
      "step 1 finalization",
    );
    this.recommendations = view;
    this.adopt(view.revision, view.state);
    this.note("finalize-step1", "step1", "");
  }

  async adjust(
    recommendationId: string,
    action: AdjustAction,
    payload: AdjustPayload | null,
    reason: string,
  ): Promise<void> {
    this.requireReason(reason);
    const view = await this.mutate(
      () =>
        this.client.adjustRecommendation(
          this.sessionId,
          recommendationId,
          action,
          payload,
          reason,
          this.confirmedRevision,
        ),
      `${action} of ${recommendationId}`,
    );
    this.recommendations = view;
    this.adopt(view.revision, view.state);
    this.note(action, recommendationId, reason);
  }

  async finalizeSession(): Promise<void> {
    const view = await this.mutate(
      () =>
        this.client.finalizeSession(this.sessionId, this.confirmedRevision),
      "session finalization",
    );
    this.adopt(view.revision, view.state);
    if (this.session) {
      this.session = { ...this.session, finalized_at: view.finalized_at };
    }
    this.note("finalize", "step2", "");
    this.plan = await this.client.exportPlan(this.sessionId);
  }

  private requireReason(reason: string): void {
    if (!reason.trim()) {
      throw new ValidationError("a reason is required");
    }
  }

  private async mutate<T>(call: () => Promise<T>, doing: string): Promise<T> {
    this.conflict = null;
    this.lastError = null;
    try {
      return await call();
    } catch (error) {
      if (error instanceof ApiError && error.isConflict) {
        await this.refresh();
        this.conflict =
          `The session changed while you were editing; the ${doing} was not ` +
          "applied. The view below is current, please retry.";
        throw new ConflictError(this.conflict);
      }
      if (error instanceof ApiError) {
        this.lastError = error.toBody();
      }
      throw error;
    }
  }

  private adopt(revision: number, state: SessionState): void {
    this.confirmedRevision = revision;
    if (this.session) {
      this.session = { ...this.session, revision, state };
    }
  }

  private note(action: string, subject: string, reason: string): void {
    this.auditTrail.push({
      action,
      subject,
      reason,
      revision: this.confirmedRevision,
    });
  }
}
