import type {
  AdjustAction,
  AdjustPayload,
  Answer,
  ApiErrorBody,
  CreateSessionBody,
  FactorsView,
  FinalizeView,
  KbRegistration,
  MetricsView,
  PlanExport,
  RecommendationsView,
  SessionView,
} from "./types.js";

/** A non-2xx reply, carrying the service's {code, message} body. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
  }

  get isConflict(): boolean {
    return this.status === 409;
  }

  toBody(): ApiErrorBody {
    return { code: this.code, message: this.detail };
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export interface ApiClientOptions {
  token?: string;
  fetchImpl?: FetchLike;
}

/**
 * Thin typed wrapper over the service endpoints. Holds no session state;
 * every mutating call takes the caller's confirmed revision explicitly.
 */
export class ApiClient {
  private readonly baseUrl: string;
  private readonly token: string | undefined;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, options: ApiClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.token = options.token;
    this.fetchImpl =
      options.fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = { accept: "application/json" };
    if (this.token) {
      headers["authorization"] = `Bearer ${this.token}`;
    }
    const init: RequestInit = { method, headers };
    if (body !== undefined) {
      headers["content-type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let code = `http_${response.status}`;
      let message = response.statusText || "request failed";
      try {
        const parsed = (await response.json()) as Partial<ApiErrorBody>;
        if (typeof parsed.code === "string") code = parsed.code;
        if (typeof parsed.message === "string") message = parsed.message;
      } catch {
        // Non-JSON error body; keep the HTTP-level description.
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  registerKb(document: unknown): Promise<KbRegistration> {
    return this.request("POST", "/kb", document);
  }

  createSession(body: CreateSessionBody): Promise<SessionView> {
    return this.request("POST", "/sessions", body);
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  getFactors(sessionId: string): Promise<FactorsView> {
    return this.request(
      "GET",
      `/sessions/${encodeURIComponent(sessionId)}/factors`,
    );
  }

  overrideFactor(
    sessionId: string,
    factorName: string,
    value: Answer,
    reason: string,
    revision: number,
  ): Promise<FactorsView> {
    return this.request(
      "PATCH",
      `/sessions/${encodeURIComponent(sessionId)}/factors/${encodeURIComponent(factorName)}`,
      { value, reason, revision },
    );
  }

  finalizeStep1(
    sessionId: string,
    revision: number,
  ): Promise<RecommendationsView> {
    return this.request(
      "POST",
      `/sessions/${encodeURIComponent(sessionId)}/finalize-step1`,
      { revision },
    );
  }

  getRecommendations(sessionId: string): Promise<RecommendationsView> {
    return this.request(
      "GET",
      `/sessions/${encodeURIComponent(sessionId)}/recommendations`,
    );
  }

  adjustRecommendation(
    sessionId: string,
    recommendationId: string,
    action: AdjustAction,
    payload: AdjustPayload | null,
    reason: string,
    revision: number,
  ): Promise<RecommendationsView> {
    const body: Record<string, unknown> = { action, reason, revision };
    if (payload !== null) {
      body["payload"] = payload;
    }
    return this.request(
      "PATCH",
      `/sessions/${encodeURIComponent(sessionId)}/recommendations/${encodeURIComponent(recommendationId)}`,
      body,
    );
  }

  finalizeSession(sessionId: string, revision: number): Promise<FinalizeView> {
    return this.request(
      "POST",
      `/sessions/${encodeURIComponent(sessionId)}/finalize`,
      { revision },
    );
  }

  exportPlan(sessionId: string): Promise<PlanExport> {
    return this.request(
      "GET",
      `/sessions/${encodeURIComponent(sessionId)}/export`,
    );
  }

  metrics(stage: "step1" | "step2"): Promise<MetricsView> {
    return this.request("GET", `/metrics?stage=${stage}`);
  }
}
