import type {
  ApiErrorBody,
  CitationView,
  FactorView,
  FactorsView,
  PlanExport,
  RecommendationStatus,
  RecommendationView,
  RecommendationsView,
  SessionView,
} from "./types.js";
import type { AuditNote } from "./state.js";

// Pure string renderers: no DOM access, no mutation, so every screen can be
// asserted on in node without a browser.

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function attr(text: string): string {
  return escapeHtml(text);
}

export function renderValueBadge(value: string): string {
  return `<span class="badge value-${attr(value)}">${escapeHtml(value)}</span>`;
}

export function renderCitations(citations: CitationView[]): string {
  if (citations.length === 0) {
    return `<p class="no-citations">No citations recorded.</p>`;
  }
  const items = citations
    .map(
      (citation) =>
        `<li><span class="doc-label">${escapeHtml(citation.doc_id)} ` +
        `· sentence ${citation.index + 1}</span> ` +
        `<q>${escapeHtml(citation.text)}</q></li>`,
    )
    .join("");
  return `<ul class="citations">${items}</ul>`;
}

export interface OverrideDraft {
  value: string;
  reason: string;
}

/**
 * The override form for one factor. Submit stays disabled until the draft
 * carries a non-blank reason and a value different from the current answer.
 */
export function renderOverrideForm(
  factor: FactorView,
  draft: OverrideDraft,
): string {
  const options = (["yes", "no", "unknown"] as const)
    .map(
      (value) =>
        `<option value="${value}"${draft.value === value ? " selected" : ""}>` +
        `${value}</option>`,
    )
    .join("");
  const submittable = draft.reason.trim() !== "" && draft.value !== factor.value;
  return (
    `<form class="override" data-factor="${attr(factor.name)}">` +
    `<label>New answer <select name="value">${options}</select></label>` +
    `<label>Reason <input name="reason" required ` +
    `value="${attr(draft.reason)}" ` +
    `placeholder="Why the extracted answer is wrong"></label>` +
    `<button type="submit"${submittable ? "" : " disabled"}>Override</button>` +
    `</form>`
  );
}

export function renderFactorItem(
  factor: FactorView,
  draft: OverrideDraft,
  readOnly: boolean,
): string {
  return (
    `<details class="factor" data-factor="${attr(factor.name)}">` +
    `<summary><code>${escapeHtml(factor.name)}</code> ` +
    `${escapeHtml(factor.question)} ${renderValueBadge(factor.value)} ` +
    `<span class="source">${escapeHtml(factor.source)}</span></summary>` +
    `<div class="factor-detail">` +
    `<p class="explanation">${escapeHtml(factor.explanation)}</p>` +
    renderCitations(factor.citations) +
    (readOnly ? "" : renderOverrideForm(factor, draft)) +
    `</div></details>`
  );
}

export function renderFactorScreen(
  view: FactorsView,
  drafts: Map<string, OverrideDraft>,
): string {
  const readOnly = view.state !== "STEP1_FACTOR_REVIEW";
  const items = view.factors
    .map((factor) =>
      renderFactorItem(
        factor,
        drafts.get(factor.name) ?? { value: factor.value, reason: "" },
        readOnly,
      ),
    )
    .join("");
  const finalize = readOnly
    ? ""
    : `<button class="finalize-step1" type="button">Confirm factors and ` +
      `build the plan</button>`;
  return (
    `<section class="factor-screen"><h2>Step 1 · Decision factors</h2>` +
    `${items}${finalize}</section>`
  );
}

const GROUPS: ReadonlyArray<[RecommendationStatus, string]> = [
  ["GAP", "Gaps"],
  ["COMPLETE", "Complete"],
  ["INDETERMINATE", "Indeterminate"],
  ["NOT_RELEVANT", "Not relevant"],
];

function renderActions(item: RecommendationView): string {
  const movable = item.status === "GAP" || item.status === "COMPLETE";
  const moveLabel = item.status === "GAP" ? "Mark complete" : "Reopen as gap";
  return (
    `<span class="actions">` +
    `<button type="button" data-action="edit" data-rec="${attr(item.id)}">Edit</button>` +
    (movable
      ? `<button type="button" data-action="move" data-rec="${attr(item.id)}">` +
        `${moveLabel}</button>`
      : "") +
    `<button type="button" data-action="remove" data-rec="${attr(item.id)}">Remove</button>` +
    `</span>`
  );
}

export function renderWorkupItem(
  item: RecommendationView,
  readOnly: boolean,
): string {
  const flag = item.indeterminate_completion
    ? ` <span class="flag">completion undetermined</span>`
    : "";
  return (
    `<li class="workup-item status-${item.status}" data-rec="${attr(item.id)}">` +
    `<strong>${escapeHtml(item.title)}</strong> ` +
    `<span class="category">${escapeHtml(item.category)}</span>${flag}` +
    `<p class="explanation">${escapeHtml(item.explanation)}</p>` +
    (readOnly ? "" : renderActions(item)) +
    `</li>`
  );
}

export function renderWorkupScreen(view: RecommendationsView): string {
  const readOnly = view.state !== "STEP2_WORKUP_REVIEW";
  const sections = GROUPS.map(([status, heading]) => {
    const items = view.results
      .filter((item) => item.status === status)
      .map((item) => renderWorkupItem(item, readOnly))
      .join("");
    return (
      `<section class="group group-${status}"><h3>${heading}</h3>` +
      `<ul>${items || "<li class='empty'>None</li>"}</ul></section>`
    );
  }).join("");
  const controls = readOnly
    ? ""
    : `<button class="add-recommendation" type="button">Add an item</button>` +
      `<button class="finalize-session" type="button">Finalize the plan</button>`;
  return (
    `<section class="workup-screen"><h2>Step 2 · Workup plan</h2>` +
    `${sections}${controls}</section>`
  );
}

export function renderPlan(plan: PlanExport): string {
  const rows = plan.results
    .map(
      (item) =>
        `<tr><td>${escapeHtml(item.id)}</td><td>${escapeHtml(item.title)}</td>` +
        `<td>${escapeHtml(item.category)}</td><td>${item.status}</td></tr>`,
    )
    .join("");
  return (
    `<section class="plan"><h2>Finalized plan for ` +
    `${escapeHtml(plan.patient_id)}</h2>` +
    `<p>Stack: ${plan.stack.map(escapeHtml).join(" &lt; ")} · finalized ` +
    `${escapeHtml(plan.finalized_at ?? "")}</p>` +
    `<table><thead><tr><th>Id</th><th>Title</th><th>Category</th>` +
    `<th>Status</th></tr></thead><tbody>${rows}</tbody></table></section>`
  );
}

export function renderConflictBanner(message: string): string {
  return `<div class="banner conflict" role="alert">${escapeHtml(message)} <button type="button" class="dismiss-conflict">Dismiss</button></div>`;
}

export function renderErrorBanner(error: ApiErrorBody): string {
  return (
    `<div class="banner error" role="alert">` +
    `<code>${escapeHtml(error.code)}</code> ${escapeHtml(error.message)}</div>`
  );
}

export function renderAuditTrail(notes: AuditNote[]): string {
  if (notes.length === 0) {
    return "";
  }
  const items = notes
    .map(
      (note) =>
        `<li><code>${escapeHtml(note.action)}</code> ` +
        `${escapeHtml(note.subject)}` +
        (note.reason ? `: <q>${escapeHtml(note.reason)}</q>` : "") +
        ` <span class="revision">rev ${note.revision}</span></li>`,
    )
    .join("");
  return `<aside class="audit-trail"><h3>This session's changes</h3><ul>${items}</ul></aside>`;
}

export function renderSessionHeader(session: SessionView): string {
  const overrides =
    session.overrides.length === 0
      ? ""
      : `<p class="stack-overrides">${session.overrides.length} recommendation(s) ` +
        `redefined by a higher layer</p>`;
  return (
    `<header class="session"><h1>Review of ${escapeHtml(session.patient_id)}</h1>` +
    `<p>Session <code>${escapeHtml(session.session_id)}</code> · ` +
    `${escapeHtml(session.state)} · revision ${session.revision} · ` +
    `stack ${session.stack.map(escapeHtml).join(", ")}</p>${overrides}</header>`
  );
}
