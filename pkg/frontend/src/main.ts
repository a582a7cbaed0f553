import { ApiClient } from "./api.js";
import {
  ConflictError,
  SessionController,
  ValidationError,
} from "./state.js";
import type { OverrideDraft } from "./render.js";
import {
  renderAuditTrail,
  renderConflictBanner,
  renderErrorBanner,
  renderFactorScreen,
  renderPlan,
  renderSessionHeader,
  renderWorkupScreen,
} from "./render.js";
import type { AdjustAction, Answer } from "./types.js";

// Thin glue between the pure renderers and the browser. All state lives in
// the controller plus the per-factor form drafts; the app container is
// re-rendered wholesale after every confirmed change.

let controller: SessionController | null = null;
const drafts = new Map<string, OverrideDraft>();
let openFactors = new Set<string>();

function $(selector: string): HTMLElement {
  const node = document.querySelector<HTMLElement>(selector);
  if (!node) {
    throw new Error(`missing element: ${selector}`);
  }
  return node;
}

function inputValue(selector: string): string {
  return (document.querySelector<HTMLInputElement>(selector)?.value ?? "").trim();
}

function render(): void {
  const app = $("#app");
  if (!controller || !controller.session) {
    app.innerHTML = `<p class="hint">Connect to a session to begin.</p>`;
    return;
  }
  const parts: string[] = [renderSessionHeader(controller.session)];
  if (controller.conflict) {
    parts.push(renderConflictBanner(controller.conflict));
  }
  if (controller.lastError) {
    parts.push(renderErrorBanner(controller.lastError));
  }
  if (controller.state === "FINALIZED" && controller.plan) {
    parts.push(renderPlan(controller.plan));
  } else if (controller.state === "STEP2_WORKUP_REVIEW" && controller.recommendations) {
    parts.push(renderWorkupScreen(controller.recommendations));
  } else if (controller.factors) {
    parts.push(renderFactorScreen(controller.factors, drafts));
  }
  parts.push(renderAuditTrail(controller.auditTrail));
  app.innerHTML = parts.join("");
  // Reopen the expandable panels the user had open before the re-render.
  for (const name of openFactors) {
    const panel = app.querySelector<HTMLDetailsElement>(
      `details.factor[data-factor="${CSS.escape(name)}"]`,
    );
    if (panel) {
      panel.open = true;
    }
  }
}

function showProblem(error: unknown): void {
  if (error instanceof ConflictError) {
    // The controller already refetched; render shows the banner.
    render();
    return;
  }
  if (error instanceof ValidationError) {
    window.alert(error.message);
    return;
  }
  render();
  if (!(controller && controller.lastError)) {
    window.alert(String(error));
  }
}

async function connect(): Promise<void> {
  const base = inputValue("#base-url") || window.location.origin;
  const token = inputValue("#token");
  const client = new ApiClient(base, token ? { token } : {});
  controller = new SessionController(client);
  const sessionId = inputValue("#session-id");
  try {
    if (sessionId) {
      await controller.open(sessionId);
    } else {
      const recordText = inputValue("#record-json");
      const stack = inputValue("#stack")
        .split(",")
        .map((ref) => ref.trim())
        .filter(Boolean);
      const view = await client.createSession({
        record: JSON.parse(recordText),
        stack,
      });
      await controller.open(view.session_id);
    }
    drafts.clear();
    openFactors = new Set();
    render();
  } catch (error) {
    showProblem(error);
  }
}

function draftFor(name: string): OverrideDraft {
  let draft = drafts.get(name);
  if (!draft) {
    const factor = controller?.factors?.factors.find((f) => f.name === name);
    draft = { value: factor?.value ?? "unknown", reason: "" };
    drafts.set(name, draft);
  }
  return draft;
}

function wireAppEvents(): void {
  const app = $("#app");

  app.addEventListener("toggle", (event) => {
    const details = event.target as HTMLDetailsElement;
    const name = details.dataset?.["factor"];
    if (!name) return;
    if (details.open) {
      openFactors.add(name);
    } else {
      openFactors.delete(name);
    }
  }, true);

  app.addEventListener("input", (event) => {
    const field = event.target as HTMLInputElement | HTMLSelectElement;
    const form = field.closest<HTMLFormElement>("form.override");
    if (!form || !form.dataset["factor"]) return;
    const draft = draftFor(form.dataset["factor"]);
    if (field.name === "value") {
      draft.value = field.value;
    } else if (field.name === "reason") {
      draft.reason = field.value;
    }
    // Keep the submit gate in sync without a full re-render (typing must
    // not lose focus).
    const factor = controller?.factors?.factors.find(
      (f) => f.name === form.dataset["factor"],
    );
    const button = form.querySelector<HTMLButtonElement>("button[type=submit]");
    if (factor && button) {
      button.disabled =
        draft.reason.trim() === "" || draft.value === factor.value;
    }
  });

  app.addEventListener("submit", (event) => {
    const form = event.target as HTMLFormElement;
    if (!form.classList.contains("override")) return;
    event.preventDefault();
    const name = form.dataset["factor"];
    if (!name || !controller) return;
    const draft = draftFor(name);
    void controller
      .overrideFactor(name, draft.value as Answer, draft.reason)
      .then(() => {
        drafts.delete(name);
        render();
      })
      .catch(showProblem);
  });

  app.addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest("button");
    if (!button || !controller) return;

    if (button.classList.contains("dismiss-conflict")) {
      controller.conflict = null;
      render();
      return;
    }
    if (button.classList.contains("finalize-step1")) {
      void controller.finalizeStep1().then(render).catch(showProblem);
      return;
    }
    if (button.classList.contains("finalize-session")) {
      void controller.finalizeSession().then(render).catch(showProblem);
      return;
    }
    if (button.classList.contains("add-recommendation")) {
      const id = window.prompt("Identifier for the new item (lowercase)?");
      if (!id) return;
      const title = window.prompt("Title?");
      if (!title) return;
      const category = window.prompt("Category?") ?? "other";
      const reason = window.prompt("Reason for adding it?") ?? "";
      void controller
        .adjust(id, "add", { id, title, category }, reason)
        .then(render)
        .catch(showProblem);
      return;
    }

    const action = button.dataset["action"] as AdjustAction | undefined;
    const recId = button.dataset["rec"];
    if (!action || !recId) return;
    if (action === "edit") {
      const current = controller.recommendations?.results.find(
        (r) => r.id === recId,
      );
      const title = window.prompt("New title?", current?.title ?? "");
      if (title === null) return;
      const reason = window.prompt("Reason for the edit?") ?? "";
      void controller
        .adjust(recId, "edit", { title }, reason)
        .then(render)
        .catch(showProblem);
    } else if (action === "move" || action === "remove") {
      const reason = window.prompt(`Reason for the ${action}?`) ?? "";
      void controller
        .adjust(recId, action, null, reason)
        .then(render)
        .catch(showProblem);
    }
  });
}

export function start(): void {
  $("#connect").addEventListener("click", () => void connect());
  wireAppEvents();
  render();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  start();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", start);
}
