/**
 * The review loop, wired as a plain-DOM single-page app.
 *
 * ask: question form -> POST /ask -> candidate cards (highlighted SQL,
 * confidence, mapping chips, diff marks). feedback: pick a card or "none
 * correct" -> POST /feedback -> hint toast. hints panel: GET/DELETE.
 *
 * Candidates render exactly as received: no client-side reordering except
 * the explicit confidence toggle, and the id posted on feedback is the id
 * the service returned.
 */

import { ApiClient } from "./api.js";
import { mappingChips } from "./diff.js";
import { escapeHtml, highlightSql } from "./highlight.js";
import { ApiError, AskResponse, Candidate } from "./types.js";

export interface AppOptions {
  defaultUser?: string;
  defaultDb?: string;
}

export class ReviewApp {
  private session: AskResponse | null = null;
  private submitting = false;
  private sortByConfidence = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly options: AppOptions = {},
  ) {}

  init(): void {
    this.root.innerHTML = `
      <section class="ask-form">
        <h1>ambisql review</h1>
        <label>user <input id="user-input" value="${escapeHtml(this.options.defaultUser ?? "demo")}"></label>
        <label>database <input id="db-input" value="${escapeHtml(this.options.defaultDb ?? "")}"></label>
        <label>budget <input id="k-input" type="number" min="1" value="5"></label>
        <label class="question-label">question
          <input id="question-input" placeholder="e.g. hometown of students from Utah">
        </label>
        <button id="ask-button">Ask</button>
        <label class="sort-toggle">
          <input type="checkbox" id="sort-toggle"> sort by confidence
        </label>
      </section>
      <div id="banner" class="banner" hidden></div>
      <section id="candidates" class="candidates"></section>
      <div id="toast" class="toast" hidden></div>
      <section class="hints-panel">
        <h2>learned hints</h2>
        <ul id="hints-list"></ul>
      </section>
    `;
    this.el("ask-button").addEventListener("click", () => void this.ask());
    this.el<HTMLInputElement>("question-input").addEventListener(
      "keydown",
      (ev) => {
        if ((ev as KeyboardEvent).key === "Enter") void this.ask();
      },
    );
    this.el<HTMLInputElement>("sort-toggle").addEventListener("change", (ev) => {
      this.sortByConfidence = (ev.target as HTMLInputElement).checked;
      this.renderCandidates();
    });
    void this.refreshHints();
  }

  private el<T extends HTMLElement = HTMLElement>(id: string): T {
    const found = this.root.querySelector(`#${id}`);
    if (!found) throw new Error(`missing element #${id}`);
    return found as T;
  }

  private value(id: string): string {
    return this.el<HTMLInputElement>(id).value.trim();
  }

  // -- ask flow --------------------------------------------------------------

  async ask(): Promise<void> {
    const question = this.value("question-input");
    if (!question) {
      this.showBanner("Type a question first.", "info");
      return;
    }
    this.showBanner("Asking…", "info");
    try {
      this.session = await this.api.ask({
        user_id: this.value("user-input") || "demo",
        db_id: this.value("db-input"),
        question,
        k: Number(this.value("k-input")) || undefined,
      });
    } catch (err) {
      this.session = null;
      this.renderCandidates();
      this.handleAskError(err);
      return;
    }
    this.hideBanner();
    if (this.session.candidates.length === 0) {
      this.showBanner(
        "No confident candidate — every generated query was filtered out. " +
          "Pick “none correct” semantics by re-asking with a larger budget.",
        "warn",
      );
    }
    this.renderCandidates();
    await this.refreshHints();
  }

  private handleAskError(err: unknown): void {
    if (err instanceof ApiError && err.status === 409) {
      this.showBanner(
        `Selector has no calibration artifact (${err.message}). ` +
          "Run: ambisql calibrate --workload … --out calibration.json, " +
          "then restart the service.",
        "error",
      );
      return;
    }
    if (err instanceof ApiError && err.status === 502) {
      this.showBanner("The language-model backend failed.", "error", {
        label: "Retry",
        onClick: () => void this.ask(),
      });
      return;
    }
    const detail = err instanceof Error ? err.message : String(err);
    this.showBanner(`Request failed: ${detail}`, "error");
  }

  private renderCandidates(): void {
    const host = this.el("candidates");
    host.innerHTML = "";
    if (!this.session) return;
    const ordered = [...this.session.candidates];
    if (this.sortByConfidence) {
      // Stable sort on display only; the underlying session order is kept.
      ordered.sort((a, b) => (b.confidence ?? 0) - (a.confidence ?? 0));
    }
    for (const candidate of ordered) {
      host.appendChild(this.candidateCard(candidate));
    }
    if (this.session.candidates.length > 0) {
      const none = document.createElement("button");
      none.id = "none-correct";
      none.textContent = "None of these is correct";
      none.addEventListener("click", () => void this.sendFeedback(null));
      host.appendChild(none);
    }
  }

  private candidateCard(candidate: Candidate): HTMLElement {
    const card = document.createElement("article");
    card.className = "candidate-card";
    card.dataset.candidateId = candidate.id;
    const confidence =
      candidate.confidence === null
        ? "–"
        : `${(candidate.confidence * 100).toFixed(1)}%`;
    const chips = mappingChips(candidate, this.session!.candidates)
      .map(
        (chip) =>
          `<span class="chip${chip.distinguishing ? " diff" : ""}">` +
          `${escapeHtml(chip.entity)} → ${escapeHtml(chip.column)}</span>`,
      )
      .join(" ");
    card.innerHTML = `
      <pre class="sql">${highlightSql(candidate.sql)}</pre>
      <div class="meta">
        <span class="confidence" title="1 − nonconformity score">${confidence}</span>
        <span class="chips">${chips}</span>
      </div>
      <button class="choose">This one is correct</button>
    `;
    card
      .querySelector("button.choose")!
      .addEventListener("click", () => void this.sendFeedback(candidate.id));
    return card;
  }

  // -- feedback flow -----------------------------------------------------------

  async sendFeedback(candidateId: string | null): Promise<void> {
    if (!this.session || this.submitting) return; // double-submit guard
    this.submitting = true;
    try {
      const result = await this.api.feedback(this.session.session_id, candidateId);
      this.session = null;
      this.renderCandidates();
      if (candidateId !== null && result.hints_created.length > 0) {
        const learned = result.hints_created
          .map((h) => `${h.entity} → ${h.preferred}`)
          .join(", ");
        this.showToast(`learned: ${learned}`);
      }
      await this.refreshHints();
    } catch (err) {
      const detail = err instanceof Error ? err.message : String(err);
      this.showBanner(`Feedback failed: ${detail}`, "error");
    } finally {
      this.submitting = false;
    }
  }

  // -- hints panel ---------------------------------------------------------------

  async refreshHints(): Promise<void> {
    const user = this.value("user-input") || "demo";
    let hints;
    try {
      hints = await this.api.hints(user);
    } catch {
      return; // panel is best-effort; the next action refreshes it
    }
    const list = this.el("hints-list");
    list.innerHTML = "";
    if (hints.length === 0) {
      const empty = document.createElement("li");
      empty.className = "empty";
      empty.textContent = "No hints learned yet.";
      list.appendChild(empty);
      return;
    }
    for (const hint of hints) {
      const item = document.createElement("li");
      item.className = "hint";
      item.dataset.hintId = hint.id;
      const label = document.createElement("span");
      label.textContent = hint.text;
      const del = document.createElement("button");
      del.className = "delete-hint";
      del.textContent = "✕";
      del.title = "forget this preference";
      del.addEventListener("click", async () => {
        await this.api.deleteHint(hint.id);
        await this.refreshHints();
      });
      item.append(label, del);
      list.appendChild(item);
    }
  }

  // -- chrome ----------------------------------------------------------------------

  private showBanner(
    message: string,
    kind: "info" | "warn" | "error",
    action?: { label: string; onClick: () => void },
  ): void {
    const banner = this.el("banner");
    banner.hidden = false;
    banner.className = `banner ${kind}`;
    banner.textContent = message;
    if (action) {
      const button = document.createElement("button");
      button.id = "banner-action";
      button.textContent = action.label;
      button.addEventListener("click", action.onClick);
      banner.appendChild(button);
    }
  }

  private hideBanner(): void {
    this.el("banner").hidden = true;
  }

  private showToast(message: string): void {
    const toast = this.el("toast");
    toast.hidden = false;
    toast.textContent = message;
    setTimeout(() => {
      toast.hidden = true;
    }, 4000);
  }
}

export function initApp(
  root: HTMLElement,
  baseUrl = "",
  options: AppOptions = {},
): ReviewApp {
  const app = new ReviewApp(root, new ApiClient(baseUrl), options);
  app.init();
  return app;
}
