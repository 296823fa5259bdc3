/** Review loop: fetch the next pair, render it, capture one decision,
 * submit, refresh. The session owns no clustering logic; every state change
 * round-trips through the API. */

import { ApiClient, ApiError } from "./api.js";
import type { AnnotationCard, DecisionValue, ReviewRequest, RunCounters } from "./types.js";

export type SessionState =
  | "idle"
  | "fetching"
  | "reviewing"
  | "submitting"
  | "done"
  | "error";

export interface SessionOptions {
  /** injectable pause, for tests */
  sleep?: (ms: number) => Promise<void>;
  retryBaseMs?: number;
  maxRetries?: number;
  pollMs?: number;
  onChange?: () => void;
}

const TERMINAL_STATUSES = new Set(["converged", "failed", "suspended"]);

export class ReviewSession {
  state: SessionState = "idle";
  card: ReviewRequest | null = null;
  counters: RunCounters | null = null;
  runStatus = "unknown";
  notice: string | null = null;
  reviewsDone = 0;
  private submittedRequest: string | null = null;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly retryBaseMs: number;
  private readonly maxRetries: number;
  private readonly pollMs: number;
  private readonly onChange: () => void;

  constructor(
    private readonly api: ApiClient,
    readonly runId: string,
    options: SessionOptions = {},
  ) {
    this.sleep = options.sleep ?? ((ms) => new Promise((resolve) => setTimeout(resolve, ms)));
    this.retryBaseMs = options.retryBaseMs ?? 500;
    this.maxRetries = options.maxRetries ?? 5;
    this.pollMs = options.pollMs ?? 250;
    this.onChange = options.onChange ?? (() => {});
  }

  private transition(state: SessionState): void {
    this.state = state;
    this.onChange();
  }

  /** Poll until a card is available or the run reaches a terminal status. */
  async fetchNext(): Promise<void> {
    this.card = null;
    this.submittedRequest = null;
    this.transition("fetching");
    let attempt = 0;
    for (;;) {
      try {
        const handle = await this.api.run(this.runId);
        this.runStatus = handle.status;
        this.counters = handle.counters;
        if (TERMINAL_STATUSES.has(handle.status)) {
          this.transition("done");
          return;
        }
        const card = await this.api.nextReview(this.runId);
        attempt = 0;
        if (card !== null) {
          this.card = card;
          this.counters = card.counters;
          this.runStatus = card.run_status;
          this.transition("reviewing");
          return;
        }
      } catch (error) {
        attempt += 1;
        if (attempt > this.maxRetries) {
          this.notice = `network failure: ${String(error)}`;
          this.transition("error");
          return;
        }
        // exponential backoff; the lease keeps our queue position
        await this.sleep(this.retryBaseMs * 2 ** (attempt - 1));
        continue;
      }
      await this.sleep(this.pollMs);
    }
  }

  /**
   * Submit the decision for the current card. A card is submittable exactly
   * once; repeat calls are dropped client-side. Returns what happened.
   */
  async submit(decision: DecisionValue): Promise<"recorded" | "duplicate" | "conflict" | "ignored"> {
    const card = this.card;
    if (this.state !== "reviewing" || card === null) {
      return "ignored";
    }
    if (this.submittedRequest === card.request_id) {
      return "ignored";
    }
    this.submittedRequest = card.request_id;
    this.transition("submitting");
    try {
      const result = await this.api.submit(this.runId, card.request_id, decision);
      this.reviewsDone += 1;
      if (result.duplicate) {
        // stale lease: someone else answered this request first
        this.notice = "request expired, fetching next";
      } else {
        this.notice = null;
      }
      await this.fetchNext();
      return result.duplicate ? "duplicate" : "recorded";
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        const recorded = await this.recordedDecision(card);
        this.notice = recorded
          ? `already decided: ${recorded}; fetching next`
          : "already decided elsewhere; fetching next";
        await this.fetchNext();
        return "conflict";
      }
      this.submittedRequest = null;
      this.notice = `submit failed: ${String(error)}`;
      this.transition("reviewing");
      return "ignored";
    }
  }

  private async recordedDecision(card: ReviewRequest): Promise<string | null> {
    try {
      const [a, b] = [card.pair[0].annotation_id, card.pair[1].annotation_id].sort();
      const entries = await this.api.reviewLog(this.runId);
      for (let i = entries.length - 1; i >= 0; i -= 1) {
        const entry = entries[i];
        if (entry.kind === "review" && entry.a === a && entry.b === b) {
          return entry.decision ?? null;
        }
      }
    } catch {
      /* the notice simply stays generic */
    }
    return null;
  }

  render(root: HTMLElement): void {
    root.textContent = "";
    root.appendChild(this.renderStatusBar());
    if (this.notice) {
      const notice = el("div", "notice");
      notice.textContent = this.notice;
      root.appendChild(notice);
    }
    if (this.state === "done") {
      const done = el("div", "empty-state");
      done.textContent =
        this.runStatus === "converged" ? "no reviews pending - run converged" : `run ${this.runStatus}`;
      root.appendChild(done);
      return;
    }
    if (this.state === "error") {
      const err = el("div", "empty-state error");
      err.textContent = this.notice ?? "connection lost";
      root.appendChild(err);
      return;
    }
    if (this.card === null) {
      const waiting = el("div", "empty-state");
      waiting.textContent = "waiting for the next review request...";
      root.appendChild(waiting);
      return;
    }
    const pair = el("div", "pair");
    pair.appendChild(renderPanel(this.card.pair[0], "left"));
    pair.appendChild(renderPanel(this.card.pair[1], "right"));
    root.appendChild(pair);
    root.appendChild(this.renderButtons());
  }

  private renderStatusBar(): HTMLElement {
    const bar = el("div", "status-bar");
    const counters = this.counters;
    const done = el("span", "counter");
    done.textContent = `done: ${this.reviewsDone}`;
    const pending = el("span", "counter");
    pending.textContent = `pending: ${counters ? counters.pending_reviews : "-"}`;
    const automation = el("span", "counter");
    automation.textContent = counters
      ? `automation: ${(counters.automation_rate * 100).toFixed(1)}%`
      : "automation: -";
    const status = el("span", "counter run-status");
    status.textContent = `run: ${this.runStatus}`;
    for (const node of [done, pending, automation, status]) {
      bar.appendChild(node);
    }
    return bar;
  }

  private renderButtons(): HTMLElement {
    const row = el("div", "decision-row");
    const buttons: Array<[DecisionValue, string]> = [
      ["same", "same (s)"],
      ["different", "different (d)"],
      ["incomparable", "incomparable (i)"],
    ];
    for (const [value, label] of buttons) {
      const button = el("button", `decision decision-${value}`) as HTMLButtonElement;
      button.textContent = label;
      button.dataset.decision = value;
      button.addEventListener("click", () => void this.submit(value));
      row.appendChild(button);
    }
    return row;
  }

  /** Keyboard shortcuts: s / d / i. Returns true when the key was consumed. */
  handleKey(key: string): boolean {
    const mapping: Record<string, DecisionValue> = {
      s: "same",
      d: "different",
      i: "incomparable",
    };
    const decision = mapping[key.toLowerCase()];
    if (decision === undefined) {
      return false;
    }
    void this.submit(decision);
    return true;
  }
}

function renderPanel(card: AnnotationCard, side: string): HTMLElement {
  const panel = el("div", `panel panel-${side}`);
  panel.dataset.annotationId = card.annotation_id;
  if (card.crop_uri) {
    const img = document.createElement("img");
    img.src = card.crop_uri;
    img.alt = `crop of ${card.annotation_id}`;
    img.className = "crop";
    panel.appendChild(img);
  } else {
    const placeholder = el("div", "placeholder");
    placeholder.textContent = "no crop image";
    panel.appendChild(placeholder);
  }
  const meta = el("dl", "meta");
  const rows: Array<[string, string]> = [
    ["annotation", card.annotation_id],
    ["camera", card.camera_id],
    ["time", card.timestamp],
    ["viewpoint", card.viewpoint],
    ["species", card.species],
    ["score", card.ca_score.toFixed(4)],
  ];
  for (const [label, value] of rows) {
    const dt = document.createElement("dt");
    dt.textContent = label;
    const dd = document.createElement("dd");
    dd.textContent = value;
    meta.appendChild(dt);
    meta.appendChild(dd);
  }
  panel.appendChild(meta);
  return panel;
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
