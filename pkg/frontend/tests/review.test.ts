import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ReviewSession } from "../src/review.js";
import { MockServer, card } from "./mock_server.js";

function makeSession(server: MockServer) {
  const api = new ApiClient("http://mock", server.fetchFn);
  return new ReviewSession(api, "run-1", {
    sleep: async () => {},
    pollMs: 0,
    retryBaseMs: 0,
  });
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = "<div id='app'></div>";
  root = document.getElementById("app")!;
});

describe("review session", () => {
  it("fetches and renders a metadata card pair", async () => {
    const server = new MockServer();
    server.queue.push({ request_id: "req-0", a: card("a1"), b: card("a2", { ca_score: 0.42 }) });
    const session = makeSession(server);
    await session.fetchNext();
    expect(session.state).toBe("reviewing");
    session.render(root);
    const panels = root.querySelectorAll(".panel");
    expect(panels).toHaveLength(2);
    expect(panels[0].getAttribute("data-annotation-id")).toBe("a1");
    expect(root.textContent).toContain("cam000");
    expect(root.textContent).toContain("0.4200");
    // metadata cards, no crop image
    expect(root.querySelector("img.crop")).toBeNull();
    expect(root.querySelectorAll(".placeholder")).toHaveLength(2);
  });

  it("renders a crop image when crop_uri is present", async () => {
    const server = new MockServer();
    server.queue.push({
      request_id: "req-0",
      a: card("a1", { crop_uri: "http://crops/a1.jpg" }),
      b: card("a2"),
    });
    const session = makeSession(server);
    await session.fetchNext();
    session.render(root);
    const img = root.querySelector("img.crop") as HTMLImageElement;
    expect(img).not.toBeNull();
    expect(img.src).toBe("http://crops/a1.jpg");
  });

  it("submits exactly the API enum values and advances", async () => {
    const server = new MockServer();
    server.queue.push({ request_id: "req-0", a: card("a1"), b: card("a2") });
    server.queue.push({ request_id: "req-1", a: card("a3"), b: card("a4") });
    const session = makeSession(server);
    await session.fetchNext();
    const outcome = await session.submit("same");
    expect(outcome).toBe("recorded");
    expect(server.submits[0].body).toEqual({ decision: "same" });
    expect(session.card?.request_id).toBe("req-1");
    expect(session.reviewsDone).toBe(1);
  });

  it("keyboard shortcuts map to decisions", async () => {
    const server = new MockServer();
    server.queue.push({ request_id: "req-0", a: card("a1"), b: card("a2") });
    const session = makeSession(server);
    await session.fetchNext();
    expect(session.handleKey("x")).toBe(false);
    expect(session.handleKey("d")).toBe(true);
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(server.decisions.get("req-0")).toBe("different");
  });

  it("a card is submittable exactly once client-side", async () => {
    const server = new MockServer();
    server.queue.push({ request_id: "req-0", a: card("a1"), b: card("a2") });
    const session = makeSession(server);
    await session.fetchNext();
    const [first, second] = await Promise.all([session.submit("same"), session.submit("same")]);
    expect([first, second].filter((o) => o === "ignored")).toHaveLength(1);
    // only one POST reached the server for req-0
    expect(server.submits.filter((s) => s.requestId === "req-0")).toHaveLength(1);
    expect(server.log).toHaveLength(1);
  });

  it("server-side duplicate surfaces the expired-lease notice", async () => {
    const server = new MockServer();
    server.queue.push({ request_id: "req-0", a: card("a1"), b: card("a2") });
    const session = makeSession(server);
    await session.fetchNext();
    // another reviewer answered the same leased request first
    server.decisions.set("req-0", "same");
    server.queue = [];
    server.status = "converged";
    const outcome = await session.submit("same");
    expect(outcome).toBe("duplicate");
    expect(session.notice).toContain("request expired");
  });

  it("conflict 409 reloads with the recorded decision", async () => {
    const server = new MockServer();
    server.queue.push({ request_id: "req-0", a: card("a1"), b: card("a2") });
    const session = makeSession(server);
    await session.fetchNext();
    server.decisions.set("req-0", "different");
    server.log.push({ seq: 0, kind: "review", a: "a1", b: "a2", decision: "different", source: "human" });
    server.queue = [];
    server.status = "converged";
    const outcome = await session.submit("same");
    expect(outcome).toBe("conflict");
    expect(session.notice).toContain("different");
    expect(session.state).toBe("done");
  });

  it("retries with backoff on network failure and keeps going", async () => {
    const server = new MockServer();
    server.queue.push({ request_id: "req-0", a: card("a1"), b: card("a2") });
    server.failNextFetches = 3;
    const sleeps: number[] = [];
    const api = new ApiClient("http://mock", server.fetchFn);
    const session = new ReviewSession(api, "run-1", {
      sleep: async (ms) => {
        sleeps.push(ms);
      },
      pollMs: 0,
      retryBaseMs: 100,
    });
    await session.fetchNext();
    expect(session.state).toBe("reviewing");
    expect(sleeps.slice(0, 3)).toEqual([100, 200, 400]);
  });

  it("shows the converged empty state", async () => {
    const server = new MockServer();
    server.status = "converged";
    const session = makeSession(server);
    await session.fetchNext();
    expect(session.state).toBe("done");
    session.render(root);
    expect(root.textContent).toContain("no reviews pending");
  });

  it("progress counters update after each submit", async () => {
    const server = new MockServer();
    server.queue.push({ request_id: "req-0", a: card("a1"), b: card("a2") });
    server.queue.push({ request_id: "req-1", a: card("a3"), b: card("a4") });
    const session = makeSession(server);
    await session.fetchNext();
    await session.submit("same");
    session.render(root);
    expect(root.querySelector(".status-bar")?.textContent).toContain("done: 1");
    expect(root.querySelector(".status-bar")?.textContent).toContain("pending: 1");
  });
});
