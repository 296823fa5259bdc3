/** Page wiring: tab switching, keyboard shortcuts, query-string config.
 * Open index.html with ?run=<run_id>[&api=<base-url>]. */

import { ApiClient } from "./api.js";
import { ClusterBrowser } from "./clusters.js";
import { ReviewSession } from "./review.js";

export function boot(root: HTMLElement, runId: string, apiBase: string): { session: ReviewSession; browser: ClusterBrowser } {
  const api = new ApiClient(apiBase);

  const tabs = document.createElement("div");
  tabs.className = "tabs";
  const reviewTab = document.createElement("button");
  reviewTab.textContent = "review";
  reviewTab.className = "tab tab-review active";
  const clustersTab = document.createElement("button");
  clustersTab.textContent = "clusters";
  clustersTab.className = "tab tab-clusters";
  tabs.appendChild(reviewTab);
  tabs.appendChild(clustersTab);

  const reviewPane = document.createElement("div");
  reviewPane.className = "pane pane-review";
  const clustersPane = document.createElement("div");
  clustersPane.className = "pane pane-clusters";
  clustersPane.style.display = "none";

  root.appendChild(tabs);
  root.appendChild(reviewPane);
  root.appendChild(clustersPane);

  const session = new ReviewSession(api, runId, { onChange: () => session.render(reviewPane) });
  const browser = new ClusterBrowser(api, runId, () => browser.render(clustersPane));

  reviewTab.addEventListener("click", () => {
    reviewPane.style.display = "";
    clustersPane.style.display = "none";
    reviewTab.classList.add("active");
    clustersTab.classList.remove("active");
  });
  clustersTab.addEventListener("click", () => {
    reviewPane.style.display = "none";
    clustersPane.style.display = "";
    clustersTab.classList.add("active");
    reviewTab.classList.remove("active");
    void browser.load();
  });

  document.addEventListener("keydown", (event) => {
    if (reviewPane.style.display !== "none") {
      session.handleKey(event.key);
    }
  });

  session.render(reviewPane);
  void session.fetchNext();
  return { session, browser };
}

declare global {
  interface Window {
    photocensusBoot?: typeof boot;
  }
}

if (typeof window !== "undefined") {
  window.photocensusBoot = boot;
  const params = new URLSearchParams(window.location.search);
  const runId = params.get("run");
  const apiBase = params.get("api") ?? "";
  const root = document.getElementById("app");
  if (root !== null) {
    if (runId) {
      boot(root, runId, apiBase);
    } else {
      root.textContent = "missing ?run=<run_id> query parameter";
    }
  }
}
