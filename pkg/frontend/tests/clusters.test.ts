import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ClusterBrowser, renderEncounterMap } from "../src/clusters.js";
import { MockServer, card } from "./mock_server.js";
import type { GeoFeature } from "../src/types.js";

function feature(lon: number, lat: number, props: Record<string, unknown> = {}): GeoFeature {
  return {
    type: "Feature",
    geometry: { type: "Point", coordinates: [lon, lat] },
    properties: { camera_id: "cam000", timestamp: "t", ...props },
  };
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = "<div id='app'></div>";
  root = document.getElementById("app")!;
});

function makeBrowser(server: MockServer) {
  const api = new ApiClient("http://mock", server.fetchFn);
  return new ClusterBrowser(api, "run-1");
}

describe("cluster browser", () => {
  it("renders an empty state with zero clusters", async () => {
    const server = new MockServer();
    const browser = makeBrowser(server);
    await browser.load();
    browser.render(root);
    expect(root.textContent).toContain("no clusters");
  });

  it("lists clusters with member counts and paginates", async () => {
    const server = new MockServer();
    for (let i = 0; i < 25; i += 1) {
      server.clusters.push({ cluster_id: `c${String(i).padStart(2, "0")}`, size: i + 1, members: [] });
    }
    const browser = makeBrowser(server);
    await browser.load();
    browser.render(root);
    expect(root.querySelectorAll(".cluster-row")).toHaveLength(20);
    expect(root.querySelector(".page-label")?.textContent).toContain("page 1 / 2");
    await browser.load(2);
    browser.render(root);
    expect(root.querySelectorAll(".cluster-row")).toHaveLength(5);
    const sizes = [...root.querySelectorAll(".cluster-row td:nth-child(2)")].map((n) => n.textContent);
    expect(sizes).toEqual(["21", "22", "23", "24", "25"]);
  });

  it("opens detail with one marker per encounter", async () => {
    const server = new MockServer();
    server.clusters.push({ cluster_id: "c1", size: 3, members: ["a1", "a2", "a3"] });
    server.clusterDetails.set("c1", {
      run_id: "run-1",
      run_status: "converged",
      state_version: 5,
      cluster_id: "c1",
      members: [card("a1"), card("a2"), card("a3")],
      encounters: [
        { encounter_id: "e1", camera_id: "cam000", minute_buckets: [1], member_ids: ["a1"], representative_id: "a1" },
        { encounter_id: "e2", camera_id: "cam001", minute_buckets: [9], member_ids: ["a2"], representative_id: "a2" },
        { encounter_id: "e3", camera_id: "cam002", minute_buckets: [30], member_ids: ["a3"], representative_id: "a3" },
      ],
      cameras: ["cam000", "cam001", "cam002"],
      geojson: {
        type: "FeatureCollection",
        features: [feature(36.9, 0.3), feature(36.95, 0.31), feature(36.85, 0.29)],
      },
    });
    const browser = makeBrowser(server);
    await browser.open("c1");
    browser.render(root);
    expect(root.querySelectorAll(".encounter-marker")).toHaveLength(3);
    expect(root.textContent).toContain("3 annotations, 3 encounters");
  });

  it("unknown cluster shows a friendly empty state", async () => {
    const server = new MockServer();
    const browser = makeBrowser(server);
    await browser.open("ghost");
    browser.render(root);
    expect(root.textContent).toContain("cluster ghost not found");
  });

  it("marker count always equals feature count", () => {
    for (const n of [0, 1, 7]) {
      const features = Array.from({ length: n }, (_, i) => feature(36.8 + i * 0.01, 0.3));
      const svg = renderEncounterMap(features);
      expect(svg.querySelectorAll(".encounter-marker")).toHaveLength(n);
    }
  });
});
