/** Read-only cluster browser: paginated list plus a per-cluster encounter
 * map rendered from the API's GeoJSON fragments (one marker per encounter). */

import { ApiClient, ApiError } from "./api.js";
import type { ClusterDetail, ClusterPage, GeoFeature } from "./types.js";

export class ClusterBrowser {
  page = 1;
  pageSize = 20;
  data: ClusterPage | null = null;
  detail: ClusterDetail | null = null;
  notice: string | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly runId: string,
    private readonly onChange: () => void = () => {},
  ) {}

  async load(page = this.page): Promise<void> {
    try {
      this.data = await this.api.clusters(this.runId, page, this.pageSize);
      this.page = this.data.page;
      this.notice = null;
    } catch (error) {
      this.data = null;
      this.notice = error instanceof ApiError && error.status === 404 ? "run not found" : String(error);
    }
    this.onChange();
  }

  async open(clusterId: string): Promise<void> {
    try {
      this.detail = await this.api.clusterDetail(this.runId, clusterId);
      this.notice = null;
    } catch (error) {
      this.detail = null;
      this.notice =
        error instanceof ApiError && error.status === 404 ? `cluster ${clusterId} not found` : String(error);
    }
    this.onChange();
  }

  closeDetail(): void {
    this.detail = null;
    this.onChange();
  }

  render(root: HTMLElement): void {
    root.textContent = "";
    if (this.notice) {
      const notice = el("div", "empty-state");
      notice.textContent = this.notice;
      root.appendChild(notice);
    }
    if (this.detail) {
      root.appendChild(this.renderDetail(this.detail));
      return;
    }
    if (!this.data) {
      if (!this.notice) {
        const loading = el("div", "empty-state");
        loading.textContent = "loading clusters...";
        root.appendChild(loading);
      }
      return;
    }
    if (this.data.clusters.length === 0) {
      const empty = el("div", "empty-state");
      empty.textContent = "no clusters yet";
      root.appendChild(empty);
      return;
    }
    const table = document.createElement("table");
    table.className = "cluster-table";
    const head = document.createElement("tr");
    for (const label of ["cluster", "annotations", ""]) {
      const th = document.createElement("th");
      th.textContent = label;
      head.appendChild(th);
    }
    table.appendChild(head);
    for (const row of this.data.clusters) {
      const tr = document.createElement("tr");
      tr.className = "cluster-row";
      tr.dataset.clusterId = row.cluster_id;
      const id = document.createElement("td");
      id.textContent = row.cluster_id;
      const size = document.createElement("td");
      size.textContent = String(row.size);
      const action = document.createElement("td");
      const button = document.createElement("button");
      button.textContent = "view";
      button.className = "view-cluster";
      button.addEventListener("click", () => void this.open(row.cluster_id));
      action.appendChild(button);
      tr.appendChild(id);
      tr.appendChild(size);
      tr.appendChild(action);
      table.appendChild(tr);
    }
    root.appendChild(table);
    root.appendChild(this.renderPager());
  }

  private renderPager(): HTMLElement {
    const pager = el("div", "pager");
    const total = this.data?.total ?? 0;
    const pages = Math.max(1, Math.ceil(total / this.pageSize));
    const prev = document.createElement("button");
    prev.textContent = "prev";
    prev.className = "page-prev";
    prev.disabled = this.page <= 1;
    prev.addEventListener("click", () => void this.load(this.page - 1));
    const label = el("span", "page-label");
    label.textContent = `page ${this.page} / ${pages} (${total} clusters)`;
    const next = document.createElement("button");
    next.textContent = "next";
    next.className = "page-next";
    next.disabled = this.page >= pages;
    next.addEventListener("click", () => void this.load(this.page + 1));
    pager.appendChild(prev);
    pager.appendChild(label);
    pager.appendChild(next);
    return pager;
  }

  private renderDetail(detail: ClusterDetail): HTMLElement {
    const container = el("div", "cluster-detail");
    const heading = document.createElement("h2");
    heading.textContent = `cluster ${detail.cluster_id}`;
    container.appendChild(heading);
    const back = document.createElement("button");
    back.textContent = "back to list";
    back.className = "back";
    back.addEventListener("click", () => this.closeDetail());
    container.appendChild(back);

    const facts = el("div", "cluster-facts");
    facts.textContent =
      `${detail.members.length} annotations, ${detail.encounters.length} encounters, ` +
      `cameras: ${detail.cameras.join(", ")}`;
    container.appendChild(facts);

    container.appendChild(renderEncounterMap(detail.geojson.features));

    const list = document.createElement("ul");
    list.className = "member-list";
    for (const member of detail.members) {
      const item = document.createElement("li");
      item.textContent = `${member.annotation_id} @ ${member.camera_id} (${member.timestamp})`;
      list.appendChild(item);
    }
    container.appendChild(list);
    return container;
  }
}

/** SVG scatter of encounter locations; exactly one marker per feature. */
export function renderEncounterMap(features: GeoFeature[], size = 360): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("class", "encounter-map");
  svg.setAttribute("viewBox", `0 0 ${size} ${size}`);
  svg.setAttribute("width", String(size));
  svg.setAttribute("height", String(size));
  if (features.length === 0) {
    return svg;
  }
  const lons = features.map((f) => f.geometry.coordinates[0]);
  const lats = features.map((f) => f.geometry.coordinates[1]);
  const minLon = Math.min(...lons);
  const maxLon = Math.max(...lons);
  const minLat = Math.min(...lats);
  const maxLat = Math.max(...lats);
  const pad = 24;
  const spanLon = maxLon - minLon || 1e-6;
  const spanLat = maxLat - minLat || 1e-6;
  for (const feature of features) {
    const [lon, lat] = feature.geometry.coordinates;
    const x = pad + ((lon - minLon) / spanLon) * (size - 2 * pad);
    // latitude grows north; SVG y grows down
    const y = size - pad - ((lat - minLat) / spanLat) * (size - 2 * pad);
    const marker = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    marker.setAttribute("class", "encounter-marker");
    marker.setAttribute("cx", x.toFixed(1));
    marker.setAttribute("cy", y.toFixed(1));
    marker.setAttribute("r", "6");
    const title = document.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = `${String(feature.properties["camera_id"])} ${String(feature.properties["timestamp"])}`;
    marker.appendChild(title);
    svg.appendChild(marker);
  }
  return svg;
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
