/** Thin typed client over the review/cluster JSON API; all state lives on
 * the server, the UI only round-trips through these calls. */

import type {
  ClusterDetail,
  ClusterPage,
  DecisionValue,
  ReviewLogEntry,
  ReviewRequest,
  RunHandle,
  SubmitResult,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.url(path));
    if (!response.ok) {
      throw new ApiError(response.status, await describe(response));
    }
    return (await response.json()) as T;
  }

  async run(runId: string): Promise<RunHandle> {
    return this.get(`/api/runs/${runId}`);
  }

  /** Next leased review request, or null when the queue is empty (204). */
  async nextReview(runId: string): Promise<ReviewRequest | null> {
    const response = await this.fetchFn(this.url(`/api/runs/${runId}/reviews/next`));
    if (response.status === 204) {
      return null;
    }
    if (!response.ok) {
      throw new ApiError(response.status, await describe(response));
    }
    return (await response.json()) as ReviewRequest;
  }

  async submit(runId: string, requestId: string, decision: DecisionValue): Promise<SubmitResult> {
    const response = await this.fetchFn(this.url(`/api/runs/${runId}/reviews/${requestId}`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ decision }),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await describe(response));
    }
    return (await response.json()) as SubmitResult;
  }

  async reviewLog(runId: string): Promise<ReviewLogEntry[]> {
    const payload = await this.get<{ entries: ReviewLogEntry[] }>(`/api/runs/${runId}/reviews`);
    return payload.entries;
  }

  async clusters(runId: string, page = 1, pageSize = 20): Promise<ClusterPage> {
    return this.get(`/api/runs/${runId}/clusters?page=${page}&page_size=${pageSize}`);
  }

  async clusterDetail(runId: string, clusterId: string): Promise<ClusterDetail> {
    return this.get(`/api/runs/${runId}/clusters/${encodeURIComponent(clusterId)}`);
  }
}

async function describe(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    return body.detail ?? `HTTP ${response.status}`;
  } catch {
    return `HTTP ${response.status}`;
  }
}
