// Typed client over the analysis service. Responses are returned verbatim
// (parsed JSON, no reshaping) so every rendered value can be traced to an
// endpoint response. The first bundle hash seen is pinned; any later
// response with a different hash flips `bundleChanged`, which the app
// surfaces as a banner.

import type {
  Health,
  Layout,
  RankingReport,
  Rollout,
  TrajectoryDetail,
  TrajectoryPage,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
    this.name = "ServiceError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  bundleHash: string | null = null;
  bundleChanged = false;

  constructor(
    public base: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private observeHash(resp: Response): void {
    const hash = resp.headers.get("X-Bundle-Hash");
    if (!hash) return;
    if (this.bundleHash === null) {
      this.bundleHash = hash;
    } else if (hash !== this.bundleHash) {
      this.bundleChanged = true;
    }
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, init);
    this.observeHash(resp);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { detail?: unknown };
        if (body.detail !== undefined) detail = String(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ServiceError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<Health> {
    return this.request<Health>("/health");
  }

  listTrajectories(page = 0, pageSize = 200): Promise<TrajectoryPage> {
    return this.request<TrajectoryPage>(
      `/trajectories?page=${page}&page_size=${pageSize}`,
    );
  }

  async allTrajectories(): Promise<TrajectoryPage["items"]> {
    const items: TrajectoryPage["items"] = [];
    let page = 0;
    for (;;) {
      const chunk = await this.listTrajectories(page);
      items.push(...chunk.items);
      if (items.length >= chunk.total || chunk.items.length === 0) return items;
      page += 1;
    }
  }

  trajectoryDetail(id: string, metric: string): Promise<TrajectoryDetail> {
    return this.request<TrajectoryDetail>(
      `/trajectories/${encodeURIComponent(id)}?metric=${encodeURIComponent(metric)}`,
    );
  }

  ranking(metric: string, k: number): Promise<RankingReport> {
    return this.request<RankingReport>(
      `/ranking?metric=${encodeURIComponent(metric)}&k=${k}`,
    );
  }

  environment(): Promise<Layout> {
    return this.request<Layout>("/environment");
  }

  counterfactual(trajectoryId: string, step: number, action: number): Promise<Rollout> {
    return this.request<Rollout>("/counterfactual", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        trajectory_id: trajectoryId,
        step,
        action,
        bundle_hash: this.bundleHash,
      }),
    });
  }
}
