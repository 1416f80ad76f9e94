/** Thin fetch client for the report service; all numbers rendered by the
 * dashboard come from these responses, never from client-side math. */

import type { ExplainResponse, Report, WhatIfRequest, WhatIfResponse } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body?.error ?? response.statusText);
    }
    return body as T;
  }

  report(): Promise<Report> {
    return this.request<Report>("/api/v1/report");
  }

  explain(valIdx: number, topK: number): Promise<ExplainResponse> {
    return this.request<ExplainResponse>(`/api/v1/explain?val_idx=${valIdx}&top_k=${topK}`);
  }

  whatif(request: WhatIfRequest): Promise<WhatIfResponse> {
    return this.request<WhatIfResponse>("/api/v1/whatif", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
  }

  curve(metric: string): Promise<{ prefix_sizes: number[]; accuracies: number[]; area: number }> {
    return this.request(`/api/v1/curve?metric=${encodeURIComponent(metric)}`);
  }
}
