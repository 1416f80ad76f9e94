/** Session state and the latest-wins what-if pipeline.
 *
 * Displayed accuracies always come from the last *completed* what-if
 * response (or the base report before any what-if): requests fired while
 * one is in flight coalesce, and a response is dropped whenever a newer
 * request is already pending, so rapid toggles render only the final state.
 */

import type { HistoryStep, Report, WhatIfRequest, WhatIfResponse } from "./types.js";

export class SessionState {
  report: Report | null = null;
  disabled = new Set<number>();
  theta: number | null = null;
  pending = false;
  stale = false;
  lastResponse: WhatIfResponse | null = null;
  history: HistoryStep[] = [];

  request(): WhatIfRequest {
    return { disabled_lfs: [...this.disabled].sort((a, b) => a - b), theta: this.theta };
  }

  /** Accuracies currently safe to display. */
  accuracies(): { valid: number; test: number | null } | null {
    if (this.lastResponse) {
      return { valid: this.lastResponse.valid_acc, test: this.lastResponse.test_acc };
    }
    if (this.report) {
      return { valid: this.report.base_valid_accuracy, test: this.report.base_test_accuracy };
    }
    return null;
  }

  applyResponse(response: WhatIfResponse): void {
    this.lastResponse = response;
    this.history.push({
      action: { disabled_lfs: response.disabled_lfs, theta: response.theta },
      valid_acc: response.valid_acc,
      test_acc: response.test_acc,
    });
    if (this.report && response.fingerprint !== this.report.fingerprint) {
      this.stale = true;
    }
  }
}

/** Serializes what-if requests; only the newest pending request survives. */
export class WhatIfQueue {
  private inflight = false;
  private pendingRequest: WhatIfRequest | null = null;

  constructor(
    private send: (request: WhatIfRequest) => Promise<WhatIfResponse>,
    private onResult: (response: WhatIfResponse) => void,
    private onError: (error: unknown) => void,
    private onIdle: () => void = () => {},
  ) {}

  submit(request: WhatIfRequest): void {
    this.pendingRequest = request;
    if (!this.inflight) {
      void this.drain();
    }
  }

  get busy(): boolean {
    return this.inflight;
  }

  private async drain(): Promise<void> {
    this.inflight = true;
    while (this.pendingRequest) {
      const request = this.pendingRequest;
      this.pendingRequest = null;
      try {
        const response = await this.send(request);
        if (!this.pendingRequest) {
          this.onResult(response); // a newer request supersedes this result
        }
      } catch (error) {
        if (!this.pendingRequest) {
          this.onError(error);
        }
      }
    }
    this.inflight = false;
    this.onIdle();
  }
}
