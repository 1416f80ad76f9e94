/** Application wiring: load the report, render the table and panels, and
 * route every toggle through the latest-wins what-if queue.  The UI never
 * computes a score itself; a stale fingerprint in any response raises a
 * banner and disables further actions. */

import { ApiClient } from "./api.js";
import { ExplainView } from "./explain.js";
import { SessionState, WhatIfQueue } from "./state.js";
import { LFTable } from "./table.js";
import { WhatIfPanel } from "./whatif.js";
import type { WhatIfResponse } from "./types.js";

export class App {
  readonly state = new SessionState();
  readonly api: ApiClient;
  table!: LFTable;
  panel!: WhatIfPanel;
  explainView!: ExplainView;
  private queue!: WhatIfQueue;
  private banner!: HTMLElement;

  constructor(private root: HTMLElement, baseUrl = "") {
    this.api = new ApiClient(baseUrl);
  }

  async load(): Promise<void> {
    this.root.innerHTML = `
      <div class="banner" hidden></div>
      <header>
        <h1>LF valuation dashboard</h1>
        <p class="meta"></p>
      </header>
      <main>
        <section class="table-region"></section>
        <aside>
          <section class="whatif-region"></section>
          <section class="explain-region"></section>
        </aside>
      </main>
    `;
    this.banner = this.root.querySelector(".banner") as HTMLElement;

    const report = await this.api.report();
    this.state.report = report;

    const meta = this.root.querySelector(".meta") as HTMLElement;
    meta.textContent =
      `${report.num_lfs} LFs · ${report.num_train} training rows · ` +
      `K=${report.config.k}, ${report.config.metric}, ${report.config.weighting} · ` +
      `fingerprint ${report.fingerprint.slice(0, 12)}`;
    meta.dataset.fingerprint = report.fingerprint;

    this.table = new LFTable(
      this.root.querySelector(".table-region") as HTMLElement,
      (lfIndex, disabled) => this.onToggle(lfIndex, disabled),
    );
    this.table.setRows(report.lf_table, report.fingerprint);

    this.panel = new WhatIfPanel(
      this.root.querySelector(".whatif-region") as HTMLElement,
      (theta) => {
        this.state.theta = theta;
        this.submit();
      },
    );
    this.panel.setAccuracies(report.base_valid_accuracy, report.base_test_accuracy, report.fingerprint);

    this.explainView = new ExplainView(
      this.root.querySelector(".explain-region") as HTMLElement,
      this.api,
      (index) => report.lf_table[index]?.name ?? `lf ${index}`,
    );

    this.queue = new WhatIfQueue(
      (request) => this.api.whatif(request),
      (response) => this.onWhatIf(response),
      (error) => this.onError(error),
      () => {
        this.state.pending = false;
        this.panel.setPending(false);
      },
    );
  }

  private onToggle(lfIndex: number, disabled: boolean): void {
    if (disabled) {
      this.state.disabled.add(lfIndex);
    } else {
      this.state.disabled.delete(lfIndex);
    }
    this.submit();
  }

  submit(): void {
    if (this.state.stale) return;
    this.state.pending = true;
    this.panel.setPending(true);
    this.queue.submit(this.state.request());
  }

  private onWhatIf(response: WhatIfResponse): void {
    this.state.applyResponse(response);
    if (this.state.stale) {
      this.showStaleBanner();
      return;
    }
    const accuracies = this.state.accuracies();
    if (accuracies) {
      this.panel.setAccuracies(accuracies.valid, accuracies.test, response.fingerprint);
    }
    this.panel.renderHistory(this.state.history);
  }

  private onError(error: unknown): void {
    // previous accuracies stay on screen; only the status line changes
    this.panel.showError(error instanceof Error ? error.message : String(error));
  }

  private showStaleBanner(): void {
    this.banner.hidden = false;
    this.banner.textContent =
      "Input files changed on disk: this session is stale. Reload to continue; actions are disabled.";
    this.table.setActionsEnabled(false);
    this.panel.setActionsEnabled(false);
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (root) {
    const app = new App(root);
    void app.load();
  }
}
