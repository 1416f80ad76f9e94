/** Per-holdout-point influence panel: most negative and most positive LFs
 * plus the neighbor training rows with the lowest contribution entries. */

import type { ApiClient } from "./api.js";
import type { ExplainResponse } from "./types.js";

export class ExplainView {
  private input: HTMLInputElement;
  private button: HTMLButtonElement;
  private output: HTMLElement;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private lfName: (index: number) => string,
  ) {
    root.innerHTML = `
      <h2>Explain a holdout point</h2>
      <label>Holdout index
        <input class="val-idx" type="number" min="0" step="1" value="0">
      </label>
      <button class="run-explain" type="button">Explain</button>
      <div class="explain-output"></div>
    `;
    this.input = root.querySelector(".val-idx") as HTMLInputElement;
    this.button = root.querySelector(".run-explain") as HTMLButtonElement;
    this.output = root.querySelector(".explain-output") as HTMLElement;
    const run = () => void this.load(Number(this.input.value));
    this.button.addEventListener("click", run);
    this.input.addEventListener("keydown", (event) => {
      if (event.key === "Enter") {
        event.preventDefault();
        run();
      }
    });
  }

  async load(valIdx: number): Promise<void> {
    try {
      this.renderPayload(await this.api.explain(valIdx, 5));
    } catch (error) {
      this.output.innerHTML = "";
      const p = document.createElement("p");
      p.className = "inline-error";
      p.textContent = error instanceof Error ? error.message : String(error);
      this.output.appendChild(p);
    }
  }

  renderPayload(payload: ExplainResponse): void {
    this.output.innerHTML = "";
    const summary = document.createElement("p");
    summary.textContent = `point ${payload.val_index} (label ${payload.label})`;
    summary.dataset.fingerprint = payload.fingerprint;
    this.output.appendChild(summary);

    const lists: [string, { lf: number; value: number }[]][] = [
      ["Most negative LFs", payload.top_negative],
      ["Most positive LFs", payload.top_positive],
    ];
    for (const [title, entries] of lists) {
      const h = document.createElement("h3");
      h.textContent = title;
      this.output.appendChild(h);
      const ul = document.createElement("ul");
      ul.className = title.includes("negative") ? "top-negative" : "top-positive";
      for (const entry of entries) {
        const li = document.createElement("li");
        li.textContent = `${this.lfName(entry.lf)}: ${entry.value.toFixed(4)}`;
        li.dataset.lf = String(entry.lf);
        li.dataset.fingerprint = payload.fingerprint;
        ul.appendChild(li);
      }
      this.output.appendChild(ul);
    }

    const h = document.createElement("h3");
    h.textContent = "Lowest-contribution neighbor entries";
    this.output.appendChild(h);
    const ul = document.createElement("ul");
    ul.className = "lowest-entries";
    for (const entry of payload.lowest_entries) {
      const li = document.createElement("li");
      li.textContent = `train row ${entry.i} × ${this.lfName(entry.j)}: ${entry.w.toFixed(5)}`;
      li.dataset.fingerprint = payload.fingerprint;
      ul.appendChild(li);
    }
    this.output.appendChild(ul);
  }
}
