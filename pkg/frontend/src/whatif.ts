/** What-if panel: shows the accuracies of the last completed response, the
 * pending indicator, the threshold control, and the action history trail. */

import type { HistoryStep } from "./types.js";

function pct(value: number | null): string {
  return value === null ? "–" : `${(100 * value).toFixed(2)}%`;
}

export class WhatIfPanel {
  private validEl: HTMLElement;
  private testEl: HTMLElement;
  private statusEl: HTMLElement;
  private historyEl: HTMLElement;
  private thetaInput: HTMLInputElement;
  private applyButton: HTMLButtonElement;

  constructor(
    private root: HTMLElement,
    private onTheta: (theta: number | null) => void,
  ) {
    root.innerHTML = `
      <h2>What-if</h2>
      <dl class="accuracies">
        <dt>Validation accuracy</dt><dd class="valid-acc" data-fingerprint=""></dd>
        <dt>Test accuracy</dt><dd class="test-acc" data-fingerprint=""></dd>
      </dl>
      <p class="status" role="status"></p>
      <label>Mute weak labels with contribution below
        <input class="theta" type="number" step="any" placeholder="no threshold">
      </label>
      <button class="apply-theta" type="button">Apply threshold</button>
      <h3>History</h3>
      <ol class="history"></ol>
    `;
    this.validEl = root.querySelector(".valid-acc") as HTMLElement;
    this.testEl = root.querySelector(".test-acc") as HTMLElement;
    this.statusEl = root.querySelector(".status") as HTMLElement;
    this.historyEl = root.querySelector(".history") as HTMLElement;
    this.thetaInput = root.querySelector(".theta") as HTMLInputElement;
    this.applyButton = root.querySelector(".apply-theta") as HTMLButtonElement;
    const apply = () => {
      const raw = this.thetaInput.value.trim();
      this.onTheta(raw === "" ? null : Number(raw));
    };
    this.applyButton.addEventListener("click", apply);
    this.thetaInput.addEventListener("keydown", (event) => {
      if (event.key === "Enter") {
        event.preventDefault();
        apply();
      }
    });
  }

  setAccuracies(valid: number, test: number | null, fingerprint: string): void {
    this.validEl.textContent = pct(valid);
    this.validEl.dataset.fingerprint = fingerprint;
    this.testEl.textContent = pct(test);
    this.testEl.dataset.fingerprint = fingerprint;
  }

  setPending(pending: boolean): void {
    this.statusEl.textContent = pending ? "recomputing…" : "";
    this.root.classList.toggle("pending", pending);
  }

  showError(message: string): void {
    this.statusEl.textContent = `request failed: ${message} (showing last completed state)`;
  }

  setActionsEnabled(enabled: boolean): void {
    this.thetaInput.disabled = !enabled;
    this.applyButton.disabled = !enabled;
  }

  renderHistory(history: HistoryStep[]): void {
    this.historyEl.textContent = "";
    for (const step of history) {
      const li = document.createElement("li");
      const action =
        step.action.disabled_lfs.length || step.action.theta !== null
          ? `disabled [${step.action.disabled_lfs.join(", ")}]` +
            (step.action.theta !== null ? `, θ=${step.action.theta}` : "")
          : "no-op";
      li.textContent = `${action} → valid ${pct(step.valid_acc)}, test ${pct(step.test_acc)}`;
      this.historyEl.appendChild(li);
    }
  }
}
