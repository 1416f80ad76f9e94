/** Sortable LF table: flags negative-value rows, tags every data cell with
 * the fingerprint of the response it came from, and supports a full
 * keyboard path (Tab to a row checkbox, Space/Enter to toggle). */

import type { LFRow } from "./types.js";

export type SortKey = "index" | "name" | "accuracy" | "coverage" | "overlap" | "conflict" | "weshap";

const COLUMNS: { key: SortKey; label: string }[] = [
  { key: "index", label: "#" },
  { key: "name", label: "LF" },
  { key: "accuracy", label: "Accuracy" },
  { key: "coverage", label: "Coverage" },
  { key: "overlap", label: "Overlap" },
  { key: "conflict", label: "Conflict" },
  { key: "weshap", label: "WeShap" },
];

function formatCell(value: number | string | null): string {
  if (value === null) return "–";
  if (typeof value === "string") return value;
  return Number.isInteger(value) ? String(value) : value.toFixed(4);
}

export class LFTable {
  sortKey: SortKey = "weshap";
  sortDescending = true;
  private rows: LFRow[] = [];
  private fingerprint = "";
  private disabled = new Set<number>();
  private actionsEnabled = true;

  constructor(
    private root: HTMLElement,
    private onToggle: (lfIndex: number, disabled: boolean) => void,
  ) {}

  setRows(rows: LFRow[], fingerprint: string): void {
    this.rows = rows;
    this.fingerprint = fingerprint;
    this.render();
  }

  setDisabledSet(disabled: Set<number>): void {
    this.disabled = new Set(disabled);
    this.render();
  }

  setActionsEnabled(enabled: boolean): void {
    this.actionsEnabled = enabled;
    this.render();
  }

  sortBy(key: SortKey, descending?: boolean): void {
    if (descending === undefined) {
      this.sortDescending = key === this.sortKey ? !this.sortDescending : true;
    } else {
      this.sortDescending = descending;
    }
    this.sortKey = key;
    this.render();
  }

  sortedRows(): LFRow[] {
    const key = this.sortKey;
    const sign = this.sortDescending ? -1 : 1;
    return [...this.rows].sort((a, b) => {
      const va = a[key];
      const vb = b[key];
      if (va === null && vb === null) return a.index - b.index;
      if (va === null) return 1; // undefined values sort last either way
      if (vb === null) return -1;
      if (va < vb) return -sign;
      if (va > vb) return sign;
      return a.index - b.index;
    });
  }

  private render(): void {
    this.root.textContent = "";
    if (this.rows.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty-state";
      empty.textContent = "No labeling functions in this report.";
      this.root.appendChild(empty);
      return;
    }

    const table = document.createElement("table");
    table.className = "lf-table";
    const thead = document.createElement("thead");
    const headerRow = document.createElement("tr");
    const toggleHead = document.createElement("th");
    toggleHead.textContent = "On";
    headerRow.appendChild(toggleHead);
    for (const column of COLUMNS) {
      const th = document.createElement("th");
      th.tabIndex = 0;
      th.dataset.key = column.key;
      th.setAttribute("role", "columnheader");
      const marker = this.sortKey === column.key ? (this.sortDescending ? " ▾" : " ▴") : "";
      th.textContent = column.label + marker;
      const activate = () => this.sortBy(column.key);
      th.addEventListener("click", activate);
      th.addEventListener("keydown", (event) => {
        if (event.key === "Enter" || event.key === " ") {
          event.preventDefault();
          activate();
        }
      });
      headerRow.appendChild(th);
    }
    thead.appendChild(headerRow);
    table.appendChild(thead);

    const tbody = document.createElement("tbody");
    for (const row of this.sortedRows()) {
      const tr = document.createElement("tr");
      tr.dataset.lf = String(row.index);
      if (row.weshap < 0) {
        tr.classList.add("negative");
      }
      if (this.disabled.has(row.index)) {
        tr.classList.add("disabled");
      }

      const toggleCell = document.createElement("td");
      const checkbox = document.createElement("input");
      checkbox.type = "checkbox";
      checkbox.checked = !this.disabled.has(row.index);
      checkbox.disabled = !this.actionsEnabled;
      checkbox.setAttribute("aria-label", `enable ${row.name}`);
      const toggle = () => {
        if (!this.actionsEnabled) return;
        const nowDisabled = !this.disabled.has(row.index);
        if (nowDisabled) {
          this.disabled.add(row.index);
        } else {
          this.disabled.delete(row.index);
        }
        checkbox.checked = !nowDisabled;
        tr.classList.toggle("disabled", nowDisabled);
        this.onToggle(row.index, nowDisabled);
      };
      checkbox.addEventListener("change", (event) => {
        event.preventDefault();
        toggle();
      });
      checkbox.addEventListener("keydown", (event) => {
        if (event.key === "Enter" || event.key === " ") {
          event.preventDefault();
          toggle();
        }
      });
      toggleCell.appendChild(checkbox);
      tr.appendChild(toggleCell);

      const values: (number | string | null)[] = [
        row.index,
        row.name,
        row.accuracy,
        row.coverage,
        row.overlap,
        row.conflict,
        row.weshap,
      ];
      for (const value of values) {
        const td = document.createElement("td");
        td.textContent = formatCell(value);
        td.dataset.fingerprint = this.fingerprint;
        tr.appendChild(td);
      }
      if (row.weshap < 0) {
        const last = tr.lastElementChild as HTMLElement;
        last.classList.add("negative-value");
        last.title = "negative contribution: candidate for removal";
      }
      tbody.appendChild(tr);
    }
    table.appendChild(tbody);
    this.root.appendChild(table);
  }
}
