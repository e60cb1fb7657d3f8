// The value list: every value a variable ever had, one row per
// (timestamp, value) pair from the /values payload. Selecting a row
// reverts the debugger to the time that value was assigned.

import { ValuesPayload } from "./protocol.js";
import { Controller } from "./controller.js";
import { el, clear } from "./dom.js";

export class ValuePicker {
  constructor(
    private host: HTMLElement,
    private controller: Controller,
  ) {}

  async open(ref: string): Promise<void> {
    const values = await this.controller.fetchValues(ref);
    if (!values) return;
    this.show(values);
  }

  show(values: ValuesPayload): void {
    clear(this.host);
    this.host.classList.add("open");
    this.host.appendChild(el("div", "picker-title", values.ref));
    // the value in force now is the last one assigned at or before t
    let inForce = -1;
    values.values.forEach(([t], i) => {
      if (t <= this.controller.ui.t) inForce = i;
    });
    values.values.forEach(([t, text], i) => {
      const mark = i === inForce ? "*" : " ";
      const row = el("div", "row", `${mark} t=${t}  ${text}`);
      row.dataset.t = String(t);
      row.addEventListener("click", () => {
        this.close();
        void this.controller.navigate("goto", t);
      });
      this.host.appendChild(row);
    });
  }

  close(): void {
    clear(this.host);
    this.host.classList.remove("open");
  }

  get isOpen(): boolean {
    return this.host.classList.contains("open");
  }
}
