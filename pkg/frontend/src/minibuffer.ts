// Single-line command entry. Commands either go to the server (pattern
// search, eval, value list) or act on the displayed text (incremental
// trace search); blank input is ignored.

import { Controller } from "./controller.js";
import { ValuePicker } from "./picker.js";

export type Command =
  | { kind: "search"; pattern: string; backward: boolean }
  | { kind: "text"; needle: string }
  | { kind: "values"; ref: string }
  | { kind: "eval"; call: string }
  | { kind: "goto"; t: number }
  | { kind: "help" }
  | { kind: "bad"; reason: string };

export function parseCommand(text: string): Command | null {
  const trimmed = text.trim();
  if (trimmed === "") return null;
  const [head] = trimmed.split(/\s+/, 1);
  const rest = trimmed.slice(head.length).trim();
  switch (head) {
    case "search":
    case "bsearch": {
      const backward = head === "bsearch";
      if (rest === "") return { kind: "bad", reason: "search needs a pattern" };
      return { kind: "search", pattern: rest, backward };
    }
    case "text":
      if (rest === "") return { kind: "bad", reason: "text needs a string" };
      return { kind: "text", needle: rest };
    case "values":
      if (rest === "") return { kind: "bad", reason: "values needs a name" };
      return { kind: "values", ref: rest };
    case "eval":
      if (rest === "") return { kind: "bad", reason: "eval needs a call" };
      return { kind: "eval", call: rest };
    case "goto": {
      const t = Number(rest);
      if (!Number.isInteger(t))
        return { kind: "bad", reason: "goto needs a timestamp" };
      return { kind: "goto", t };
    }
    case "help":
      return { kind: "help" };
    default:
      return { kind: "bad", reason: `unknown command '${head}'` };
  }
}

const HELP =
  "search <pattern> | bsearch <pattern> | text <string> | " +
  "values <name> | eval <call> | goto <t>";

export class Minibuffer {
  private lastNeedle = "";

  constructor(
    private input: HTMLInputElement,
    private controller: Controller,
    private picker: ValuePicker,
    private tracePane: HTMLElement,
  ) {}

  async run(text: string): Promise<void> {
    const cmd = parseCommand(text);
    if (cmd === null) return;
    switch (cmd.kind) {
      case "search":
        await this.controller.patternSearch(cmd.pattern, cmd.backward);
        return;
      case "text":
        this.textSearch(cmd.needle);
        return;
      case "values":
        await this.picker.open(cmd.ref);
        return;
      case "eval": {
        const result = await this.controller.evalCall(cmd.call);
        if (result) {
          this.controller.flash(
            result.threw !== null
              ? `threw ${result.threw}`
              : `=> ${result.value}`,
          );
        }
        return;
      }
      case "goto":
        await this.controller.navigate("goto", cmd.t);
        return;
      case "help":
        this.controller.flash(HELP);
        return;
      case "bad":
        this.controller.flash(cmd.reason);
        return;
    }
  }

  // Incremental search over the trace pane's own text: highlight the
  // next row past the current hit that contains the needle.
  textSearch(needle: string): void {
    const rows = Array.from(this.tracePane.querySelectorAll(".row"));
    if (rows.length === 0) return;
    const prior = rows.findIndex((r) => r.classList.contains("found"));
    const start = needle === this.lastNeedle ? prior + 1 : 0;
    this.lastNeedle = needle;
    rows.forEach((r) => r.classList.remove("found"));
    for (let i = 0; i < rows.length; i++) {
      const row = rows[(start + i) % rows.length];
      if ((row.textContent ?? "").includes(needle)) {
        row.classList.add("found");
        return;
      }
    }
    this.controller.flash(`'${needle}' not in trace`);
  }

  attach(): void {
    this.input.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter") {
        const text = this.input.value;
        this.input.value = "";
        void this.run(text);
      } else if (ev.key === "Escape") {
        this.input.value = "";
        this.picker.close();
      }
    });
  }
}
