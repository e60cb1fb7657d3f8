// Bootstrap: load the session facts and source once, show the last
// timestamp, then hand everything to DOM event wiring. All state
// changes flow through the controller.

import { HttpTransport } from "./protocol.js";
import { Panes } from "./render.js";
import { Controller } from "./controller.js";
import { ValuePicker } from "./picker.js";
import { Minibuffer } from "./minibuffer.js";

function pane(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing pane #${id}`);
  return node;
}

function rowIndex(pane: HTMLElement, row: Element): number {
  return Array.from(pane.querySelectorAll(".row")).indexOf(row);
}

function rowFor(ev: Event): HTMLElement | null {
  const target = ev.target as HTMLElement | null;
  return target?.closest?.(".row") ?? null;
}

// Route clicks on pane rows to controller actions. Shared by boot and
// by the transcript tests, which dispatch synthetic clicks through it.
export function wirePanes(
  panes: Panes,
  controller: Controller,
  picker: ValuePicker,
): void {
  panes.trace.addEventListener("click", (ev) => {
    const row = rowFor(ev);
    if (row) void controller.clickTraceLine(rowIndex(panes.trace, row));
  });
  panes.output.addEventListener("click", (ev) => {
    const row = rowFor(ev);
    if (row) void controller.clickOutputLine(rowIndex(panes.output, row));
  });
  panes.code.addEventListener("click", (ev) => {
    const row = rowFor(ev);
    if (row?.dataset.line) {
      void controller.clickCodeLine(Number(row.dataset.line));
    }
  });
  panes.threads.addEventListener("click", (ev) => {
    const row = rowFor(ev);
    if (row?.dataset.idx) {
      void controller.clickThreadLine(Number(row.dataset.idx));
    }
  });
  panes.stack.addEventListener("click", (ev) => {
    const row = rowFor(ev);
    if (row?.dataset.frame) {
      controller.clickStackFrame(Number(row.dataset.frame));
    }
  });
  panes.locals.addEventListener("dblclick", (ev) => {
    const row = rowFor(ev);
    if (row?.dataset.local) void controller.watch(row.dataset.local);
  });
  panes.objects.addEventListener("dblclick", (ev) => {
    const row = rowFor(ev);
    if (row?.dataset.ref) void picker.open(row.dataset.ref);
  });
}

export async function boot(): Promise<Controller> {
  const transport = new HttpTransport();
  const sessionReply = await transport.get("/session", {});
  const sourceReply = await transport.get("/source", {});
  if (sessionReply.status !== 200 || sourceReply.status !== 200) {
    throw new Error("could not load the session");
  }

  const panes: Panes = {
    status: pane("status"),
    event: pane("event"),
    threads: pane("threads"),
    stack: pane("stack"),
    locals: pane("locals"),
    trace: pane("trace"),
    code: pane("code"),
    output: pane("output"),
    objects: pane("objects"),
    notice: pane("notice"),
    banner: pane("banner"),
  };

  const controller = new Controller(
    transport,
    panes,
    sessionReply.body,
    sourceReply.body.text,
  );
  const picker = new ValuePicker(pane("picker"), controller);
  const minibuffer = new Minibuffer(
    document.getElementById("minibuffer") as HTMLInputElement,
    controller,
    picker,
    panes.trace,
  );
  minibuffer.attach();
  wirePanes(panes, controller, picker);

  document.querySelectorAll<HTMLElement>("[data-verb]").forEach((button) => {
    button.addEventListener("click", () => {
      void controller.navigate(button.dataset.verb as string);
    });
  });

  await controller.revertTo(controller.session.next_t - 1, null);
  return controller;
}

if (typeof document !== "undefined" && document.getElementById("status")) {
  void boot();
}
