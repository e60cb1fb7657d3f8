// Builds the panes from one ViewPayload. No values are computed here:
// every string shown is a payload string, every star comes from the
// payload's starred list, and rows carry the payload's timestamps in
// data attributes for the click handlers.

import { SessionInfo, ViewPayload, FrameRow } from "./protocol.js";
import { UiState } from "./state.js";
import { el, clear } from "./dom.js";

export interface Panes {
  status: HTMLElement;
  event: HTMLElement;
  threads: HTMLElement;
  stack: HTMLElement;
  locals: HTMLElement;
  trace: HTMLElement;
  code: HTMLElement;
  output: HTMLElement;
  objects: HTMLElement;
  notice: HTMLElement;
  banner: HTMLElement;
}

export function frameLabel(fr: FrameRow): string {
  const recv = fr.receiver === null ? "" : fr.receiver + ".";
  const dots = fr.pre_horizon ? "... " : "";
  return `${dots}${recv}${fr.method}  line ${fr.line}`;
}

export function threadLabel(row: {
  name: string;
  state: string;
  blocked_on: string | null;
}): string {
  const tail = row.blocked_on === null ? "" : ` on ${row.blocked_on}`;
  return `${row.name}  ${row.state}${tail}`;
}

// The frame whose locals the locals pane shows. Selecting a stack line
// displays that frame; otherwise the innermost frame is shown.
export function shownFrame(payload: ViewPayload, ui: UiState): number {
  if (
    ui.selectedFrame !== null &&
    ui.selectedFrame >= 0 &&
    ui.selectedFrame < payload.stack.length
  ) {
    return ui.selectedFrame;
  }
  return payload.stack.length - 1;
}

function renderLines(
  pane: HTMLElement,
  lines: string[],
  current: number,
  pick: (row: HTMLElement, i: number) => void,
): void {
  clear(pane);
  lines.forEach((text, i) => {
    const row = el("div", "row", text);
    if (i === current) row.classList.add("current");
    pick(row, i);
    pane.appendChild(row);
  });
}

export function renderView(
  panes: Panes,
  payload: ViewPayload,
  session: SessionInfo,
  source: string,
  ui: UiState,
): void {
  try {
    render(panes, payload, session, source, ui);
    panes.banner.textContent = "";
    panes.banner.classList.remove("visible");
  } catch (err) {
    panes.banner.textContent = `render failed: ${err}`;
    panes.banner.classList.add("visible");
  }
}

function render(
  panes: Panes,
  payload: ViewPayload,
  session: SessionInfo,
  source: string,
  ui: UiState,
): void {
  if (typeof payload.t !== "number" || !Array.isArray(payload.stack)) {
    throw new Error("view payload is missing required fields");
  }
  panes.status.textContent =
    `${payload.t} (out of ${session.next_t})` +
    `  thread ${payload.thread.name}  line ${payload.line}`;
  panes.event.textContent = payload.event;

  panes.notice.textContent =
    session.horizon > 0
      ? `events before t=${session.horizon} discarded`
      : "";

  clear(panes.threads);
  payload.threads.forEach((row) => {
    const node = el("div", "row", threadLabel(row));
    node.dataset.idx = String(row.idx);
    if (row.idx === payload.thread.idx) node.classList.add("current");
    panes.threads.appendChild(node);
  });

  const shown = shownFrame(payload, ui);
  clear(panes.stack);
  payload.stack.forEach((fr, i) => {
    const node = el("div", "row", frameLabel(fr));
    node.dataset.frame = String(i);
    if (i === shown) node.classList.add("current");
    panes.stack.appendChild(node);
  });

  clear(panes.locals);
  const frame = payload.stack[shown];
  if (frame) {
    const starsApply = shown === payload.stack.length - 1;
    for (const [name, value] of Object.entries(frame.locals)) {
      const starred = starsApply && payload.starred.includes(name);
      const node = el("div", "row", `${starred ? "*" : " "}${name} = ${value}`);
      node.dataset.local = name;
      if (starred) node.classList.add("starred");
      panes.locals.appendChild(node);
    }
  }

  const traceLines = payload.trace === "" ? [] : payload.trace.split("\n");
  const currentTrace = traceLines.findIndex((line) => line.startsWith("*"));
  renderLines(panes.trace, traceLines, currentTrace, (row, i) => {
    const ct = payload.trace_ts[i];
    if (ct !== null && ct !== undefined) row.dataset.t = String(ct);
  });

  const codeLines = source === "" ? [] : source.replace(/\n$/, "").split("\n");
  clear(panes.code);
  codeLines.forEach((text, i) => {
    const row = el("div", "row", `${String(i + 1).padStart(3)}  ${text}`);
    row.dataset.line = String(i + 1);
    if (i + 1 === payload.line) row.classList.add("current");
    panes.code.appendChild(row);
  });

  const outLines = payload.output === "" ? [] : payload.output.replace(/\n$/, "").split("\n");
  renderLines(panes.output, outLines, -1, (row, i) => {
    const ot = payload.output_ts[i];
    if (ot !== undefined) row.dataset.t = String(ot);
  });

  clear(panes.objects);
  ui.watch.forEach((w) => {
    const node = el("div", "row", `${w.ref} = ${w.at}`);
    node.dataset.ref = w.ref;
    panes.objects.appendChild(node);
  });
}
