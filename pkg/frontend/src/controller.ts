// One controller per loaded session. Every user action turns into at
// most one navigate/search round trip plus one view fetch. Each action
// takes a fresh sequence number when it starts; any reply that arrives
// after a newer action began is dropped, so the last action wins no
// matter how replies interleave.

import {
  SessionInfo,
  Transport,
  ViewPayload,
  ValuesPayload,
  EvalPayload,
} from "./protocol.js";
import { Panes, renderView } from "./render.js";
import { UiState, initialState } from "./state.js";

export class Controller {
  ui: UiState;
  payload: ViewPayload | null = null;
  private actionSeq = 0;

  constructor(
    private transport: Transport,
    private panes: Panes,
    readonly session: SessionInfo,
    readonly source: string,
  ) {
    this.ui = initialState(session.next_t - 1);
  }

  private begin(): number {
    return ++this.actionSeq;
  }

  private stale(a: number): boolean {
    return a !== this.actionSeq;
  }

  flash(message: string): void {
    this.ui.message = message;
    this.panes.banner.textContent = message;
    this.panes.banner.classList.add("visible");
  }

  render(): void {
    if (this.payload) {
      renderView(this.panes, this.payload, this.session, this.source, this.ui);
    }
  }

  // Fetch and display the view at t. prev rides along so the server
  // can mark what changed since the last displayed view.
  async revertTo(t: number, prev: number | null = this.ui.t): Promise<void> {
    await this.fetchView(this.begin(), t, prev);
  }

  private async fetchView(
    a: number,
    t: number,
    prev: number | null,
  ): Promise<void> {
    const params: Record<string, number> = { t };
    if (prev !== null) params.prev = prev;
    const reply = await this.transport.get("/view", params);
    if (this.stale(a)) return;
    if (reply.status !== 200) {
      this.flash(reply.body?.error ?? `view failed (${reply.status})`);
      return;
    }
    this.ui.prevT = prev;
    this.ui.t = t;
    this.ui.selectedFrame = null;
    this.ui.message = "";
    this.payload = reply.body as ViewPayload;
    this.render();
  }

  async navigate(command: string, arg?: number | string): Promise<void> {
    await this.doNavigate(this.begin(), command, arg);
  }

  private async doNavigate(
    a: number,
    command: string,
    arg?: number | string,
  ): Promise<void> {
    const body: Record<string, unknown> = { t: this.ui.t, command };
    if (arg !== undefined) body.arg = arg;
    const reply = await this.transport.post("/navigate", body);
    if (this.stale(a)) return;
    if (reply.status !== 200) {
      this.flash(reply.body?.error ?? `navigate failed (${reply.status})`);
      return;
    }
    const target = reply.body.t as number;
    if (target < 0) {
      this.flash(`nothing ${command} from here`);
      return;
    }
    await this.fetchView(a, target, this.ui.t);
  }

  // Selecting a trace or output line reverts to the time that line
  // executed (was printed); the timestamp rides in the payload.
  async clickTraceLine(index: number): Promise<void> {
    const ct = this.payload?.trace_ts[index];
    if (ct === null || ct === undefined) {
      this.flash("that call predates the recording");
      return;
    }
    await this.doNavigate(this.begin(), "goto", ct);
  }

  async clickOutputLine(index: number): Promise<void> {
    const ot = this.payload?.output_ts[index];
    if (ot === undefined) return;
    await this.doNavigate(this.begin(), "goto", ot);
  }

  // Selecting a code line reverts to the most recent time that line
  // executed, or the next time when it only runs later.
  async clickCodeLine(line: number): Promise<void> {
    const a = this.begin();
    const pattern = `line = ${line}`;
    let reply = await this.transport.post("/search", {
      pattern,
      from: this.ui.t + 1,
      backward: true,
    });
    if (this.stale(a)) return;
    if (reply.status === 200 && reply.body.t < 0) {
      reply = await this.transport.post("/search", {
        pattern,
        from: this.ui.t,
        backward: false,
      });
      if (this.stale(a)) return;
    }
    if (reply.status !== 200) {
      this.flash(reply.body?.error ?? "search failed");
      return;
    }
    if (reply.body.t < 0) {
      this.flash(`line ${line} never executed`);
      return;
    }
    await this.fetchView(a, reply.body.t, this.ui.t);
  }

  // Selecting a threads pane line reverts to the nearest event in that
  // thread.
  async clickThreadLine(idx: number): Promise<void> {
    await this.doNavigate(this.begin(), "thread_select", idx);
  }

  clickStackFrame(index: number): void {
    this.ui.selectedFrame = index;
    this.render();
  }

  async patternSearch(pattern: string, backward: boolean): Promise<void> {
    const a = this.begin();
    const reply = await this.transport.post("/search", {
      pattern,
      from: this.ui.t,
      backward,
    });
    if (this.stale(a)) return;
    if (reply.status !== 200) {
      this.flash(reply.body?.error ?? "bad pattern");
      return;
    }
    if (reply.body.t < 0) {
      this.flash("no match");
      return;
    }
    await this.fetchView(a, reply.body.t, this.ui.t);
  }

  async fetchValues(ref: string): Promise<ValuesPayload | null> {
    const reply = await this.transport.get("/values", {
      ref,
      t: this.ui.t,
    });
    if (reply.status !== 200) {
      this.flash(reply.body?.error ?? "unknown variable");
      return null;
    }
    return reply.body as ValuesPayload;
  }

  async watch(ref: string): Promise<void> {
    const values = await this.fetchValues(ref);
    if (!values) return;
    const existing = this.ui.watch.findIndex((w) => w.ref === values.ref);
    const row = { ref: values.ref, at: values.at };
    if (existing >= 0) this.ui.watch[existing] = row;
    else this.ui.watch.push(row);
    this.render();
  }

  async evalCall(call: string): Promise<EvalPayload | null> {
    const reply = await this.transport.post("/eval", {
      t: this.ui.t,
      call,
    });
    if (reply.status !== 200) {
      this.flash(reply.body?.error ?? "eval failed");
      return null;
    }
    return reply.body as EvalPayload;
  }
}
