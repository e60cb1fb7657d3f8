// Fixture-backed test rig: a Transport that answers from recorded
// protocol replies and keeps a transcript of every request key it saw.
// An unfixtured request throws, so a test can never silently talk to
// a route the recording does not cover.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import {
  Reply,
  SessionInfo,
  Transport,
  requestKey,
} from "../src/protocol.js";
import { Panes } from "../src/render.js";
import { Controller } from "../src/controller.js";
import { ValuePicker } from "../src/picker.js";

const here = dirname(fileURLToPath(import.meta.url));

export interface Fixture {
  requests: Record<string, Reply>;
}

export function loadFixture(name: string): Fixture {
  const raw = readFileSync(join(here, "fixtures", `${name}.json`), "utf8");
  return JSON.parse(raw) as Fixture;
}

export class FakeTransport implements Transport {
  transcript: string[] = [];

  constructor(protected fixture: Fixture) {}

  protected lookup(key: string): Reply {
    const hit = this.fixture.requests[key];
    if (!hit) throw new Error(`no fixture for: ${key}`);
    return structuredClone(hit);
  }

  async get(
    path: string,
    params: Record<string, string | number>,
  ): Promise<Reply> {
    const key = requestKey("GET", path, params);
    this.transcript.push(key);
    return this.lookup(key);
  }

  async post(path: string, body: object): Promise<Reply> {
    const key = requestKey("POST", path, body);
    this.transcript.push(key);
    return this.lookup(key);
  }
}

// Replies wait until the test releases them, in any order it likes.
export class DeferredTransport extends FakeTransport {
  private pending: { key: string; resolve: (r: Reply) => void }[] = [];

  private defer(key: string): Promise<Reply> {
    this.transcript.push(key);
    return new Promise((resolve) => {
      this.pending.push({ key, resolve });
    });
  }

  override async get(
    path: string,
    params: Record<string, string | number>,
  ): Promise<Reply> {
    return this.defer(requestKey("GET", path, params));
  }

  override async post(path: string, body: object): Promise<Reply> {
    return this.defer(requestKey("POST", path, body));
  }

  get pendingKeys(): string[] {
    return this.pending.map((p) => p.key);
  }

  release(index: number): void {
    const [entry] = this.pending.splice(index, 1);
    entry.resolve(this.lookup(entry.key));
  }
}

export function makePanes(): Panes {
  const make = () => document.createElement("div");
  return {
    status: make(),
    event: make(),
    threads: make(),
    stack: make(),
    locals: make(),
    trace: make(),
    code: make(),
    output: make(),
    objects: make(),
    notice: make(),
    banner: make(),
  };
}

export interface Rig {
  transport: FakeTransport;
  panes: Panes;
  controller: Controller;
  picker: ValuePicker;
  pickerHost: HTMLElement;
  session: SessionInfo;
}

export function makeRig(
  fixture: Fixture,
  transport: FakeTransport = new FakeTransport(fixture),
): Rig {
  const panes = makePanes();
  const session = fixture.requests["GET /session"].body as SessionInfo;
  const source = fixture.requests["GET /source"].body.text as string;
  const controller = new Controller(transport, panes, session, source);
  const pickerHost = document.createElement("div");
  const picker = new ValuePicker(pickerHost, controller);
  return { transport, panes, controller, picker, pickerHost, session };
}

// A rig already showing the last timestamp, transcript cleared.
export async function bootedRig(
  fixture: Fixture,
  transport?: FakeTransport,
): Promise<Rig> {
  const rig = makeRig(fixture, transport);
  await rig.controller.revertTo(rig.session.next_t - 1, null);
  rig.transport.transcript.length = 0;
  return rig;
}

export function rowTexts(pane: HTMLElement): string[] {
  return Array.from(pane.querySelectorAll(".row")).map(
    (r) => r.textContent ?? "",
  );
}

export function clickRow(pane: HTMLElement, index: number): void {
  const rows = pane.querySelectorAll(".row");
  rows[index].dispatchEvent(new MouseEvent("click", { bubbles: true }));
}
