// Transcript tests: synthetic clicks on rendered rows, then an exact
// match on the requests that went out. No live backend; only the
// recorded fixtures answer.

import { describe, expect, it } from "vitest";

import { ViewPayload } from "../src/protocol.js";
import { wirePanes } from "../src/main.js";
import {
  DeferredTransport,
  Rig,
  bootedRig,
  clickRow,
  loadFixture,
  makeRig,
} from "./helpers.js";

const quicksort = loadFixture("quicksort");
const bank = loadFixture("bank");

async function wiredRig(fixture = quicksort): Promise<Rig> {
  const rig = await bootedRig(fixture);
  wirePanes(rig.panes, rig.controller, rig.picker);
  return rig;
}

const settle = () => new Promise((r) => setTimeout(r, 0));

describe("trace line clicks", () => {
  it("revert to the clicked call's timestamp", async () => {
    const rig = await wiredRig();
    const payload = rig.controller.payload as ViewPayload;
    expect(payload.trace_ts[5]).toBe(99); // the sort(0, 2) call

    clickRow(rig.panes.trace, 5);
    await settle();

    expect(rig.transport.transcript).toEqual([
      'POST /navigate {"arg":99,"command":"goto","t":222}',
      "GET /view?prev=222&t=99",
    ]);
    expect(rig.controller.ui.t).toBe(99);
  });

  it("the first visible line reverts too", async () => {
    const rig = await wiredRig();
    clickRow(rig.panes.trace, 0);
    await settle();
    expect(rig.transport.transcript).toEqual([
      'POST /navigate {"arg":18,"command":"goto","t":222}',
      "GET /view?prev=222&t=18",
    ]);
    expect(rig.controller.ui.t).toBe(18);
  });
});

describe("output line clicks", () => {
  it("revert to the print that wrote the line", async () => {
    const rig = await wiredRig();
    clickRow(rig.panes.output, 0);
    await settle();
    expect(rig.transport.transcript).toEqual([
      'POST /navigate {"arg":16,"command":"goto","t":222}',
      "GET /view?prev=222&t=16",
    ]);
    expect(rig.controller.ui.t).toBe(16);
  });

  it("each line carries its own print time", async () => {
    const rig = await wiredRig();
    clickRow(rig.panes.output, 1);
    await settle();
    expect(rig.transport.transcript).toEqual([
      'POST /navigate {"arg":221,"command":"goto","t":222}',
      "GET /view?prev=222&t=221",
    ]);
    expect(rig.controller.ui.t).toBe(221);
  });
});

describe("code line clicks", () => {
  it("revert to the most recent execution of the line", async () => {
    const rig = await wiredRig();
    const row = rig.panes.code.querySelector(
      '[data-line="60"]',
    ) as HTMLElement;
    row.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    await settle();

    expect(rig.transport.transcript).toEqual([
      'POST /search {"backward":true,"from":223,"pattern":"line = 60"}',
      "GET /view?prev=222&t=220",
    ]);
    expect(rig.controller.ui.t).toBe(220);
  });

  it("fall forward when the line only executes later", async () => {
    const rig = await wiredRig();
    await rig.controller.revertTo(10);
    rig.transport.transcript.length = 0;

    await rig.controller.clickCodeLine(60);
    expect(rig.transport.transcript).toEqual([
      'POST /search {"backward":true,"from":11,"pattern":"line = 60"}',
      'POST /search {"backward":false,"from":10,"pattern":"line = 60"}',
      "GET /view?prev=10&t=17",
    ]);
    expect(rig.controller.ui.t).toBe(17);
  });

  it("flash without reverting when the line never ran", async () => {
    const rig = await wiredRig();
    await rig.controller.clickCodeLine(2);
    expect(rig.transport.transcript).toEqual([
      'POST /search {"backward":true,"from":223,"pattern":"line = 2"}',
      'POST /search {"backward":false,"from":222,"pattern":"line = 2"}',
    ]);
    expect(rig.controller.ui.t).toBe(222);
    expect(rig.panes.banner.classList.contains("visible")).toBe(true);
    expect(rig.panes.banner.textContent).toContain("line 2");
  });
});

describe("thread pane", () => {
  it("clicking a thread row selects the nearest event in it", async () => {
    const rig = await wiredRig(bank);
    expect(rig.controller.ui.t).toBe(174);
    clickRow(rig.panes.threads, 1);
    await settle();
    expect(rig.transport.transcript).toEqual([
      'POST /navigate {"arg":1,"command":"thread_select","t":174}',
      "GET /view?prev=174&t=168",
    ]);
    expect(rig.controller.ui.t).toBe(168);
  });

  it("prev/next buttons step between context switches", async () => {
    const rig = await wiredRig(bank);
    await rig.controller.navigate("switch_prev");
    expect(rig.transport.transcript).toEqual([
      'POST /navigate {"command":"switch_prev","t":174}',
      "GET /view?prev=174&t=169",
    ]);
    expect(rig.controller.ui.t).toBe(169);
  });

  it("a boundary answer flashes and leaves the view alone", async () => {
    const rig = await wiredRig(bank);
    await rig.controller.navigate("switch_next");
    expect(rig.transport.transcript).toEqual([
      'POST /navigate {"command":"switch_next","t":174}',
    ]);
    expect(rig.controller.ui.t).toBe(174);
    expect(rig.panes.banner.classList.contains("visible")).toBe(true);
  });
});

describe("step buttons", () => {
  it("step back issues one navigate and one view fetch", async () => {
    const rig = await wiredRig();
    await rig.controller.navigate("step_in_back");
    expect(rig.transport.transcript).toEqual([
      'POST /navigate {"command":"step_in_back","t":222}',
      "GET /view?prev=222&t=221",
    ]);
    expect(rig.controller.ui.t).toBe(221);
  });

  it("stepping forward at the end flashes", async () => {
    const rig = await wiredRig();
    await rig.controller.navigate("step_in_fwd");
    expect(rig.transport.transcript).toEqual([
      'POST /navigate {"command":"step_in_fwd","t":222}',
    ]);
    expect(rig.controller.ui.t).toBe(222);
    expect(rig.panes.banner.textContent).toContain("step_in_fwd");
  });
});

describe("stack pane", () => {
  it("selecting a frame changes the locals, not the time", async () => {
    const rig = await wiredRig();
    await rig.controller.revertTo(120, 17);
    rig.transport.transcript.length = 0;
    const payload = rig.controller.payload as ViewPayload;
    expect(payload.stack.length).toBeGreaterThan(1);

    clickRow(rig.panes.stack, 0); // the outermost frame
    await settle();

    expect(rig.transport.transcript).toEqual([]); // no request at all
    expect(rig.controller.ui.t).toBe(120);
    const names = Array.from(rig.panes.locals.querySelectorAll(".row")).map(
      (r) => (r as HTMLElement).dataset.local,
    );
    expect(names).toEqual(Object.keys(payload.stack[0].locals));
    // stars mark the innermost frame only
    expect(rig.panes.locals.querySelectorAll(".starred").length).toBe(0);
  });
});

describe("response sequencing", () => {
  it("a slow older reply cannot clobber a newer view", async () => {
    const transport = new DeferredTransport(quicksort);
    const rig = makeRig(quicksort, transport);
    const boot = rig.controller.revertTo(rig.session.next_t - 1, null);
    transport.release(0);
    await boot;
    transport.transcript.length = 0;

    const slow = rig.controller.revertTo(18);
    const fast = rig.controller.revertTo(220);
    expect(transport.pendingKeys).toEqual([
      "GET /view?prev=222&t=18",
      "GET /view?prev=222&t=220",
    ]);

    transport.release(1); // the newer action's reply lands first
    await fast;
    expect(rig.controller.ui.t).toBe(220);

    transport.release(0); // the stale reply arrives late
    await slow;
    expect(rig.controller.ui.t).toBe(220); // and is dropped
    expect((rig.controller.payload as ViewPayload).t).toBe(220);
  });

  it("in arrival order too, only the newest action applies", async () => {
    const transport = new DeferredTransport(quicksort);
    const rig = makeRig(quicksort, transport);
    const boot = rig.controller.revertTo(rig.session.next_t - 1, null);
    transport.release(0);
    await boot;

    const slow = rig.controller.revertTo(18);
    const fast = rig.controller.revertTo(220);
    transport.release(0); // first in, first answered
    await slow;
    expect(rig.controller.ui.t).toBe(222); // older action already stale
    transport.release(0);
    await fast;
    expect(rig.controller.ui.t).toBe(220);
  });
});
