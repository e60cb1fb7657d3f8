// Command-line behavior: parsing, dispatch to the server-backed
// actions, and the client-side incremental trace search.

import { describe, expect, it } from "vitest";

import { Minibuffer, parseCommand } from "../src/minibuffer.js";
import { Rig, bootedRig, loadFixture } from "./helpers.js";

const quicksort = loadFixture("quicksort");

interface MiniRig extends Rig {
  input: HTMLInputElement;
  mini: Minibuffer;
}

async function miniRig(): Promise<MiniRig> {
  const rig = await bootedRig(quicksort);
  const input = document.createElement("input");
  const mini = new Minibuffer(input, rig.controller, rig.picker, rig.panes.trace);
  mini.attach();
  return { ...rig, input, mini };
}

const settle = () => new Promise((r) => setTimeout(r, 0));

describe("parseCommand", () => {
  it("splits the verb from its argument", () => {
    expect(parseCommand("search port = call")).toEqual({
      kind: "search",
      pattern: "port = call",
      backward: false,
    });
    expect(parseCommand("bsearch x = 3")).toEqual({
      kind: "search",
      pattern: "x = 3",
      backward: true,
    });
    expect(parseCommand("text foo bar")).toEqual({
      kind: "text",
      needle: "foo bar",
    });
    expect(parseCommand("values a")).toEqual({ kind: "values", ref: "a" });
    expect(parseCommand("eval f(1, 2)")).toEqual({
      kind: "eval",
      call: "f(1, 2)",
    });
    expect(parseCommand("goto 42")).toEqual({ kind: "goto", t: 42 });
    expect(parseCommand("help")).toEqual({ kind: "help" });
  });

  it("rejects what it cannot run", () => {
    expect(parseCommand("")).toBeNull();
    expect(parseCommand("   ")).toBeNull();
    expect(parseCommand("search")).toMatchObject({ kind: "bad" });
    expect(parseCommand("goto soon")).toMatchObject({ kind: "bad" });
    expect(parseCommand("goto 4.5")).toMatchObject({ kind: "bad" });
    expect(parseCommand("frobnicate")).toEqual({
      kind: "bad",
      reason: "unknown command 'frobnicate'",
    });
  });
});

describe("server-backed commands", () => {
  it("bsearch reverts to the match", async () => {
    const rig = await miniRig();
    await rig.mini.run('bsearch port = call & callMethodName = "average"');
    expect(rig.transport.transcript).toEqual([
      'POST /search {"backward":true,"from":222,"pattern":"port = call & callMethodName = \\"average\\""}',
      "GET /view?prev=222&t=193",
    ]);
    expect(rig.controller.ui.t).toBe(193);
  });

  it("a missed search flashes and stays put", async () => {
    const rig = await miniRig();
    await rig.mini.run("search port = output");
    expect(rig.transport.transcript).toEqual([
      'POST /search {"backward":false,"from":222,"pattern":"port = output"}',
    ]);
    expect(rig.controller.ui.t).toBe(222);
    expect(rig.panes.banner.textContent).toBe("no match");
  });

  it("eval shows the result without moving", async () => {
    const rig = await miniRig();
    await rig.mini.run("eval <Sorter_0>.average(0, 3)");
    expect(rig.transport.transcript).toEqual([
      'POST /eval {"call":"<Sorter_0>.average(0, 3)","t":222}',
    ]);
    expect(rig.panes.banner.textContent).toBe("=> 9");
    expect(rig.controller.ui.t).toBe(222);
  });

  it("values opens the picker", async () => {
    const rig = await miniRig();
    await rig.mini.run("values <array[12]_0>[6]");
    expect(rig.transport.transcript).toEqual([
      "GET /values?ref=<array[12]_0>[6]&t=222",
    ]);
    expect(rig.picker.isOpen).toBe(true);
    expect(rig.pickerHost.querySelectorAll(".row").length).toBe(2);
  });

  it("goto is a plain navigate", async () => {
    const rig = await miniRig();
    await rig.mini.run("goto 99");
    expect(rig.transport.transcript).toEqual([
      'POST /navigate {"arg":99,"command":"goto","t":222}',
      "GET /view?prev=222&t=99",
    ]);
    expect(rig.controller.ui.t).toBe(99);
  });
});

describe("text search", () => {
  it("walks the trace pane without touching the server", async () => {
    const rig = await miniRig();
    const found = () =>
      Array.from(rig.panes.trace.querySelectorAll(".row")).findIndex((r) =>
        r.classList.contains("found"),
      );

    await rig.mini.run("text average");
    expect(found()).toBe(0);
    await rig.mini.run("text average");
    expect(found()).toBe(3); // same needle advances
    await rig.mini.run("text average");
    expect(found()).toBe(6);
    await rig.mini.run("text sort");
    expect(found()).toBe(2); // new needle restarts from the top
    expect(rig.transport.transcript).toEqual([]);
  });

  it("flashes when the text is nowhere", async () => {
    const rig = await miniRig();
    await rig.mini.run("text zebra");
    expect(rig.panes.banner.textContent).toBe("'zebra' not in trace");
    expect(rig.transport.transcript).toEqual([]);
  });
});

describe("input wiring", () => {
  it("Enter runs the line and clears the field", async () => {
    const rig = await miniRig();
    rig.input.value = "goto 99";
    rig.input.dispatchEvent(
      new KeyboardEvent("keydown", { key: "Enter", bubbles: true }),
    );
    await settle();
    expect(rig.input.value).toBe("");
    expect(rig.controller.ui.t).toBe(99);
  });

  it("Escape clears the field and the picker", async () => {
    const rig = await miniRig();
    await rig.mini.run("values <array[12]_0>[6]");
    expect(rig.picker.isOpen).toBe(true);
    rig.input.value = "half-typed";
    rig.input.dispatchEvent(
      new KeyboardEvent("keydown", { key: "Escape", bubbles: true }),
    );
    expect(rig.input.value).toBe("");
    expect(rig.picker.isOpen).toBe(false);
  });

  it("help and parse errors land in the banner", async () => {
    const rig = await miniRig();
    await rig.mini.run("help");
    expect(rig.panes.banner.textContent).toContain("search <pattern>");
    await rig.mini.run("wat");
    expect(rig.panes.banner.textContent).toBe("unknown command 'wat'");
    expect(rig.transport.transcript).toEqual([]);
  });
});
