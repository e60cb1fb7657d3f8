#!/usr/bin/env python3
"""Regenerates the protocol fixtures the frontend tests replay.

Each fixture file maps canonical request keys to the exact reply the
pure server handlers give for one recorded demo program. The key
format must match requestKey() in src/protocol.ts: GET keys carry
their params sorted by name and unencoded, POST keys carry the body
as JSON with keys sorted at every level.
"""

import json
from pathlib import Path

from odbx import server as srv
from odbx.run import record_source

HERE = Path(__file__).resolve().parent
REPO = HERE.parents[1]
OUT = HERE.parent / "test" / "fixtures"


def canon(body) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


class Tape:
    """Runs requests against the pure handlers and remembers every
    (request key, reply) pair."""

    def __init__(self, store):
        self.store = store
        self.requests = {}

    def get(self, path, **params):
        qs = "&".join(f"{k}={params[k]}" for k in sorted(params))
        key = f"GET {path}?{qs}" if qs else f"GET {path}"
        if path == "/session":
            status, body = srv.session_info(self.store)
        elif path == "/source":
            status, body = srv.source_info(self.store)
        elif path == "/view":
            prev = params.get("prev")
            status, body = srv.view_json(
                self.store, int(params["t"]),
                None if prev is None else int(prev))
        elif path == "/values":
            status, body = srv.values_json(
                self.store, params["ref"], int(params["t"]))
        else:
            raise ValueError(f"no GET route {path}")
        self.requests[key] = {"status": status, "body": body}
        return status, body

    def post(self, path, body):
        key = f"POST {path} {canon(body)}"
        if path == "/navigate":
            status, reply = srv.navigate_json(self.store, body)
        elif path == "/search":
            status, reply = srv.search_json(self.store, body)
        elif path == "/eval":
            status, reply = srv.eval_json(self.store, body)
        else:
            raise ValueError(f"no POST route {path}")
        self.requests[key] = {"status": status, "body": reply}
        return status, reply

    # the request pairs the client issues for one action

    def boot(self):
        self.get("/session")
        self.get("/source")
        self.get("/view", t=self.store.next_t - 1)

    def goto(self, here, target):
        status, reply = self.post(
            "/navigate", {"t": here, "command": "goto", "arg": target})
        assert status == 200 and reply["t"] == target, (here, target)
        self.get("/view", t=target, prev=here)

    def navigate(self, here, command, arg=None):
        body = {"t": here, "command": command}
        if arg is not None:
            body["arg"] = arg
        status, reply = self.post("/navigate", body)
        assert status == 200, (command, reply)
        if reply["t"] >= 0:
            self.get("/view", t=reply["t"], prev=here)
        return reply["t"]

    def save(self, name):
        OUT.mkdir(parents=True, exist_ok=True)
        path = OUT / f"{name}.json"
        path.write_text(
            json.dumps({"requests": self.requests}, indent=1,
                       sort_keys=True) + "\n")
        print(f"{name}: {len(self.requests)} requests -> {path}")


def record(name, **kw):
    text = (REPO / "demos" / f"{name}.mini").read_text()
    store, _ = record_source(text, path=f"demos/{name}.mini", **kw)
    return store


def quicksort_tape():
    store = record("quicksort")
    tape = Tape(store)
    last = store.next_t - 1            # 222
    tape.boot()

    # trace line clicks: first visible line and the sort(0, 2) line
    tape.goto(last, 18)
    tape.goto(last, 99)
    # output line clicks
    tape.goto(last, 16)
    tape.goto(last, 221)
    # code line 60 click from the end: backward search hits the return
    status, reply = tape.post("/search", {
        "pattern": "line = 60", "from": last + 1, "backward": True})
    assert reply["t"] == 220
    tape.get("/view", t=220, prev=last)
    # code line 60 click from t=100: only the forward search hits
    tape.get("/view", t=100, prev=last)
    status, reply = tape.post("/search", {
        "pattern": "line = 60", "from": 101, "backward": True})
    assert reply["t"] == 17
    tape.get("/view", t=17, prev=100)
    # code line 60 click from t=10: the call only happens later, so
    # the backward search misses and the forward one lands on it
    status, reply = tape.post("/search", {
        "pattern": "line = 60", "from": 11, "backward": True})
    assert reply["t"] == -1
    status, reply = tape.post("/search", {
        "pattern": "line = 60", "from": 10, "backward": False})
    assert reply["t"] == 17
    tape.get("/view", t=17, prev=10)
    # a comment line never executes: both searches miss
    tape.post("/search", {
        "pattern": "line = 2", "from": last + 1, "backward": True})
    tape.post("/search", {
        "pattern": "line = 2", "from": last, "backward": False})
    # buttons at the end of the recording
    tape.navigate(last, "step_in_back")                    # 221
    tape.post("/navigate", {"t": last, "command": "step_in_fwd"})   # -1
    # the value picker on the demo array's twice-written cell
    tape.get("/values", ref="<array[12]_0>[6]", t=last)
    tape.goto(last, 10)
    tape.goto(last, 167)
    # minibuffer: backward pattern search, then eval
    status, reply = tape.post("/search", {
        "pattern": 'port = call & callMethodName = "average"',
        "from": last, "backward": True})
    assert reply["t"] == 193
    tape.get("/view", t=193, prev=last)
    tape.post("/search", {
        "pattern": "port = output", "from": last, "backward": False})
    tape.post("/eval", {"t": last, "call": "<Sorter_0>.average(0, 3)"})
    # a starred view: the frame shown at 120 against the one at 17
    tape.get("/view", t=120, prev=17)
    tape.save("quicksort")


def bank_tape():
    store = record("bank")
    tape = Tape(store)
    last = store.next_t - 1            # 174
    tape.boot()
    target = tape.navigate(last, "thread_select", 1)
    assert target == 168
    target = tape.navigate(last, "switch_prev")
    assert target == 169
    tape.post("/navigate", {"t": last, "command": "switch_next"})   # -1
    tape.save("bank")


def gcdemo_tape():
    store = record("gc_overflow", max_events=1000)
    assert store.horizon > 0
    tape = Tape(store)
    tape.boot()
    tape.save("gcdemo")


if __name__ == "__main__":
    quicksort_tape()
    bank_tape()
    gcdemo_tape()
