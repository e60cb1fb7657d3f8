"""The odbx command: record, debug, query, serve.

Exit codes: 0 success, 1 completed with a program-level failure (an
uncaught exception while recording, a query with no matches), 2 bad
input (usage, syntax, pattern, or session-file errors).
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import (
    CompileError,
    InstrumentError,
    MiniSyntaxError,
    OdbxError,
    PatternError,
    PreHorizonError,
    ReplayError,
    SessionFormatError,
)
from . import query as _query
from . import replay as _replay
from . import timeline as tm
from .run import record_source
from .session import load_session, save_session


def _fail(msg: str) -> int:
    print(f"odbx: {msg}", file=sys.stderr)
    return 2


# ------------------------------------------------------------------ record

def _cmd_record(ns) -> int:
    try:
        with open(ns.program, "r", encoding="utf-8") as fp:
            text = fp.read()
    except OSError as e:
        return _fail(str(e))
    exclude = []
    for chunk in ns.exclude or []:
        exclude.extend(x for x in chunk.split(",") if x)
    max_events = ns.max_events
    if max_events is None:
        env = os.environ.get("ODBX_MAX_EVENTS")
        if env:
            try:
                max_events = int(env)
            except ValueError:
                return _fail(f"ODBX_MAX_EVENTS={env!r} is not an integer")
    try:
        store, vm = record_source(
            text, path=ns.program, exclude=exclude, quantum=ns.quantum,
            max_events=max_events, on_overflow=ns.on_overflow,
            start_pattern=ns.start_when, stop_pattern=ns.stop_when)
    except (MiniSyntaxError, CompileError, InstrumentError,
            PatternError, ValueError) as e:
        return _fail(str(e))
    sys.stdout.write(vm.stdout)
    out = ns.output or os.path.splitext(ns.program)[0] + ".odbx"
    save_session(store, out)
    retained = store.next_t - store.base
    print(f"recorded {store.next_t} events ({retained} retained) "
          f"to {out}", file=sys.stderr)
    if vm.uncaught:
        idx, value = vm.uncaught[0]
        print(f"uncaught in {store.thread_name(idx)}: "
              f"{tm.format_value(value)}", file=sys.stderr)
        return 1
    return 0


# ------------------------------------------------------------------ query

def _cmd_query(ns) -> int:
    try:
        store = load_session(ns.session)
    except (OSError, SessionFormatError) as e:
        return _fail(str(e))
    try:
        if ns.all:
            ts = _query.all_matches(store, ns.pattern)
        else:
            t = _query.search_events(store, ns.pattern, ns.from_t,
                                     ns.backward)
            ts = [] if t < 0 else [t]
    except PatternError as e:
        return _fail(str(e))
    for t in ts:
        print(f"{t}  {tm.describe_event(store, t)}")
    return 0 if ts else 1


# ------------------------------------------------------------------ debug

_HELP = """\
commands:
  state                 full view at the current time
  goto T                revert the view to timestamp T
  first last            ends of the retained log
  step bstep            one event forward / backward in this thread
  over bover            next / previous event at this depth or above
  out                   forward to this call's return
  bout                  backward to just before this call began
  loop bloop            next / previous pass of the current line
  switch bswitch        nearest context switch forward / backward
  thread N|NAME         jump to that thread's nearest event
  stack locals threads  panes of the current view
  trace [N]             call trace of this thread (last N lines)
  output                program output so far
  print REF             value of a variable reference here
  values REF            every value the reference ever held
  search PAT            forward to the next event matching a pattern
  bsearch PAT           backward likewise
  eval CALL [with REF = VALUE, ...]
                        re-run a call against this moment's state
  quit"""

_NAV_VERBS = {
    "step": "step_in_fwd",
    "bstep": "step_in_back",
    "over": "step_over_fwd",
    "bover": "step_over_back",
    "out": "return_from",
    "bout": "step_out_back",
    "loop": "next_iteration",
    "bloop": "prev_iteration",
    "switch": "switch_next",
    "bswitch": "switch_prev",
    "first": "first",
    "last": "last",
}


class _Repl:
    def __init__(self, store, out=None):
        self.store = store
        self.out = out if out is not None else sys.stdout
        self.t = max(store.base, store.next_t - 1)

    def say(self, text: str) -> None:
        print(text, file=self.out)

    def headline(self) -> None:
        store = self.store
        name = store.thread_name(store.thread_at(self.t))
        self.say(f"t={self.t} [{name}] {tm.describe_event(store, self.t)}")

    def show_state(self) -> None:
        store, t = self.store, self.t
        v = tm.reconstruct_view(store, t)
        self.say(f"t = {t} of {store.base}..{store.next_t - 1}   "
                 f"thread {v.thread_name}   line {v.line}")
        self.say(f"event: {v.event_text}")
        self.show_stack()
        out = v.output
        if out:
            self.say("output:")
            for ln in out.splitlines():
                self.say("  " + ln)

    def show_stack(self) -> None:
        store, t = self.store, self.t
        v = tm.reconstruct_view(store, t)
        if not v.stack:
            self.say("stack: (no frame)")
            return
        self.say("stack:")
        for fr in v.stack:
            head = tm.format_traceline(fr.tl, t)
            self.say(f"  {head}   @ line {fr.line}")
            for name, val in fr.locals.items():
                self.say(f"    {name} = {tm.format_value_at(store, val, t)}")

    def show_threads(self) -> None:
        for th in tm.thread_states(self.store, self.t):
            mark = "*" if th.idx == self.store.thread_at(self.t) else " "
            extra = ""
            if th.blocked_on is not None:
                extra = f" on {tm.format_value(th.blocked_on)}"
            self.say(f"{mark} {th.name:16s} {th.state}{extra}")

    def show_values(self, ref_text: str) -> None:
        store, t = self.store, self.t
        ref = tm.resolve_ref(store, t, ref_text)
        rows = tm.values_of(store, ref)
        if not rows:
            self.say(f"{tm.format_ref(store, ref)}: never set")
            return
        h = store.hist(ref)
        i = h.index_at(t)
        cur = h.ts[i] if i >= 0 else None
        self.say(f"{tm.format_ref(store, ref)}:")
        for vt, v in rows:
            mark = "*" if vt == cur else " "
            self.say(f"{mark} t={vt}  {tm.format_value_at(store, v, vt)}")

    def do_search(self, pattern: str, backward: bool) -> None:
        hit = _query.search_events(self.store, pattern, self.t, backward)
        if hit < 0:
            self.say("no match")
            return
        self.t = hit
        self.headline()

    def do_eval(self, text: str) -> None:
        call, overrides = text, []
        idx = text.find(" with ")
        if idx >= 0:
            call = text[:idx]
            for part in _replay._split_args(text[idx + 6:]):
                if "=" not in part:
                    raise ReplayError(
                        f"override {part!r} needs the form ref = value")
                ref, _, val = part.partition("=")
                overrides.append((ref.strip(), val.strip()))
        r = _replay.eval_text(self.store, self.t, call, overrides)
        st2 = r.store
        for t2 in range(st2.base, st2.next_t):
            self.say(f"  {t2}  {tm.describe_event(st2, t2)}")
        if r.threw is not None:
            self.say(f"threw {tm.format_value(r.threw)}")
        else:
            self.say(f"=> {tm.format_value_at(st2, r.value, st2.next_t - 1)}")
        if r.stdout:
            for ln in r.stdout.splitlines():
                self.say(f"  | {ln}")

    def handle(self, line: str) -> bool:
        """One command; False means quit."""
        line = line.strip()
        if not line or line.startswith("#"):
            return True
        verb, _, rest = line.partition(" ")
        rest = rest.strip()
        store = self.store
        try:
            if verb in ("quit", "exit", "q"):
                return False
            elif verb == "help":
                self.say(_HELP)
            elif verb in ("state", "view", "v"):
                self.show_state()
            elif verb in ("goto", "revert"):
                t = int(rest)
                if t < store.base or t >= store.next_t:
                    self.say(f"t must be in {store.base}.."
                             f"{store.next_t - 1}")
                else:
                    self.t = t
                    self.headline()
            elif verb in _NAV_VERBS:
                target = tm.navigate(store, self.t, _NAV_VERBS[verb])
                if target < 0:
                    self.say("nowhere to go")
                else:
                    self.t = target
                    self.headline()
            elif verb == "thread":
                arg: object = rest
                try:
                    arg = int(rest)
                except ValueError:
                    pass
                target = tm.navigate(store, self.t, "thread_select", arg)
                if target < 0:
                    self.say(f"no events for thread {rest}")
                else:
                    self.t = target
                    self.headline()
            elif verb == "stack":
                self.show_stack()
            elif verb == "locals":
                v = tm.reconstruct_view(store, self.t)
                if not v.stack:
                    self.say("(no frame)")
                for name, val in (v.stack[-1].locals if v.stack
                                  else {}).items():
                    self.say(f"{name} = "
                             f"{tm.format_value_at(store, val, self.t)}")
            elif verb == "threads":
                self.show_threads()
            elif verb == "trace":
                limit = int(rest) if rest else 20
                idx = store.thread_at(self.t)
                self.say(tm.format_trace_block(store, idx, self.t, limit))
            elif verb == "output":
                out = tm.output_at(store, self.t)
                self.say(out if out else "(no output yet)")
            elif verb == "print":
                ref = tm.resolve_ref(store, self.t, rest)
                val = tm.value_at(store, ref, self.t)
                self.say(f"{tm.format_ref(store, ref)} = "
                         f"{tm.format_value_at(store, val, self.t)}")
            elif verb == "values":
                self.show_values(rest)
            elif verb == "search":
                self.do_search(rest, backward=False)
            elif verb == "bsearch":
                self.do_search(rest, backward=True)
            elif verb == "eval":
                self.do_eval(rest)
            else:
                self.say(f"unknown command {verb!r} (try help)")
        except (ValueError, PatternError, ReplayError, PreHorizonError,
                IndexError, MiniSyntaxError, CompileError) as e:
            self.say(f"error: {e}")
        return True


def _cmd_debug(ns) -> int:
    try:
        store = load_session(ns.session)
    except (OSError, SessionFormatError) as e:
        return _fail(str(e))
    if store.next_t <= store.base:
        return _fail("session holds no events")
    repl = _Repl(store)
    repl.headline()
    if ns.execute is not None:
        for line in ns.execute.replace(";", "\n").split("\n"):
            if not repl.handle(line):
                break
        return 0
    interactive = sys.stdin.isatty()
    while True:
        if interactive:
            sys.stderr.write(f"t={repl.t}> ")
            sys.stderr.flush()
        line = sys.stdin.readline()
        if not line:
            return 0
        if not repl.handle(line):
            return 0


# ------------------------------------------------------------------ serve

def _cmd_serve(ns) -> int:
    from .server import serve
    try:
        store = load_session(ns.session)
    except (OSError, SessionFormatError) as e:
        return _fail(str(e))
    static = ns.static
    if static is None:
        guess = os.path.join(os.getcwd(), "frontend", "dist")
        if os.path.isdir(guess):
            static = guess
    print(f"serving {ns.session} on http://{ns.host}:{ns.port}",
          file=sys.stderr)
    try:
        serve(store, ns.host, ns.port, static)
    except KeyboardInterrupt:
        pass
    return 0


# ------------------------------------------------------------------ wiring

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odbx",
        description="Record a program's entire history, then debug it "
                    "backwards and forwards in time.")
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("record", help="run a program and save a session")
    rec.add_argument("program", help="source file to run")
    rec.add_argument("-o", "--output", help="session file "
                     "(default: program name with .odbx)")
    rec.add_argument("--max-events", type=int, default=None,
                     help="retained event budget "
                          "(default: ODBX_MAX_EVENTS or unlimited)")
    rec.add_argument("--on-overflow", choices=("gc", "halt"), default="gc",
                     help="at the budget: collect oldest half, or stop "
                          "recording")
    rec.add_argument("--exclude", action="append", metavar="FNS",
                     help="comma-separated functions to record nothing in")
    rec.add_argument("--start-when", metavar="PATTERN",
                     help="begin recording at the first matching event")
    rec.add_argument("--stop-when", metavar="PATTERN",
                     help="stop recording after each matching event")
    rec.add_argument("--quantum", type=int, default=10,
                     help="thread switch interval in steps (default 10)")
    rec.set_defaults(fn=_cmd_record)

    dbg = sub.add_parser("debug", help="step through a recorded session")
    dbg.add_argument("session", help=".odbx session file")
    dbg.add_argument("-e", "--execute", metavar="CMDS",
                     help="run these ;-separated commands and exit")
    dbg.set_defaults(fn=_cmd_debug)

    qry = sub.add_parser("query", help="search a session's events")
    qry.add_argument("session")
    qry.add_argument("pattern")
    qry.add_argument("--from", dest="from_t", type=int, default=None,
                     help="search strictly beyond this timestamp")
    qry.add_argument("--backward", action="store_true")
    qry.add_argument("--all", action="store_true",
                     help="list every match, not just the nearest")
    qry.set_defaults(fn=_cmd_query)

    srv = sub.add_parser("serve", help="expose a session over HTTP")
    srv.add_argument("session")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8600)
    srv.add_argument("--static", default=None,
                     help="directory with the web client "
                          "(default: ./frontend/dist when present)")
    srv.set_defaults(fn=_cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.fn(ns)
    except OdbxError as e:
        return _fail(str(e))


if __name__ == "__main__":
    sys.exit(main())
