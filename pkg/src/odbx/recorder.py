"""Event recording: the append-only log every other component reads.

Each state change becomes one event. A timestamp is simply the event's
index in the log; nothing is ever renumbered, so a timestamp stays valid
for the life of a session even after garbage collection drops the oldest
events.

An event is a packed 32-bit word plus a payload tuple:

    bits 31..24  thread index
    bits 23..4   source line
    bits  3..0   event kind

Payload shapes by kind (tl is a TraceLine object):

    call           (tl,)
    return         (tl,)
    local-assign   (tl, name, value)
    field-assign   (tl, object, field, value)
    array-store    (tl, container, key, value)
    output         (tl, journal_index)
    throw          (tl, value)
    catch          (tl, value)
    context-switch (from_idx, to_idx)
    thread-start   (new_idx, tl)
    thread-block   (tl, lock_handle, holder_idx)
    thread-unblock (tl, lock_handle)
    marker         (reason,)

Per-variable history lives in HistoryLists: sorted (timestamp, value)
pairs supporting closest-previous lookup. An assignment exactly at t is
visible at t.
"""

from __future__ import annotations

from array import array
from bisect import bisect_right
from enum import IntEnum

from .errors import PreHorizonError, VmInternalError
from .minivm.values import UNSET

THREAD_SHIFT = 24
LINE_SHIFT = 4
KIND_MASK = 0xF
LINE_MASK = 0xFFFFF
THREAD_MAX = 0xFF
LINE_MAX = LINE_MASK


class EventKind(IntEnum):
    # serialized in sessions; the numbers are frozen
    CALL = 0
    RETURN = 1
    LOCAL_ASSIGN = 2
    FIELD_ASSIGN = 3
    ARRAY_STORE = 4
    OUTPUT = 5
    THROW = 6
    CATCH = 7
    CONTEXT_SWITCH = 8
    THREAD_START = 9
    THREAD_BLOCK = 10
    THREAD_UNBLOCK = 11
    MARKER = 12


def pack_event_word(thread_idx: int, line: int, kind: int) -> int:
    if not 0 <= thread_idx <= THREAD_MAX:
        raise VmInternalError(f"thread index {thread_idx} out of range")
    if line > LINE_MAX:
        line = LINE_MAX
    elif line < 0:
        line = 0
    return (thread_idx << THREAD_SHIFT) | (line << LINE_SHIFT) | int(kind)


def unpack_event_word(word: int) -> tuple[int, int, int]:
    return (word >> THREAD_SHIFT,
            (word >> LINE_SHIFT) & LINE_MASK,
            word & KIND_MASK)


def word_thread(word: int) -> int:
    return word >> THREAD_SHIFT


def word_line(word: int) -> int:
    return (word >> LINE_SHIFT) & LINE_MASK


def word_kind(word: int) -> int:
    return word & KIND_MASK


class TraceLine:
    """One call in the trace: who called what with which arguments, and,
    once back-patched, what came out and when."""

    __slots__ = ("id", "thread_idx", "method", "receiver", "args", "line",
                 "depth", "call_t", "ret_t", "ret_value", "unwound",
                 "synthetic", "pre_horizon", "parent")

    def __init__(self, thread_idx: int, method: str, receiver, args,
                 line: int, depth: int):
        self.id: int | None = None
        self.thread_idx = thread_idx
        self.method = method
        self.receiver = receiver
        self.args = args            # None when the call itself went unseen
        self.line = line
        self.depth = depth
        self.call_t: int | None = None
        self.ret_t: int | None = None
        self.ret_value = None
        self.unwound = False
        self.synthetic = False
        self.pre_horizon = False
        self.parent: TraceLine | None = None    # stack neighbor below

    def __repr__(self):
        return f"TraceLine#{self.id}({self.method} @t={self.call_t})"


MISSING = UNSET     # alias: "no value at this time"


class HistoryList:
    """All values one variable ever held, as parallel sorted arrays."""

    __slots__ = ("ts", "values")

    def __init__(self):
        self.ts = array("q")
        self.values: list = []

    def append(self, t: int, value) -> None:
        self.ts.append(t)
        self.values.append(value)

    def value_at(self, t: int):
        """Value in effect at time t; an assignment at t counts."""
        i = bisect_right(self.ts, t) - 1
        return self.values[i] if i >= 0 else MISSING

    def index_at(self, t: int) -> int:
        """Index of the entry in effect at t, or -1."""
        return bisect_right(self.ts, t) - 1

    def __len__(self):
        return len(self.ts)

    def prune_to(self, horizon: int) -> None:
        """Drop entries before `horizon`, leaving one baseline entry at the
        horizon carrying the value that was current there."""
        keep_from = 0
        n = len(self.ts)
        while keep_from < n and self.ts[keep_from] < horizon:
            keep_from += 1
        if keep_from == 0:
            return
        baseline = self.values[keep_from - 1]
        new_ts = array("q", [horizon])
        new_ts.extend(self.ts[keep_from:])
        self.values = [baseline] + self.values[keep_from:]
        self.ts = new_ts


class ThreadInfo:
    __slots__ = ("idx", "name", "fn_name", "receiver")

    def __init__(self, idx: int, name: str, fn_name: str, receiver):
        self.idx = idx
        self.name = name
        self.fn_name = fn_name
        self.receiver = receiver


class EventStore:
    """Everything a finished (or in-progress) recording holds. Passive:
    the debugger-side modules only read it; only Recorder writes it."""

    def __init__(self):
        self.words = array("I")
        self.depths = array("i")
        self.payloads: list[tuple] = []
        self.base = 0               # timestamp of words[0]
        self.horizon = 0            # earliest reconstructable timestamp
        self.hists: dict[tuple, HistoryList] = {}
        self.tracelines: dict[int, TraceLine] = {}
        self.trace_seq: dict[int, list[TraceLine]] = {}
        self.horizon_stacks: dict[int, list[TraceLine]] = {}
        self.threads: list[ThreadInfo] = []
        self.outputs: list[list] = []   # [t, text] pairs, t patched in
        self.fn_params: dict[str, list[str]] = {}
        self.source = ""
        self.path: str | None = None
        self.entry = "main"
        self.quantum = 0
        self.excluded: list[str] = []
        self.fn_locals: dict[str, list[str]] = {}
        self.alloc_counters: dict[str, int] = {}
        self.gc_runs = 0
        self.caches: dict = {}      # derived indexes, owned by readers

    # -- timestamp addressing

    @property
    def next_t(self) -> int:
        return self.base + len(self.words)

    def _idx(self, t: int) -> int:
        if t < self.base:
            raise PreHorizonError(t, self.base)
        i = t - self.base
        if i >= len(self.words):
            raise IndexError(f"timestamp {t} not recorded yet")
        return i

    def word_at(self, t: int) -> int:
        return self.words[self._idx(t)]

    def payload_at(self, t: int) -> tuple:
        return self.payloads[self._idx(t)]

    def depth_at(self, t: int) -> int:
        return self.depths[self._idx(t)]

    def kind_at(self, t: int) -> int:
        return self.words[self._idx(t)] & KIND_MASK

    def thread_at(self, t: int) -> int:
        return self.words[self._idx(t)] >> THREAD_SHIFT

    def line_at(self, t: int) -> int:
        return (self.words[self._idx(t)] >> LINE_SHIFT) & LINE_MASK

    def hist(self, key: tuple) -> HistoryList | None:
        return self.hists.get(key)

    def thread_name(self, idx: int) -> str:
        if 0 <= idx < len(self.threads):
            return self.threads[idx].name
        return f"thread-{idx}"


class RecorderConfig:
    __slots__ = ("max_events", "on_overflow")

    def __init__(self, max_events: int | None = None,
                 on_overflow: str = "gc"):
        if max_events is not None and max_events < 10:
            raise ValueError("max_events must be at least 10")
        if on_overflow not in ("gc", "halt"):
            raise ValueError("on_overflow must be 'gc' or 'halt'")
        self.max_events = max_events
        self.on_overflow = on_overflow


class Recorder:
    """Builds an EventStore while a VM runs.

    With a start trigger set, recording begins switched off and turns on
    at the first matching event; a marker event notes each transition.
    The matching event itself is always recorded, on both edges.
    """

    def __init__(self, config: RecorderConfig | None = None):
        self.store = EventStore()
        self.config = config or RecorderConfig()
        self.recording = True
        self.halted = False
        self.start_test = None      # (store, word, payload) -> bool
        self.stop_test = None
        self.open_stacks: dict[int, list[TraceLine]] = {}
        self._next_tl_id = 0

    # -- wiring

    def set_triggers(self, start_test=None, stop_test=None) -> None:
        self.start_test = start_test
        self.stop_test = stop_test
        if start_test is not None:
            self.recording = False

    def set_recording(self, on: bool, thread_idx: int = 0,
                      line: int = 0) -> None:
        """Manual recording switch; writes a marker on every transition."""
        if self.halted or on == self.recording:
            return
        if on:
            self.recording = True
            self._append(pack_event_word(thread_idx, line, EventKind.MARKER),
                         ("recording-on",), 0)
        else:
            self._append(pack_event_word(thread_idx, line, EventKind.MARKER),
                         ("recording-off",), 0)
            self.recording = False

    def finish(self, vm) -> EventStore:
        """Copy run-level facts out of the VM once it stops."""
        st = self.store
        st.alloc_counters = dict(vm.alloc.counters)
        st.quantum = vm.quantum
        prog = vm.program
        st.source = prog.source
        st.path = prog.path
        st.fn_params = {f.name: list(f.params) for f in prog.functions}
        st.fn_locals = {f.name: list(f.local_names) for f in prog.functions}
        return st

    # -- the single append path

    def _append(self, word: int, payload: tuple, depth: int) -> int:
        st = self.store
        t = st.next_t
        st.words.append(word)
        st.depths.append(depth)
        st.payloads.append(payload)
        return t

    def _emit(self, kind: int, thread_idx: int, line: int, payload: tuple,
              depth: int) -> int | None:
        if self.halted:
            return None
        word = pack_event_word(thread_idx, line, kind)
        if not self.recording:
            if self.start_test is None or \
                    not self.start_test(self.store, word, payload):
                return None
            self.recording = True
            self._append(pack_event_word(thread_idx, line, EventKind.MARKER),
                         ("recording-on",), depth)
        t = self._append(word, payload, depth)
        if self.stop_test is not None and \
                self.stop_test(self.store, word, payload):
            self._append(pack_event_word(thread_idx, line, EventKind.MARKER),
                         ("recording-off",), depth)
            self.recording = False
        return t

    def _maybe_collect(self) -> None:
        budget = self.config.max_events
        if budget is None or len(self.store.words) < budget:
            return
        if self.config.on_overflow == "halt":
            self.halted = True
            self.recording = False
            return
        self.collect_garbage()

    def _register_tl(self, tl: TraceLine, t: int) -> TraceLine:
        tl.id = self._next_tl_id
        self._next_tl_id += 1
        tl.call_t = t
        st = self.store
        st.tracelines[tl.id] = tl
        st.trace_seq.setdefault(tl.thread_idx, []).append(tl)
        stack = self.open_stacks.setdefault(tl.thread_idx, [])
        tl.parent = stack[-1] if stack else None
        stack.append(tl)
        return tl

    # -- hooks called by the VM

    def register_thread(self, idx: int, name: str, fn_name: str,
                        receiver) -> None:
        if idx > THREAD_MAX:
            raise VmInternalError("too many threads to record")
        self.store.threads.append(ThreadInfo(idx, name, fn_name, receiver))

    def _adopt(self, tl, t: int) -> None:
        # a draft traceline's first recorded event pulls it into the store
        if tl is not None and tl.id is None:
            self._register_tl(tl, t)

    def on_run_start(self, entry: str, line: int) -> TraceLine:
        tl = TraceLine(0, entry, None, [], line, 1)
        t = self._emit(EventKind.CALL, 0, line, (tl,), 0)
        if t is not None:
            self._register_tl(tl, t)
            self._maybe_collect()
        return tl

    def on_call(self, thread_idx: int, caller_tl, method: str, receiver,
                args: list, line: int, depth: int) -> TraceLine:
        # depth is the caller's; the event sits there so that a
        # depth-bounded scan treats the whole callee as deeper
        tl = TraceLine(thread_idx, method, receiver, args, line, depth + 1)
        t = self._emit(EventKind.CALL, thread_idx, line, (tl,), depth)
        if t is not None:
            self._adopt(caller_tl, t)
            self._register_tl(tl, t)
            self._maybe_collect()
        return tl

    def on_return(self, thread_idx: int, tl: TraceLine, value, line: int,
                  depth: int) -> None:
        # value goes on the traceline first so trigger predicates that
        # inspect returnValue see it while the event is being emitted
        tl.ret_value = value
        t = self._emit(EventKind.RETURN, thread_idx, line, (tl,), depth)
        if t is not None:
            self._adopt(tl, t)
            tl.ret_t = t
            self._maybe_collect()

    def on_frame_pop(self, thread_idx: int, tl) -> None:
        stack = self.open_stacks.get(thread_idx)
        if tl is not None and stack and stack[-1] is tl:
            stack.pop()

    def on_thread_done(self, thread_idx: int, tl, value, line: int) -> None:
        if tl is None or tl.ret_t is not None:
            return
        tl.ret_value = value
        t = self._emit(EventKind.RETURN, thread_idx, line, (tl,), 1)
        if t is not None:
            self._adopt(tl, t)
            tl.ret_t = t
            self._maybe_collect()

    def on_unwind_frame(self, thread_idx: int, tl, line: int,
                        depth: int) -> None:
        self.on_frame_pop(thread_idx, tl)
        if tl is None or tl.ret_t is not None:
            return
        t = self._emit(EventKind.RETURN, thread_idx, line, (tl,), depth)
        if t is not None:
            self._adopt(tl, t)
            tl.ret_t = t
            tl.unwound = True
            self._maybe_collect()

    def on_store_local(self, thread_idx: int, tl, name: str, value,
                       line: int, depth: int) -> None:
        t = self._emit(EventKind.LOCAL_ASSIGN, thread_idx, line,
                       (tl, name, value), depth)
        if t is not None and tl is not None:
            self._adopt(tl, t)
            self._hist(("L", tl.id, name)).append(t, value)
            self._maybe_collect()

    def on_store_field(self, thread_idx: int, tl, obj, field: str, value,
                       line: int, depth: int) -> None:
        t = self._emit(EventKind.FIELD_ASSIGN, thread_idx, line,
                       (tl, obj, field, value), depth)
        if t is not None:
            self._adopt(tl, t)
            self._hist(("F", obj, field)).append(t, value)
            self._maybe_collect()

    def on_store_index(self, thread_idx: int, tl, container, key, value,
                       line: int, depth: int) -> None:
        t = self._emit(EventKind.ARRAY_STORE, thread_idx, line,
                       (tl, container, key, value), depth)
        if t is not None:
            self._adopt(tl, t)
            self._hist(("E", container, key)).append(t, value)
            self._maybe_collect()

    def on_print(self, thread_idx: int, tl, text: str, line: int,
                 depth: int) -> None:
        # journal entry goes in first, timestamp patched after, so a
        # trigger predicate probing the text finds it during the emit
        st = self.store
        idx = len(st.outputs)
        st.outputs.append([None, text])
        t = self._emit(EventKind.OUTPUT, thread_idx, line, (tl, idx), depth)
        if t is None:
            st.outputs.pop()
            return
        st.outputs[idx][0] = t
        self._adopt(tl, t)
        self._maybe_collect()

    def on_throw(self, thread_idx: int, tl, value, line: int,
                 depth: int) -> None:
        t = self._emit(EventKind.THROW, thread_idx, line, (tl, value), depth)
        if t is not None:
            self._adopt(tl, t)
            self._maybe_collect()

    def on_catch(self, thread_idx: int, tl, value, line: int,
                 depth: int) -> None:
        t = self._emit(EventKind.CATCH, thread_idx, line, (tl, value), depth)
        if t is not None:
            self._adopt(tl, t)
            self._maybe_collect()

    def on_spawn(self, parent_idx: int, new_idx: int, fn_name: str,
                 receiver, args: list, line: int, depth: int) -> TraceLine:
        tl = TraceLine(new_idx, fn_name, receiver, args, line, 1)
        t = self._emit(EventKind.THREAD_START, parent_idx, line,
                       (new_idx, tl), depth)
        if t is not None:
            self._register_tl(tl, t)
            self._maybe_collect()
        return tl

    def on_block(self, thread_idx: int, tl, handle, holder_idx: int,
                 line: int, depth: int) -> None:
        t = self._emit(EventKind.THREAD_BLOCK, thread_idx, line,
                       (tl, handle, holder_idx), depth)
        if t is not None:
            self._adopt(tl, t)
            self._hist(("T", thread_idx, "_blockedOn")).append(t, handle)
            self._hist(("F", handle, "_lockedBy")).append(
                t, self.store.thread_name(holder_idx))
            self._maybe_collect()

    def on_unblock(self, thread_idx: int, tl, handle, line: int,
                   depth: int) -> None:
        t = self._emit(EventKind.THREAD_UNBLOCK, thread_idx, line,
                       (tl, handle), depth)
        if t is not None:
            self._adopt(tl, t)
            self._hist(("T", thread_idx, "_blockedOn")).append(t, None)
            self._hist(("F", handle, "_lockedBy")).append(
                t, self.store.thread_name(thread_idx))
            self._maybe_collect()

    def on_context_switch(self, from_idx: int, to_idx: int,
                          line: int) -> None:
        if self._emit(EventKind.CONTEXT_SWITCH, to_idx, line,
                      (from_idx, to_idx), 0) is not None:
            self._maybe_collect()

    def orphan_traceline(self, thread_idx: int, method: str, receiver,
                         line: int, depth: int) -> TraceLine:
        """A frame needs a trace line but its call went unrecorded (the
        caller was excluded, or recording was off). Fabricate one; its
        arguments are unknown. While recording is off it stays a draft
        and is adopted by whichever event records it first."""
        tl = TraceLine(thread_idx, method, receiver, None, line, depth)
        tl.synthetic = True
        if self.recording and not self.halted:
            t = self._emit(EventKind.CALL, thread_idx, line, (tl,),
                           depth - 1 if depth > 0 else 0)
            if t is not None:
                self._register_tl(tl, t)
                self._maybe_collect()
        return tl

    def _hist(self, key: tuple) -> HistoryList:
        h = self.store.hists.get(key)
        if h is None:
            h = HistoryList()
            self.store.hists[key] = h
        return h

    # -- garbage collection

    def collect_garbage(self) -> int:
        """Drop the oldest half of the retained window. Returns the new
        horizon. Timestamps of surviving events do not change."""
        st = self.store
        budget = self.config.max_events or len(st.words)
        horizon = st.next_t - budget // 2
        if horizon <= st.base:
            return st.horizon
        st.gc_runs += 1

        # stacks as of the new horizon: replay call/return over the span
        # being dropped, starting from the stacks at the old horizon
        stacks = {k: list(v) for k, v in st.horizon_stacks.items()}
        for i in range(horizon - st.base):
            kind = st.words[i] & KIND_MASK
            if kind == EventKind.CALL:
                tl = st.payloads[i][0]
                stacks.setdefault(tl.thread_idx, []).append(tl)
            elif kind == EventKind.RETURN:
                tl = st.payloads[i][0]
                stack = stacks.get(tl.thread_idx)
                if stack and tl in stack:
                    stack.remove(tl)
            elif kind == EventKind.THREAD_START:
                new_idx, tl = st.payloads[i]
                stacks.setdefault(new_idx, []).append(tl)
        st.horizon_stacks = stacks

        drop = horizon - st.base
        del st.words[:drop]
        del st.depths[:drop]
        del st.payloads[:drop]
        st.base = horizon
        st.horizon = horizon
        st.caches.clear()

        dropped_ids = set()
        kept: dict[int, TraceLine] = {}
        for tid, tl in st.tracelines.items():
            if tl.ret_t is not None and tl.ret_t < horizon:
                dropped_ids.add(tid)
            else:
                if tl.call_t is not None and tl.call_t < horizon:
                    tl.pre_horizon = True
                kept[tid] = tl
        st.tracelines = kept
        for idx in list(st.trace_seq):
            st.trace_seq[idx] = [tl for tl in st.trace_seq[idx]
                                 if tl.id not in dropped_ids]

        for key in list(st.hists):
            if key[0] == "L" and key[1] in dropped_ids:
                del st.hists[key]
                continue
            h = st.hists[key]
            h.prune_to(horizon)
            if len(h) == 0:
                del st.hists[key]
        return horizon
