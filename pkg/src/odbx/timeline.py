"""Reconstruction and navigation: turn the event log back into program
state at any recorded timestamp.

Nothing here mutates the store. Reverting is O(stack depth + variables)
per view thanks to per-variable history lists and trace-line parent
chains; no events are replayed.

Variable references used by value_at and values_of are tuples:

    ("L", traceline_id, name)    a local of one call
    ("F", handle, field)         an object field (also "_lockedBy")
    ("E", handle, key)           an array cell, list slot or map entry
    ("T", thread_idx, "_blockedOn")
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ._kernels import scan_words
from .errors import PreHorizonError
from .minivm.values import (
    UNSET, ArrayHandle, ListHandle, MapHandle, display_name, is_handle,
)
from .recorder import (
    EventKind, EventStore, KIND_MASK, LINE_SHIFT, LINE_MASK, THREAD_SHIFT,
    TraceLine,
)

_THREAD_MASK = 0xFF << THREAD_SHIFT

# kinds whose payload names the frame the event happened in
_FRAMED = frozenset({
    EventKind.CALL, EventKind.RETURN, EventKind.LOCAL_ASSIGN,
    EventKind.FIELD_ASSIGN, EventKind.ARRAY_STORE, EventKind.OUTPUT,
    EventKind.THROW, EventKind.CATCH, EventKind.THREAD_BLOCK,
    EventKind.THREAD_UNBLOCK,
})

_EVENT_NAMES = {
    EventKind.CALL: "call", EventKind.RETURN: "return",
    EventKind.LOCAL_ASSIGN: "local-assign",
    EventKind.FIELD_ASSIGN: "field-assign",
    EventKind.ARRAY_STORE: "array-store", EventKind.OUTPUT: "output",
    EventKind.THROW: "throw", EventKind.CATCH: "catch",
    EventKind.CONTEXT_SWITCH: "context-switch",
    EventKind.THREAD_START: "thread-start",
    EventKind.THREAD_BLOCK: "thread-block",
    EventKind.THREAD_UNBLOCK: "thread-unblock",
    EventKind.MARKER: "marker",
}


def event_kind_name(kind: int) -> str:
    return _EVENT_NAMES[EventKind(kind)]


def _check_t(store: EventStore, t: int) -> None:
    if t < store.base:
        raise PreHorizonError(t, store.base)
    if t >= store.next_t:
        raise IndexError(f"timestamp {t} is beyond the end of the recording")


# ---------------------------------------------------------------- values

def _param_binding(store: EventStore, key: tuple):
    """Initial value a local got as a call argument, or UNSET. Argument
    binding writes no store event, so local lookups fall back here."""
    tl = store.tracelines.get(key[1])
    if tl is None or tl.args is None or tl.call_t is None:
        return UNSET, None
    params = store.fn_params.get(tl.method)
    if not params or key[2] not in params:
        return UNSET, None
    i = params.index(key[2])
    if i >= len(tl.args):
        return UNSET, None
    return tl.args[i], tl.call_t


def value_at(store: EventStore, key: tuple, t: int):
    """Value of a variable at time t; UNSET when it had none yet."""
    h = store.hists.get(key)
    if h is not None:
        v = h.value_at(t)
        if v is not UNSET:
            return v
    if key[0] == "L":
        v, bound_t = _param_binding(store, key)
        if bound_t is not None and t >= bound_t:
            return v
    return UNSET


def values_of(store: EventStore, key: tuple) -> list[tuple[int, object]]:
    """Every (timestamp, value) the variable ever held, oldest first.
    For a parameter this includes its binding at the call."""
    h = store.hists.get(key)
    rows = list(zip(h.ts, h.values)) if h is not None else []
    if key[0] == "L":
        v, bound_t = _param_binding(store, key)
        if bound_t is not None and (not rows or rows[0][0] > bound_t):
            rows.insert(0, (bound_t, v))
    return rows


def value_step(store: EventStore, key: tuple, t: int, where: str) -> int:
    """Timestamp of a neighboring value of the variable: "first", "prev",
    "next" or "last" relative to t. -1 when there is none."""
    h = store.hists.get(key)
    if h is None or len(h) == 0:
        return -1
    if where == "first":
        return h.ts[0]
    if where == "last":
        return h.ts[-1]
    i = h.index_at(t)
    if where == "prev":
        # the change before the one in effect at t
        return h.ts[i - 1] if i >= 1 else -1
    if where == "next":
        return h.ts[i + 1] if 0 <= i + 1 < len(h.ts) else -1
    raise ValueError(f"bad value step {where!r}")


# ---------------------------------------------------------------- frames

def _payload_tl(kind: int, payload: tuple):
    if kind == EventKind.RETURN:
        return payload[0].parent
    return payload[0]


def current_traceline(store: EventStore, thread_idx: int,
                      t: int) -> TraceLine | None:
    """The frame thread_idx was in at time t, as its trace line."""
    _check_t(store, t)
    words = store.words
    want = thread_idx << THREAD_SHIFT
    i = t - store.base
    while i >= 0:
        i = scan_words(words, _THREAD_MASK, want, i, 0, False)
        if i < 0:
            break
        kind = words[i] & KIND_MASK
        if kind in _FRAMED:
            return _payload_tl(kind, store.payloads[i])
        i -= 1
    # no framed events yet: the thread's root if it started, else the
    # stack remembered at the horizon
    seq = store.trace_seq.get(thread_idx)
    if seq and seq[0].call_t is not None and seq[0].call_t <= t:
        return seq[0]
    stack = store.horizon_stacks.get(thread_idx)
    return stack[-1] if stack else None


def stack_at(store: EventStore, thread_idx: int,
             t: int) -> list[TraceLine]:
    """Call stack of a thread at time t, outermost first."""
    tl = current_traceline(store, thread_idx, t)
    chain = []
    while tl is not None:
        chain.append(tl)
        tl = tl.parent
    chain.reverse()
    return chain


def locals_at(store: EventStore, tl: TraceLine, t: int) -> dict:
    """All declared locals of the frame, UNSET where nothing was
    assigned by t. `this` is included for method frames."""
    names = store.fn_locals.get(tl.method)
    if names is None:
        names = []
    out = {}
    if tl.receiver is not None:
        out["this"] = tl.receiver
    for name in names:
        out[name] = value_at(store, ("L", tl.id, name), t)
    return out


def objects_at(store: EventStore, t: int) -> dict:
    """handle -> {field: value} for every object with a field set by t."""
    out: dict = {}
    for key, h in store.hists.items():
        if key[0] != "F":
            continue
        v = h.value_at(t)
        if v is UNSET:
            continue
        out.setdefault(key[1], {})[key[2]] = v
    return out


def elements_at(store: EventStore, handle, t: int) -> dict:
    """key -> value for a container's cells set by t. For arrays, cells
    never stored are absent here (they read as null in the program)."""
    out: dict = {}
    for key, h in store.hists.items():
        if key[0] != "E" or key[1] is not handle:
            continue
        v = h.value_at(t)
        if v is not UNSET:
            out[key[2]] = v
    return out


def output_at(store: EventStore, t: int) -> str:
    """Program output emitted up to and including t."""
    outs = store.outputs
    lo, hi = 0, len(outs)
    while lo < hi:
        mid = (lo + hi) // 2
        if outs[mid][0] <= t:
            lo = mid + 1
        else:
            hi = mid
    return "".join(text + "\n" for _, text in outs[:lo])


def output_ts_at(store: EventStore, t: int) -> list:
    """Timestamp of the print behind each line of output_at(store, t).
    A print whose text embeds newlines owns every line it produced."""
    ts = []
    for et, text in store.outputs:
        if et > t:
            break
        ts.extend([et] * (text.count("\n") + 1))
    return ts


# ---------------------------------------------------------------- threads

@dataclass
class ThreadView:
    idx: int
    name: str
    state: str                  # "run" | "blocked" | "done" | "not-started"
    blocked_on: object = None


def thread_states(store: EventStore, t: int) -> list[ThreadView]:
    views = []
    for info in store.threads:
        seq = store.trace_seq.get(info.idx)
        root = seq[0] if seq else None
        started = info.idx == 0 or (
            root is not None and root.call_t is not None
            and root.call_t <= t) or info.idx in store.horizon_stacks
        if not started:
            views.append(ThreadView(info.idx, info.name, "not-started"))
            continue
        if root is not None and root.ret_t is not None and root.ret_t <= t \
                and root.parent is None:
            views.append(ThreadView(info.idx, info.name, "done"))
            continue
        blocked = value_at(store, ("T", info.idx, "_blockedOn"), t)
        if blocked is not UNSET and blocked is not None:
            views.append(ThreadView(info.idx, info.name, "blocked", blocked))
        else:
            views.append(ThreadView(info.idx, info.name, "run"))
    return views


# ---------------------------------------------------------------- view

@dataclass
class FrameView:
    tl: TraceLine
    line: int                   # where this frame stands at time t
    locals: dict = field(default_factory=dict)


@dataclass
class View:
    t: int
    kind: int
    line: int
    thread_idx: int
    thread_name: str
    event_text: str
    threads: list[ThreadView]
    stack: list[FrameView]      # current thread, outermost first
    output: str
    changed: tuple | None       # variable ref written at t, if any


def describe_event(store: EventStore, t: int) -> str:
    """One human line for the event at t."""
    kind = store.kind_at(t)
    p = store.payload_at(t)
    if kind == EventKind.CALL:
        tl = p[0]
        return f"call {format_traceline_head(tl)}"
    if kind == EventKind.RETURN:
        tl = p[0]
        if tl.unwound:
            return f"unwind {tl.method}"
        return f"return {format_value(tl.ret_value)} from {tl.method}"
    if kind == EventKind.LOCAL_ASSIGN:
        return f"{p[1]} = {format_value(p[2])}"
    if kind == EventKind.FIELD_ASSIGN:
        return f"{display_name(p[1])}.{p[2]} = {format_value(p[3])}"
    if kind == EventKind.ARRAY_STORE:
        return (f"{display_name(p[1])}[{format_value(p[2])}] = "
                f"{format_value(p[3])}")
    if kind == EventKind.OUTPUT:
        return f"output {store.outputs[p[1]][1]!r}"
    if kind == EventKind.THROW:
        return f"throw {format_value(p[1])}"
    if kind == EventKind.CATCH:
        return f"catch {format_value(p[1])}"
    if kind == EventKind.CONTEXT_SWITCH:
        return (f"switch {store.thread_name(p[0])} -> "
                f"{store.thread_name(p[1])}")
    if kind == EventKind.THREAD_START:
        return f"start thread {store.thread_name(p[0])}"
    if kind == EventKind.THREAD_BLOCK:
        return (f"block on {display_name(p[1])} "
                f"(held by {store.thread_name(p[2])})")
    if kind == EventKind.THREAD_UNBLOCK:
        return f"acquire {display_name(p[1])}"
    return f"marker {p[0]}"


def changed_ref(store: EventStore, t: int) -> tuple | None:
    """The variable the event at t wrote, as a value_at reference."""
    kind = store.kind_at(t)
    p = store.payload_at(t)
    if kind == EventKind.LOCAL_ASSIGN and p[0] is not None:
        return ("L", p[0].id, p[1])
    if kind == EventKind.FIELD_ASSIGN:
        return ("F", p[1], p[2])
    if kind == EventKind.ARRAY_STORE:
        return ("E", p[1], p[2])
    return None


def starred_locals(store: EventStore, prev: int, t: int) -> list:
    """Names in the frame displayed at t whose shown value differs from
    the frame displayed at prev. New names count as changed."""
    _check_t(store, prev)
    _check_t(store, t)

    def shown(u):
        stack = stack_at(store, store.thread_at(u), u)
        if not stack:
            return {}
        return {name: format_value_at(store, v, u)
                for name, v in locals_at(store, stack[-1], u).items()}

    before = shown(prev)
    return sorted(name for name, text in shown(t).items()
                  if before.get(name) != text)


def reconstruct_view(store: EventStore, t: int) -> View:
    """The debugger's whole picture at time t."""
    _check_t(store, t)
    thread_idx = store.thread_at(t)
    stack_tls = stack_at(store, thread_idx, t)
    frames = []
    for i, tl in enumerate(stack_tls):
        if i + 1 < len(stack_tls):
            line = stack_tls[i + 1].line     # paused at the call site
        else:
            line = store.line_at(t)
        frames.append(FrameView(tl, line, locals_at(store, tl, t)))
    return View(
        t=t,
        kind=store.kind_at(t),
        line=store.line_at(t),
        thread_idx=thread_idx,
        thread_name=store.thread_name(thread_idx),
        event_text=describe_event(store, t),
        threads=thread_states(store, t),
        stack=frames,
        output=output_at(store, t),
        changed=changed_ref(store, t),
    )


# ---------------------------------------------------------------- navigation

def _scan_thread(store: EventStore, thread_idx: int, start_t: int,
                 forward: bool):
    """Yield event indexes of one thread walking away from start_t."""
    words = store.words
    want = thread_idx << THREAD_SHIFT
    i = start_t - store.base
    while True:
        if forward:
            i = scan_words(words, _THREAD_MASK, want, i, len(words), True)
        else:
            i = scan_words(words, _THREAD_MASK, want, i, 0, False)
        if i < 0:
            return
        yield i
        i = i + 1 if forward else i - 1


def navigate(store: EventStore, t: int, command: str, arg=None) -> int:
    """One navigation move from t. Returns the new timestamp, or -1 when
    there is nothing in that direction."""
    _check_t(store, t)
    last = store.next_t - 1
    if command == "first":
        return store.base
    if command == "last":
        return last
    if command == "back":
        return t - 1 if t - 1 >= store.base else -1
    if command == "forward":
        return t + 1 if t + 1 <= last else -1
    if command == "goto":
        if arg is None or isinstance(arg, bool):
            raise ValueError("goto needs a timestamp argument")
        target = int(arg)
        _check_t(store, target)
        return target

    thread_idx = store.thread_at(t)
    if command in ("step_over_fwd", "step_over_back"):
        depth = store.depth_at(t)
        forward = command.endswith("fwd")
        start = t + 1 if forward else t - 1
        if not store.base <= start <= last:
            return -1
        for i in _scan_thread(store, thread_idx, start, forward):
            if store.depths[i] <= depth:
                return store.base + i
        return -1
    if command in ("step_in_fwd", "step_in_back"):
        forward = command.endswith("fwd")
        start = t + 1 if forward else t - 1
        if not store.base <= start <= last:
            return -1
        for i in _scan_thread(store, thread_idx, start, forward):
            return store.base + i
        return -1
    if command == "step_out_back":
        tl = current_traceline(store, thread_idx, t)
        if tl is None or tl.call_t is None or tl.call_t <= store.base:
            return -1
        for i in _scan_thread(store, thread_idx, tl.call_t - 1, False):
            return store.base + i
        return -1
    if command == "return_from":
        tl = current_traceline(store, thread_idx, t)
        if tl is None or tl.ret_t is None or tl.ret_t > last:
            return -1
        return tl.ret_t
    if command in ("next_iteration", "prev_iteration"):
        tl = current_traceline(store, thread_idx, t)
        line = store.line_at(t)
        forward = command.startswith("next")
        start = t + 1 if forward else t - 1
        if not store.base <= start <= last:
            return -1
        for i in _scan_thread(store, thread_idx, start, forward):
            kind = store.words[i] & KIND_MASK
            if kind not in _FRAMED:
                continue
            if _payload_tl(kind, store.payloads[i]) is tl and \
                    (store.words[i] >> LINE_SHIFT) & LINE_MASK == line:
                return store.base + i
        return -1
    if command == "thread_select":
        idx = int(arg)
        if store.thread_at(t) == idx:
            return t
        back = next(_scan_thread(store, idx, t, False), None)
        fwd = next(_scan_thread(store, idx, t + 1, True), None) \
            if t + 1 <= last else None
        if back is None and fwd is None:
            return -1
        if back is None:
            return store.base + fwd
        if fwd is None:
            return store.base + back
        # nearest wins; a tie goes to the earlier event
        if t - (store.base + back) <= (store.base + fwd) - t:
            return store.base + back
        return store.base + fwd
    if command in ("switch_prev", "switch_next"):
        forward = command.endswith("next")
        start = t + 1 if forward else t - 1
        if not store.base <= start <= last:
            return -1
        i = scan_words(store.words, KIND_MASK, int(EventKind.CONTEXT_SWITCH),
                       start - store.base,
                       len(store.words) if forward else 0, forward)
        return store.base + i if i >= 0 else -1
    raise ValueError(f"unknown navigation command {command!r}")


# ---------------------------------------------------------------- formatting

DISPLAY_CAP = 10        # container elements shown before eliding


def format_ref(store: EventStore, ref: tuple) -> str:
    """Textual form of a variable reference tuple, resolve_ref's
    inverse as far as display goes."""
    tag = ref[0]
    if tag == "L":
        return ref[2]
    if tag == "F":
        return f"{display_name(ref[1])}.{ref[2]}"
    if tag == "E":
        return f"{display_name(ref[1])}[{format_value(ref[2])}]"
    return f"thread({ref[1]}).{ref[2]}"


def format_value(v) -> str:
    """Short display form: quoted strings, identity form for handles."""
    if v is UNSET:
        return "--"
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return display_name(v)


def format_value_at(store: EventStore, v, t: int,
                    cap: int = DISPLAY_CAP) -> str:
    """Expanded display: containers show their reconstructed elements."""
    if not is_handle(v):
        return format_value(v)
    cells = elements_at(store, v, t)
    if isinstance(v, MapHandle):
        items = sorted(cells.items(), key=lambda kv: str(kv[0]))
        body = ", ".join(f"{format_value(k)}: {format_value(x)}"
                         for k, x in items[:cap])
        if len(items) > cap:
            body += ", ..."
        return "{" + body + "}"
    if isinstance(v, (ArrayHandle, ListHandle)):
        # a list's reconstructed length is how many slots were pushed by t
        length = len(v.cells) if isinstance(v, ArrayHandle) else len(cells)
        shown = min(length, cap)
        body = ", ".join(format_value(cells.get(i)) for i in range(shown))
        if length > shown:
            body += ", ..."
        return "[" + body + "]"
    # an object: identity plus its fields
    fields = {k[2]: h for k, h in store.hists.items()
              if k[0] == "F" and k[1] is v}
    parts = []
    for name in sorted(fields):
        val = fields[name].value_at(t)
        if val is not UNSET:
            parts.append(f"{name}: {format_value(val)}")
    return display_name(v) + "{" + ", ".join(parts) + "}"


def format_traceline_head(tl: TraceLine) -> str:
    recv = f"{display_name(tl.receiver)}." if tl.receiver is not None else ""
    if tl.args is None:
        args = "(?)"
    else:
        args = "(" + ", ".join(format_value(a) for a in tl.args) + ")"
    return f"{recv}{tl.method}{args}"


def format_traceline(tl: TraceLine, t: int | None = None) -> str:
    """One trace pane line; the return value appears once t reaches it."""
    text = format_traceline_head(tl)
    if tl.ret_t is not None and (t is None or tl.ret_t <= t):
        if tl.unwound:
            text += " -> (unwound)"
        else:
            text += f" -> {format_value(tl.ret_value)}"
    if tl.pre_horizon:
        text = "... " + text
    return text


def trace_block_lines(store: EventStore, thread_idx: int, t: int,
                      limit: int = 20) -> list:
    """(call timestamp, text) for each visible trace pane line."""
    seq = store.trace_seq.get(thread_idx, [])
    lo, hi = 0, len(seq)
    while lo < hi:                      # first call after t
        mid = (lo + hi) // 2
        if seq[mid].call_t is not None and seq[mid].call_t <= t:
            lo = mid + 1
        else:
            hi = mid
    visible = seq[max(0, lo - limit):lo]
    current = current_traceline(store, thread_idx, t)
    lines = []
    for tl in visible:
        mark = "*" if tl is current else " "
        indent = "  " * max(tl.depth - 1, 0)
        lines.append((tl.call_t, f"{mark} {indent}{format_traceline(tl, t)}"))
    return lines


def format_trace_block(store: EventStore, thread_idx: int, t: int,
                       limit: int = 20) -> str:
    """The last `limit` calls of a thread as an indented block. The call
    enclosing the event at t is marked with '*'."""
    return "\n".join(
        text for _, text in trace_block_lines(store, thread_idx, t, limit))


# ---------------------------------------------------------------- references

def handle_registry(store: EventStore) -> dict:
    """display name -> handle, for every handle the log mentions."""
    cached = store.caches.get("handles")
    if cached is not None:
        return cached
    reg: dict = {}

    def note(v):
        if is_handle(v):
            reg.setdefault(display_name(v), v)

    for key in store.hists:
        if key[0] in ("F", "E"):
            note(key[1])
    for h in store.hists.values():
        for v in h.values:
            note(v)
    for tl in store.tracelines.values():
        note(tl.receiver)
        for a in tl.args or ():
            note(a)
    for info in store.threads:
        note(info.receiver)
    store.caches["handles"] = reg
    return reg


def resolve_ref(store: EventStore, t: int, text: str) -> tuple:
    """Parse a textual variable reference in the context of time t.

    Forms nest from the left: name, name.field, name[key],
    <Class_0>.field, <array[20]_1>[16], this.count, a[0].next.
    Returns a value_at reference tuple.
    """
    text = text.strip()
    base, sel, selector = _split_ref(text)
    if sel == "":
        if base.startswith("<"):
            raise ValueError(f"{base} needs .field or [key]")
        tl = current_traceline(store, store.thread_at(t), t)
        if tl is None:
            raise ValueError("no frame here")
        if base == "this":
            raise ValueError("this needs .field or [key]")
        return ("L", tl.id, base)
    handle = _base_handle(store, t, base)
    if sel == ".":
        return ("F", handle, selector)
    return ("E", handle, selector)


def _base_handle(store: EventStore, t: int, base: str):
    if base.startswith("<"):
        handle = handle_registry(store).get(base)
        if handle is None:
            raise ValueError(f"unknown object {base}")
        return handle
    if base == "this":
        tl = current_traceline(store, store.thread_at(t), t)
        if tl is None or tl.receiver is None:
            raise ValueError("no this in this frame")
        return tl.receiver
    value = value_at(store, resolve_ref(store, t, base), t)
    if not is_handle(value):
        raise ValueError(f"{base} is not an object at t={t}")
    return value


def _split_ref(text: str) -> tuple:
    if text.endswith("]"):
        i = text.rindex("[")
        base = text[:i]
        raw = text[i + 1:-1].strip()
        if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
            return base, "[", raw[1:-1]
        try:
            return base, "[", int(raw)
        except ValueError:
            raise ValueError(f"bad index {raw!r}") from None
    if "." in text and not text.startswith("<"):
        base, _, fieldname = text.rpartition(".")
        return base, ".", fieldname
    if text.startswith("<") and "." in text[text.rindex(">"):]:
        i = text.index(".", text.rindex(">"))
        return text[:i], ".", text[i + 1:]
    return text, "", None
