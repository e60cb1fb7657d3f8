"""Re-run a call against the program state of any recorded moment.

The heap as of time t is rebuilt from the value histories: every handle
the log knows gets a twin object carrying the field, cell, and entry
values current at t, with handle-typed values pointing at fellow twins.
A fresh single-thread VM then executes one call in that world, recorded
into its own event store, so the result can be inspected with the same
timeline machinery as the original run. The original store is never
touched.

Twin stores seed each materialized variable with a baseline at t=-1,
which keeps every value history valid from timestamp 0 on.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field

from .errors import ReplayError
from .minivm.compiler import compile_source
from .minivm.instrument import instrument
from .minivm.machine import VM
from .minivm.values import (
    ArrayHandle,
    ListHandle,
    MapHandle,
    ObjectHandle,
    UNSET,
    display_name,
    is_handle,
    values_equal,
)
from .recorder import (
    EventStore,
    HistoryList,
    Recorder,
    RecorderConfig,
    TraceLine,
)
from .timeline import _base_handle, _split_ref, handle_registry, resolve_ref
from .timeline import value_at as _value_at

__all__ = [
    "ReplayResult",
    "materialize_heap",
    "eval_call",
    "eval_text",
    "replay_call",
    "equivalent",
]

# bookkeeping pseudo-fields written by the lock machinery; they are not
# object state and must not appear on twins
_META_FIELDS = ("_lockedBy", "_blockedOn")


@dataclass
class ReplayResult:
    value: object
    threw: object
    stdout: str
    store: EventStore
    twins: dict = field(repr=False)

    @property
    def ok(self) -> bool:
        return self.threw is None


def _twin_of(handle):
    if isinstance(handle, ObjectHandle):
        return ObjectHandle(handle.class_name, handle.index)
    if isinstance(handle, ArrayHandle):
        return ArrayHandle(handle.index, len(handle.cells))
    if isinstance(handle, ListHandle):
        return ListHandle(handle.index)
    return MapHandle(handle.index)


def materialize_heap(store: EventStore, t: int):
    """Twin every known handle and fill in its state as of t.

    Returns (twins, baselines): twins maps id(original) -> twin,
    baselines maps history keys in the twin world to their value at t.
    """
    twins: dict[int, object] = {}
    for handle in handle_registry(store).values():
        twins[id(handle)] = _twin_of(handle)

    def mapped(v):
        if is_handle(v):
            tw = twins.get(id(v))
            if tw is None:
                tw = _twin_of(v)
                twins[id(v)] = tw
            return tw
        return v

    baselines: dict[tuple, object] = {}
    for key, hist in store.hists.items():
        tag = key[0]
        if tag not in ("F", "E"):
            continue
        if tag == "F" and key[2] in _META_FIELDS:
            continue
        v = hist.value_at(t)
        if v is UNSET:
            continue
        target = mapped(key[1])
        v = mapped(v)
        if tag == "F":
            target.slots[key[2]] = v
            baselines[("F", target, key[2])] = v
        else:
            k = key[2]
            if isinstance(target, ArrayHandle):
                if isinstance(k, int) and 0 <= k < len(target.cells):
                    target.cells[k] = v
                    baselines[("E", target, k)] = v
            elif isinstance(target, ListHandle):
                baselines[("E", target, k)] = v
            else:
                target.entries[k] = v
                baselines[("E", target, k)] = v

    # list cells must stay dense; take consecutive filled slots
    for tw in twins.values():
        if isinstance(tw, ListHandle):
            cells = []
            while ("E", tw, len(cells)) in baselines:
                cells.append(baselines[("E", tw, len(cells))])
            tw.cells = cells
    return twins, baselines


def _apply_override(store, t, rec, twins, ref_text: str, value) -> None:
    base, sel, selector = _split_ref(ref_text)
    if sel == "":
        raise ReplayError(
            f"override target {ref_text!r} needs .field or [key]")
    orig = _base_handle(store, t, base)
    twin = twins.get(id(orig))
    if twin is None:
        raise ReplayError(f"no object behind {ref_text!r} at t={t}")
    if is_handle(value):
        value = twins.get(id(value), value)
    if sel == ".":
        twin.slots[selector] = value
        rec.on_store_field(0, None, twin, selector, value, 0, 0)
        return
    key = selector
    if isinstance(twin, ArrayHandle):
        if not isinstance(key, int) or not 0 <= key < len(twin.cells):
            raise ReplayError(f"index {key!r} out of range for {ref_text!r}")
        twin.cells[key] = value
    elif isinstance(twin, ListHandle):
        if not isinstance(key, int) or not 0 <= key < len(twin.cells):
            raise ReplayError(f"index {key!r} out of range for {ref_text!r}")
        twin.cells[key] = value
    else:
        twin.entries[key] = value
    rec.on_store_index(0, None, twin, key, value, 0, 0)


def eval_call(store: EventStore, t: int, method: str, receiver=None,
              args=(), overrides=(), max_steps: int = 2_000_000
              ) -> ReplayResult:
    """Execute method(args) against the heap as of t.

    receiver and args are original-world values; handles are translated
    to their twins. overrides is a sequence of (ref_text, value) pairs
    applied to the twin heap before the call, each recorded as a store
    event in the replay log.
    """
    if not store.source:
        raise ReplayError("session carries no source to replay")
    program = compile_source(store.source, store.path)
    if method not in program.fn_index:
        raise ReplayError(f"no function named {method!r}")
    instrumented = instrument(program, store.excluded)
    rec = Recorder(RecorderConfig())
    vm = VM(instrumented, rec, max_steps=max_steps)
    vm.allow_spawn = False
    vm.alloc.counters.update(store.alloc_counters)

    twins, baselines = materialize_heap(store, t)
    for key, v in baselines.items():
        hist = HistoryList()
        hist.ts = array("q", [-1])
        hist.values = [v]
        rec.store.hists[key] = hist

    for ref_text, v in overrides:
        _apply_override(store, t, rec, twins, ref_text, v)

    def mapped(v):
        return twins.get(id(v), v) if is_handle(v) else v

    vm.start_call(method, mapped(receiver), [mapped(a) for a in args])
    vm.run()
    st2 = rec.finish(vm)
    st2.excluded = list(store.excluded)
    root = vm.threads[0].root_tl
    threw = vm.uncaught[0][1] if vm.uncaught else None
    value = None if threw is not None else root.ret_value
    return ReplayResult(value, threw, vm.stdout, st2, twins)


def replay_call(store: EventStore, tl: TraceLine,
                max_steps: int = 2_000_000) -> ReplayResult:
    """Re-execute a recorded call with the heap as it stood when the
    call happened."""
    if tl.call_t is None:
        raise ReplayError("that call was never recorded")
    if tl.args is None:
        raise ReplayError("the call's arguments went unrecorded")
    return eval_call(store, tl.call_t, tl.method, tl.receiver, tl.args,
                     max_steps=max_steps)


def equivalent(expected, got, twins: dict) -> bool:
    """Does a replay value correspond to an original-world value?
    Handles match their twins; a handle the twin map has never seen
    matches on type and display identity."""
    if is_handle(expected):
        tw = twins.get(id(expected))
        if tw is not None:
            return got is tw
        return (type(got) is type(expected)
                and is_handle(got)
                and display_name(got) == display_name(expected))
    return not is_handle(got) and values_equal(expected, got)


# -- textual call requests, for the prompt and the wire

def _split_args(text: str) -> list[str]:
    parts = []
    depth = 0
    buf = []
    in_str = False
    i = 0
    while i < len(text):
        c = text[i]
        if in_str:
            buf.append(c)
            if c == "\\" and i + 1 < len(text):
                buf.append(text[i + 1])
                i += 2
                continue
            if c == '"':
                in_str = False
        elif c == '"':
            in_str = True
            buf.append(c)
        elif c in "([<":
            depth += 1
            buf.append(c)
        elif c in ")]>":
            depth -= 1
            buf.append(c)
        elif c == "," and depth == 0:
            parts.append("".join(buf).strip())
            buf = []
        else:
            buf.append(c)
        i += 1
    tail = "".join(buf).strip()
    if tail:
        parts.append(tail)
    return parts


def _arg_value(store: EventStore, t: int, text: str):
    if text == "null":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return (text[1:-1].replace('\\"', '"').replace("\\n", "\n")
                .replace("\\\\", "\\"))
    try:
        return int(text)
    except ValueError:
        pass
    if text.startswith("<") and text.endswith(">"):
        handle = handle_registry(store).get(text)
        if handle is None:
            raise ReplayError(f"unknown object {text}")
        return handle
    try:
        return _value_at(store, resolve_ref(store, t, text), t)
    except ValueError as e:
        raise ReplayError(str(e)) from None


def eval_text(store: EventStore, t: int, text: str,
              overrides=(), max_steps: int = 2_000_000) -> ReplayResult:
    """Evaluate a call written as text, e.g. ``fee(acct, 30)`` or
    ``<Account_0>.fee(30)``, with arguments resolved at time t."""
    text = text.strip()
    if not text.endswith(")") or "(" not in text:
        raise ReplayError("expected a call like name(arg, ...)")
    open_paren = text.index("(")
    head = text[:open_paren].strip()
    arg_texts = _split_args(text[open_paren + 1:-1])
    args = [_arg_value(store, t, a) for a in arg_texts]

    receiver = None
    method = head
    if "." in head:
        gt = head.rindex(">") if head.startswith("<") else -1
        dot = head.find(".", gt if gt > 0 else 0)
        if dot > 0:
            recv_text = head[:dot]
            method = head[dot + 1:]
            receiver = _base_handle(store, t, recv_text)
    if not method.isidentifier():
        raise ReplayError(f"bad method name {method!r}")

    resolved = []
    for ref_text, v in overrides:
        if isinstance(v, str):
            v = _arg_value(store, t, v)
        resolved.append((ref_text, v))
    return eval_call(store, t, method, receiver, args, resolved,
                     max_steps=max_steps)
