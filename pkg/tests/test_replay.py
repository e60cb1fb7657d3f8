"""Secondary-timeline execution: calls replayed against reverted
heap state, with the primary log untouchable."""

import io

import pytest

from conftest import recorded

from odbx.errors import ReplayError
from odbx.minivm.values import ArrayHandle
from odbx.recorder import EventKind
from odbx.replay import (
    equivalent,
    eval_call,
    eval_text,
    materialize_heap,
    replay_call,
)
from odbx.session import dump_session
from odbx.timeline import handle_registry, value_at

K = EventKind


def snapshot(store):
    buf = io.BytesIO()
    dump_session(store, buf)
    return buf.getvalue()


def test_twins_carry_state_as_of_t():
    store, _ = recorded("quicksort")
    arr = handle_registry(store)["<array[12]_0>"]
    twins, baselines = materialize_heap(store, 120)
    tw = twins[id(arr)]
    assert isinstance(tw, ArrayHandle) and tw is not arr
    assert len(tw.cells) == len(arr.cells)
    # cell 6 was 75 at t=120 and 54 at the end
    assert baselines[("E", tw, 6)] == 75
    twins_end, base_end = materialize_heap(store, store.next_t - 1)
    assert base_end[("E", twins_end[id(arr)], 6)] == 54


def test_handle_references_point_at_twins():
    store, _ = recorded("bank")
    reg = handle_registry(store)
    teller = reg["<Teller_0>"]
    acct = reg["<Account_0>"]
    twins, baselines = materialize_heap(store, store.next_t - 1)
    # the teller's account field must reference the twin account
    assert baselines[("F", twins[id(teller)], "account")] is twins[id(acct)]


def test_meta_fields_stay_out_of_the_replay_heap():
    store, _ = recorded("bank")
    _, baselines = materialize_heap(store, store.next_t - 1)
    assert all(key[2] != "_lockedBy" for key in baselines if key[0] == "F")


def test_replayed_call_reproduces_recorded_return():
    store, _ = recorded("bank")
    fees = [tl for tl in store.tracelines.values() if tl.method == "fee"]
    assert fees
    for tl in fees[:3]:
        res = replay_call(store, tl)
        assert res.ok
        assert equivalent(tl.ret_value, res.value, res.twins)


def test_replay_leaves_the_primary_log_alone():
    store, _ = recorded("quicksort")
    before = snapshot(store)
    avg = next(tl for tl in store.tracelines.values()
               if tl.method == "average")
    res = replay_call(store, avg)
    assert res.ok and res.value == avg.ret_value
    assert snapshot(store) == before


def test_replay_records_its_own_log():
    store, _ = recorded("bank")
    tl = next(t for t in store.tracelines.values() if t.method == "fee")
    res = replay_call(store, tl)
    kinds = {K(res.store.kind_at(t)) for t in range(res.store.next_t)}
    assert K.CALL in kinds and K.RETURN in kinds
    # replay world answers value questions like any recording
    root = next(x for x in res.store.tracelines.values()
                if x.method == "fee")
    assert value_at(res.store, ("L", root.id, "amount"),
                    res.store.next_t - 1) == tl.args[0]


def test_overrides_change_the_answer_and_are_logged():
    store, _ = recorded("bank")
    tl = next(t for t in store.tracelines.values() if t.method == "fee")
    plain = replay_call(store, tl)
    bumped = eval_call(store, tl.call_t, "fee", tl.receiver, [1000])
    assert plain.ok and bumped.ok
    assert bumped.value == 1 + 1000 * 3 // 100
    res = eval_call(store, tl.call_t, "fee", tl.receiver, tl.args,
                    overrides=[("<Account_0>.balance", 9999)])
    assert res.ok
    # the override itself is on the replay tape as a field store
    stores = [t for t in range(res.store.next_t)
              if res.store.kind_at(t) == K.FIELD_ASSIGN]
    assert any(res.store.payload_at(t)[3] == 9999 for t in stores)


def test_eval_text_forms():
    store, _ = recorded("bank")
    t = store.next_t - 1
    res = eval_text(store, t, "<Teller_0>.fee(250)")
    assert res.ok and res.value == 1 + 250 * 3 // 100
    # arguments may be references resolved at t
    res2 = eval_text(store, t, "<Teller_0>.fee(<Account_0>.balance)")
    assert res2.ok
    bal = value_at(store, ("F", handle_registry(store)["<Account_0>"],
                           "balance"), t)
    assert res2.value == 1 + bal * 3 // 100
    with pytest.raises(ReplayError):
        eval_text(store, t, "fee 250")
    with pytest.raises(ReplayError):
        eval_text(store, t, "nosuch(1)")


def test_throw_inside_replay_is_reported_not_raised():
    store, _ = recorded("exceptions")
    res = eval_text(store, store.next_t - 1, "load(<array[3]_0>, 9)")
    assert not res.ok
    assert "out of range" in str(res.threw)


def test_spawn_refused_in_replay():
    store, _ = recorded("bank")
    t = store.next_t - 1
    with pytest.raises(ReplayError):
        eval_text(store, t, "main()")


def test_replay_allocations_do_not_collide():
    store, _ = recorded("collections")
    t = store.next_t - 1
    res = eval_text(store, t, "prepend(null, 5)")
    assert res.ok
    # recorded Cells are 0..2, so the fresh one must be Cell_3
    from odbx.minivm.values import display_name
    assert display_name(res.value) == "<Cell_3>"


def test_replay_error_when_the_source_is_gone():
    store, _ = recorded("quicksort")
    import copy
    bare = copy.copy(store)
    bare.source = ""
    tl = next(t for t in store.tracelines.values() if t.method == "average")
    with pytest.raises(ReplayError):
        eval_call(bare, tl.call_t, "average", None, tl.args)


def test_replay_error_on_unrecorded_call():
    from odbx.recorder import TraceLine
    store, _ = recorded("quicksort")
    draft = TraceLine(0, "average", None, [0, 3], 1, 0)
    with pytest.raises(ReplayError):
        replay_call(store, draft)
    seen = TraceLine(0, "average", None, None, 1, 0)
    seen.call_t = 17
    with pytest.raises(ReplayError):
        replay_call(store, seen)
