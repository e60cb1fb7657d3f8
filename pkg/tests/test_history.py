"""HistoryList: closest-previous lookup and pruning."""

import random

from odbx.minivm.values import UNSET
from odbx.recorder import HistoryList


def make(pairs):
    h = HistoryList()
    for t, v in pairs:
        h.append(t, v)
    return h


def test_value_at_basics():
    h = make([(3, "a"), (7, "b"), (12, "c")])
    assert h.value_at(0) is UNSET
    assert h.value_at(2) is UNSET
    assert h.value_at(3) == "a"      # the write at t is visible at t
    assert h.value_at(6) == "a"
    assert h.value_at(7) == "b"
    assert h.value_at(11) == "b"
    assert h.value_at(12) == "c"
    assert h.value_at(10_000) == "c"


def test_index_at():
    h = make([(3, "a"), (7, "b")])
    assert h.index_at(2) == -1
    assert h.index_at(3) == 0
    assert h.index_at(7) == 1
    assert h.index_at(99) == 1


def test_empty():
    h = HistoryList()
    assert len(h) == 0
    assert h.value_at(5) is UNSET
    assert h.index_at(5) == -1


def test_prune_drops_and_leaves_baseline():
    h = make([(3, "a"), (7, "b"), (12, "c")])
    h.prune_to(10)
    assert list(h.ts) == [10, 12]
    assert h.values == ["b", "c"]
    assert h.value_at(10) == "b"
    assert h.value_at(12) == "c"


def test_prune_noop_when_nothing_older():
    h = make([(3, "a"), (7, "b")])
    h.prune_to(3)
    assert list(h.ts) == [3, 7]      # entry at the horizon survives as-is
    h.prune_to(0)
    assert list(h.ts) == [3, 7]


def test_prune_everything_to_one_baseline():
    h = make([(3, "a"), (7, "b")])
    h.prune_to(50)
    assert list(h.ts) == [50]
    assert h.values == ["b"]


def test_random_against_linear_scan():
    rng = random.Random(99)
    h = HistoryList()
    pairs = []
    t = 0
    for _ in range(300):
        t += rng.randrange(1, 5)
        v = rng.randrange(1000)
        h.append(t, v)
        pairs.append((t, v))

    def slow(when):
        best = UNSET
        for pt, pv in pairs:
            if pt <= when:
                best = pv
        return best

    for _ in range(2000):
        probe = rng.randrange(t + 10)
        assert h.value_at(probe) is slow(probe) or \
            h.value_at(probe) == slow(probe)

    # pruning must preserve every answer at or past the horizon
    horizon = pairs[120][0]
    h.prune_to(horizon)
    for _ in range(500):
        probe = rng.randrange(horizon, t + 10)
        assert h.value_at(probe) == slow(probe)
