"""Shared corpus plumbing and the acceptance summary printer."""

import pathlib

import pytest

from odbx.run import record_source

DEMOS = pathlib.Path(__file__).resolve().parent.parent / "demos"

# the six-program corpus the heavyweight checks sweep
CORPUS = ("quicksort", "bank", "exceptions", "collections",
          "gc_overflow", "report")

_cache: dict = {}


def demo_source(name: str) -> str:
    return (DEMOS / f"{name}.mini").read_text()


def recorded(name: str, **kw):
    """(store, vm) for a demo, recorded once and shared. Callers must
    not mutate the store; use record_source directly when they do."""
    key = (name, tuple(sorted(kw.items())))
    if key not in _cache:
        _cache[key] = record_source(demo_source(name), **kw)
    return _cache[key]


# ------------------------------------------------- acceptance summary

ACCEPTANCE = {
    "test_a1_views_match_reference_everywhere":
        "A1 every-timestamp view equivalence",
    "test_a2_sorting_demo_walkthrough":
        "A2 sorting-demo query and walkthrough",
    "test_a3_random_value_probes":
        "A3 randomized value probes vs linear scan",
    "test_a4_navigation_algebra":
        "A4 navigation inverses and minimality",
    "test_a5_collection_window":
        "A5 reconstruction unchanged above the collection horizon",
    "test_a6_trigger_bounded_recording":
        "A6 trigger-bounded recording captures one extent",
    "test_a7_session_round_trip":
        "A7 session save/load round trip",
    "test_a8_cost_ratios":
        "A8 query-vs-record cost and slowdown ordering",
    "test_a9_replay_faithfulness":
        "A9 replayed calls reproduce recorded returns",
}

_verdicts: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    out = yield
    rep = out.get_result()
    label = ACCEPTANCE.get(item.name.split("[")[0])
    if label is not None and rep.when in ("setup", "call"):
        if rep.outcome != "passed" or label not in _verdicts:
            _verdicts[label] = rep.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _verdicts:
        return
    terminalreporter.section("acceptance")
    for label in ACCEPTANCE.values():
        if label in _verdicts:
            ok = _verdicts[label] == "passed"
            terminalreporter.write_line(
                f"{label}: {'PASS' if ok else 'FAIL'}")
