"""Convenience wiring: source text in, finished EventStore out."""

from __future__ import annotations

from collections.abc import Iterable

from .minivm.compiler import compile_source
from .minivm.instrument import instrument
from .minivm.machine import DEFAULT_QUANTUM, VM
from .recorder import EventStore, Recorder, RecorderConfig


def record_source(text: str, *, path: str | None = None,
                  exclude: Iterable[str] = (),
                  quantum: int = DEFAULT_QUANTUM,
                  max_events: int | None = None,
                  on_overflow: str = "gc",
                  start_pattern: str | None = None,
                  stop_pattern: str | None = None,
                  max_steps: int = 50_000_000) -> tuple[EventStore, VM]:
    """Compile, instrument, run and record a program.

    start_pattern/stop_pattern are pattern-language trigger texts; a
    start pattern leaves recording off until its first match.
    """
    program = compile_source(text, path)
    instrumented = instrument(program, exclude)
    rec = Recorder(RecorderConfig(max_events, on_overflow))
    if start_pattern is not None or stop_pattern is not None:
        from .query import bind_triggers
        bind_triggers(rec, start_pattern, stop_pattern)
    vm = VM(instrumented, rec, quantum, max_steps)
    vm.start()
    vm.run()
    store = rec.finish(vm)
    store.excluded = sorted(set(exclude))
    return store, vm


def run_plain(text: str, *, path: str | None = None,
              quantum: int = DEFAULT_QUANTUM,
              max_steps: int = 50_000_000) -> VM:
    """Run without probes or recorder; the timing baseline."""
    program = compile_source(text, path)
    vm = VM(program, None, quantum, max_steps)
    vm.start()
    vm.run()
    return vm
