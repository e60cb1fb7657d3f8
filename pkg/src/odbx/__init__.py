"""odbx: record a program's every state change, then debug it backwards.

The bundled mini language runs on a deterministic VM whose instrumented
bytecode reports each store, call, return, print, throw and catch to a
recorder. The resulting event log can be reverted to any past timestamp,
navigated step by step in either direction, searched with an event
pattern language, saved to disk, and partially re-executed.
"""

__version__ = "0.1.0"

from .errors import (
    CompileError, InstrumentError, MiniSyntaxError, OdbxError, PatternError,
    PreHorizonError, ReplayError, SessionFormatError, VmInternalError,
)
from .recorder import (
    EventKind, EventStore, HistoryList, Recorder, RecorderConfig, TraceLine,
    pack_event_word, unpack_event_word,
)

__all__ = [
    "CompileError", "InstrumentError", "MiniSyntaxError", "OdbxError",
    "PatternError", "PreHorizonError", "ReplayError", "SessionFormatError",
    "VmInternalError",
    "EventKind", "EventStore", "HistoryList", "Recorder", "RecorderConfig",
    "TraceLine", "pack_event_word", "unpack_event_word",
    "__version__",
]
