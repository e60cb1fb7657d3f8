"""Exception types shared across the package."""


class OdbxError(Exception):
    """Base class for all odbx errors."""


class MiniSyntaxError(OdbxError):
    """Source program failed to lex or parse."""

    def __init__(self, message, line, col):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class CompileError(OdbxError):
    """Semantically invalid source (undefined function, no main, ...)."""


class InstrumentError(OdbxError):
    """Bad instrumentation request (unknown excluded name, double pass)."""


class VmInternalError(OdbxError):
    """Invariant violation inside the interpreter; always a bug."""


class PreHorizonError(OdbxError):
    """Timestamp precedes the garbage-collection horizon."""

    def __init__(self, t, horizon):
        super().__init__(f"timestamp {t} precedes horizon {horizon}")
        self.t = t
        self.horizon = horizon


class PatternError(OdbxError):
    """Query pattern failed to parse."""

    def __init__(self, message, pos):
        super().__init__(f"at {pos}: {message}")
        self.message = message
        self.pos = pos


class SessionFormatError(OdbxError):
    """Session file is not loadable."""


class BadMagicError(SessionFormatError):
    pass


class UnsupportedVersionError(SessionFormatError):
    pass


class TruncatedSessionError(SessionFormatError):
    pass


class ReplayError(OdbxError):
    """Replay request cannot be executed (bad method, spawn, arity...)."""
