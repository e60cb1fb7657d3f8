"""Save and load recordings as .odbx session files.

The format is line-oriented text: a magic line ``ODBX 1``, one record
per line identified by its first field, and an ``END`` sentinel. All
strings are length-prefixed and escaped, so records survive any method
name, output text, or source content. Saving the same store twice
produces identical bytes; the writer fixes every iteration order.

Heap objects are interned: each handle gets a serial number in the H
table and is referenced as ``@serial`` everywhere else, so equality by
identity survives the round trip. Trace lines are interned the same
way through their ids. Full record grammar in docs/format.md.
"""

from __future__ import annotations

from array import array

from .errors import (
    BadMagicError,
    SessionFormatError,
    TruncatedSessionError,
    UnsupportedVersionError,
)
from .minivm.values import (
    ArrayHandle,
    ListHandle,
    MapHandle,
    ObjectHandle,
    UNSET,
)
from .recorder import (
    EventKind,
    EventStore,
    HistoryList,
    KIND_MASK,
    ThreadInfo,
    TraceLine,
)

__all__ = ["save_session", "load_session", "dump_session", "read_session"]

MAGIC = "ODBX"
VERSION = 1

_HANDLE_TYPES = (ObjectHandle, ArrayHandle, ListHandle, MapHandle)

# per-kind payload field shapes; T traceline id, I bare int, S string,
# V value token
_SHAPES = {
    EventKind.CALL: "T",
    EventKind.RETURN: "T",
    EventKind.LOCAL_ASSIGN: "TSV",
    EventKind.FIELD_ASSIGN: "TVSV",
    EventKind.ARRAY_STORE: "TVVV",
    EventKind.OUTPUT: "TI",
    EventKind.THROW: "TV",
    EventKind.CATCH: "TV",
    EventKind.CONTEXT_SWITCH: "II",
    EventKind.THREAD_START: "IT",
    EventKind.THREAD_BLOCK: "TVI",
    EventKind.THREAD_UNBLOCK: "TV",
    EventKind.MARKER: "S",
}


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r")


def _unescape(s: str) -> str:
    if "\\" not in s:
        return s
    out = []
    i, n = 0, len(s)
    while i < n:
        c = s[i]
        if c == "\\" and i + 1 < n:
            nxt = s[i + 1]
            out.append({"\\": "\\", "n": "\n", "r": "\r"}.get(nxt, nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _stok(s: str) -> str:
    esc = _escape(s)
    return f"s{len(esc)}:{esc}"


class _Writer:
    """Accumulates one session as text lines."""

    def __init__(self, store: EventStore):
        self.store = store
        self.lines: list[str] = [f"{MAGIC} {VERSION}"]
        self.serials: dict[int, int] = {}       # id(handle) -> serial
        self.handles: list = []

    def _collect_handle(self, v) -> None:
        if isinstance(v, _HANDLE_TYPES) and id(v) not in self.serials:
            self.serials[id(v)] = -1            # placeholder until sorted
            self.handles.append(v)

    def _collect(self) -> None:
        st = self.store
        for th in st.threads:
            self._collect_handle(th.receiver)
        for tl in st.tracelines.values():
            self._collect_handle(tl.receiver)
            if tl.args:
                for a in tl.args:
                    self._collect_handle(a)
            self._collect_handle(tl.ret_value)
        for payload in st.payloads:
            for v in payload:
                self._collect_handle(v)
        for key, hist in st.hists.items():
            for part in key:
                self._collect_handle(part)
            for v in hist.values:
                self._collect_handle(v)

        def sort_key(h):
            tag = {ObjectHandle: "o", ArrayHandle: "a",
                   ListHandle: "l", MapHandle: "m"}[type(h)]
            return (tag, h.class_name, h.index)

        self.handles.sort(key=sort_key)
        for serial, h in enumerate(self.handles):
            self.serials[id(h)] = serial

    def value(self, v) -> str:
        if v is None:
            return "n"
        if v is UNSET:
            return "u"
        if isinstance(v, bool):
            return "b1" if v else "b0"
        if isinstance(v, int):
            return f"i{v}"
        if isinstance(v, str):
            return _stok(v)
        if isinstance(v, _HANDLE_TYPES):
            return f"@{self.serials[id(v)]}"
        raise SessionFormatError(f"value {v!r} cannot be serialized")

    def emit(self, *fields) -> None:
        self.lines.append(" ".join(fields))

    def build(self) -> str:
        st = self.store
        self._collect()
        path_tok = "n" if st.path is None else _stok(st.path)
        self.emit("M", str(st.base), str(st.horizon), str(st.quantum),
                  str(st.gc_runs), _stok(st.entry), path_tok)
        self.emit("X", str(len(st.excluded)),
                  *[_stok(x) for x in st.excluded])
        self.emit("S", _stok(st.source))
        for name in st.fn_params:
            params = st.fn_params[name]
            locs = st.fn_locals.get(name, [])
            self.emit("F", _stok(name), str(len(params)),
                      *[_stok(p) for p in params],
                      str(len(locs)), *[_stok(v) for v in locs])
        # the handle table precedes everything that references a handle
        for serial, h in enumerate(self.handles):
            if isinstance(h, ObjectHandle):
                self.emit("H", str(serial), "o", _stok(h.class_name),
                          str(h.index))
            elif isinstance(h, ArrayHandle):
                self.emit("H", str(serial), "a", str(h.index),
                          str(len(h.cells)))
            elif isinstance(h, ListHandle):
                self.emit("H", str(serial), "l", str(h.index))
            else:
                self.emit("H", str(serial), "m", str(h.index))
        for th in st.threads:
            self.emit("T", str(th.idx), _stok(th.name), _stok(th.fn_name),
                      self.value(th.receiver))
        for cls in sorted(st.alloc_counters):
            self.emit("C", _stok(cls), str(st.alloc_counters[cls]))
        for tid in sorted(st.tracelines):
            tl = st.tracelines[tid]
            flags = ((1 if tl.unwound else 0)
                     | (2 if tl.synthetic else 0)
                     | (4 if tl.pre_horizon else 0))
            if tl.args is None:
                args = ["x"]
            else:
                args = [str(len(tl.args))] + [self.value(a) for a in tl.args]
            parent = "x" if (tl.parent is None
                             or tl.parent.id not in st.tracelines) \
                else str(tl.parent.id)
            self.emit("L", str(tid), str(tl.thread_idx), _stok(tl.method),
                      self.value(tl.receiver), *args, str(tl.line),
                      str(tl.depth),
                      "x" if tl.call_t is None else str(tl.call_t),
                      "x" if tl.ret_t is None else str(tl.ret_t),
                      self.value(tl.ret_value), str(flags), parent)
        for i, word in enumerate(st.words):
            payload = st.payloads[i]
            shape = _SHAPES[word & KIND_MASK]
            fields = []
            for spec, part in zip(shape, payload):
                if spec == "T":
                    fields.append(str(part.id))
                elif spec == "I":
                    fields.append(str(part))
                elif spec == "S":
                    fields.append(_stok(part))
                else:
                    fields.append(self.value(part))
            self.emit("E", str(word), str(st.depths[i]), *fields)
        for t, text in st.outputs:
            self.emit("O", str(t), _stok(text))
        vlines = []
        for key, hist in st.hists.items():
            tag = key[0]
            if tag == "L":
                head = ["V", "L", str(key[1]), _stok(key[2])]
            elif tag == "F":
                head = ["V", "F", self.value(key[1]), _stok(key[2])]
            elif tag == "E":
                head = ["V", "E", self.value(key[1]), self.value(key[2])]
            else:
                head = ["V", "T", str(key[1]), _stok(key[2])]
            pairs = []
            for t, v in zip(hist.ts, hist.values):
                pairs.append(str(t))
                pairs.append(self.value(v))
            vlines.append(" ".join(head + [str(len(hist))] + pairs))
        vlines.sort()
        self.lines.extend(vlines)
        for idx in sorted(st.horizon_stacks):
            stack = st.horizon_stacks[idx]
            self.emit("K", str(idx), str(len(stack)),
                      *[str(tl.id) for tl in stack])
        self.lines.append("END")
        return "\n".join(self.lines) + "\n"


class _Fields:
    """Token reader over one record line."""

    __slots__ = ("line", "pos", "lineno")

    def __init__(self, line: str, lineno: int):
        self.line = line
        self.pos = 0
        self.lineno = lineno

    def fail(self, why: str):
        raise SessionFormatError(f"line {self.lineno}: {why}")

    def done(self) -> bool:
        return self.pos >= len(self.line)

    def raw(self) -> str:
        if self.pos >= len(self.line):
            self.fail("record is short a field")
        end = self.line.find(" ", self.pos)
        if end < 0:
            end = len(self.line)
        tok = self.line[self.pos:end]
        self.pos = end + 1
        return tok

    def int_(self) -> int:
        tok = self.raw()
        try:
            return int(tok)
        except ValueError:
            self.fail(f"expected integer, got {tok!r}")

    def opt_int(self) -> int | None:
        tok = self.raw()
        if tok == "x":
            return None
        try:
            return int(tok)
        except ValueError:
            self.fail(f"expected integer or x, got {tok!r}")

    def str_(self) -> str:
        if self.pos >= len(self.line) or self.line[self.pos] != "s":
            self.fail("expected a string token")
        colon = self.line.find(":", self.pos)
        if colon < 0:
            self.fail("malformed string token")
        try:
            n = int(self.line[self.pos + 1:colon])
        except ValueError:
            self.fail("malformed string length")
        start = colon + 1
        end = start + n
        if end > len(self.line):
            self.fail("string token runs off the line")
        self.pos = end + 1
        return _unescape(self.line[start:end])

    def value(self, handles: list):
        if self.pos >= len(self.line):
            self.fail("record is short a value")
        c = self.line[self.pos]
        if c == "s":
            return self.str_()
        tok = self.raw()
        if tok == "n":
            return None
        if tok == "u":
            return UNSET
        if tok == "b1":
            return True
        if tok == "b0":
            return False
        if tok.startswith("i"):
            try:
                return int(tok[1:])
            except ValueError:
                self.fail(f"bad int token {tok!r}")
        if tok.startswith("@"):
            try:
                serial = int(tok[1:])
                return handles[serial]
            except (ValueError, IndexError):
                self.fail(f"bad handle reference {tok!r}")
        self.fail(f"unknown value token {tok!r}")


def dump_session(store: EventStore, fp) -> None:
    """Write a session to a binary file object."""
    fp.write(_Writer(store).build().encode("utf-8"))


def save_session(store: EventStore, path: str) -> None:
    with open(path, "wb") as fp:
        dump_session(store, fp)


def read_session(fp) -> EventStore:
    """Read a session from a binary file object."""
    text = fp.read().decode("utf-8")
    lines = text.split("\n")
    if not lines or not lines[0].startswith(MAGIC + " "):
        raise BadMagicError("not a session file (bad magic line)")
    try:
        version = int(lines[0][len(MAGIC) + 1:])
    except ValueError:
        raise BadMagicError("not a session file (bad magic line)")
    if version != VERSION:
        raise UnsupportedVersionError(
            f"session version {version} is not supported")

    st = EventStore()
    handles: list = []
    parent_of: dict[int, int] = {}
    saw_end = False

    for lineno, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        if line == "END":
            saw_end = True
            break
        f = _Fields(line, lineno)
        rec = f.raw()
        if rec == "M":
            st.base = f.int_()
            st.horizon = f.int_()
            st.quantum = f.int_()
            st.gc_runs = f.int_()
            st.entry = f.str_()
            st.path = f.value(handles)
        elif rec == "X":
            st.excluded = [f.str_() for _ in range(f.int_())]
        elif rec == "S":
            st.source = f.str_()
        elif rec == "F":
            name = f.str_()
            st.fn_params[name] = [f.str_() for _ in range(f.int_())]
            st.fn_locals[name] = [f.str_() for _ in range(f.int_())]
        elif rec == "T":
            idx = f.int_()
            st.threads.append(ThreadInfo(idx, f.str_(), f.str_(),
                                         f.value(handles)))
        elif rec == "H":
            serial = f.int_()
            if serial != len(handles):
                f.fail("handle serials out of order")
            kind = f.raw()
            if kind == "o":
                cls = f.str_()
                handles.append(ObjectHandle(cls, f.int_()))
            elif kind == "a":
                idx = f.int_()
                handles.append(ArrayHandle(idx, f.int_()))
            elif kind == "l":
                handles.append(ListHandle(f.int_()))
            elif kind == "m":
                handles.append(MapHandle(f.int_()))
            else:
                f.fail(f"unknown handle kind {kind!r}")
        elif rec == "C":
            cls = f.str_()
            st.alloc_counters[cls] = f.int_()
        elif rec == "L":
            tid = f.int_()
            tl = TraceLine(f.int_(), f.str_(), f.value(handles), None, 0, 0)
            tl.id = tid
            argtok = f.raw()
            if argtok != "x":
                try:
                    count = int(argtok)
                except ValueError:
                    f.fail(f"bad argument count {argtok!r}")
                tl.args = [f.value(handles) for _ in range(count)]
            tl.line = f.int_()
            tl.depth = f.int_()
            tl.call_t = f.opt_int()
            tl.ret_t = f.opt_int()
            tl.ret_value = f.value(handles)
            flags = f.int_()
            tl.unwound = bool(flags & 1)
            tl.synthetic = bool(flags & 2)
            tl.pre_horizon = bool(flags & 4)
            parent = f.opt_int()
            if parent is not None:
                parent_of[tid] = parent
            st.tracelines[tid] = tl
        elif rec == "E":
            word = f.int_()
            st.words.append(word)
            st.depths.append(f.int_())
            shape = _SHAPES.get(word & KIND_MASK)
            if shape is None:
                f.fail(f"unknown event kind in word {word}")
            parts = []
            for spec in shape:
                if spec == "T":
                    tid = f.int_()
                    tl = st.tracelines.get(tid)
                    if tl is None:
                        f.fail(f"event references unknown trace line {tid}")
                    parts.append(tl)
                elif spec == "I":
                    parts.append(f.int_())
                elif spec == "S":
                    parts.append(f.str_())
                else:
                    parts.append(f.value(handles))
            st.payloads.append(tuple(parts))
        elif rec == "O":
            t = f.int_()
            st.outputs.append([t, f.str_()])
        elif rec == "V":
            tag = f.raw()
            if tag == "L":
                key = ("L", f.int_(), f.str_())
            elif tag == "F":
                key = ("F", f.value(handles), f.str_())
            elif tag == "E":
                key = ("E", f.value(handles), f.value(handles))
            elif tag == "T":
                key = ("T", f.int_(), f.str_())
            else:
                f.fail(f"unknown history key tag {tag!r}")
            hist = HistoryList()
            count = f.int_()
            ts = array("q")
            for _ in range(count):
                ts.append(f.int_())
                hist.values.append(f.value(handles))
            hist.ts = ts
            st.hists[key] = hist
        elif rec == "K":
            idx = f.int_()
            stack = []
            for _ in range(f.int_()):
                tid = f.int_()
                tl = st.tracelines.get(tid)
                if tl is None:
                    f.fail(f"stack references unknown trace line {tid}")
                stack.append(tl)
            st.horizon_stacks[idx] = stack
        else:
            f.fail(f"unknown record type {rec!r}")

    if not saw_end:
        raise TruncatedSessionError("session file has no END sentinel")

    for tid, pid in parent_of.items():
        parent = st.tracelines.get(pid)
        if parent is None:
            raise SessionFormatError(
                f"trace line {tid} names missing parent {pid}")
        st.tracelines[tid].parent = parent

    for tid in sorted(st.tracelines,
                      key=lambda i: (st.tracelines[i].call_t, i)):
        tl = st.tracelines[tid]
        st.trace_seq.setdefault(tl.thread_idx, []).append(tl)
    return st


def load_session(path: str) -> EventStore:
    with open(path, "rb") as fp:
        return read_session(fp)
