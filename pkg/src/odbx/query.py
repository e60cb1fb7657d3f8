"""Event pattern language: compile, match, search.

A pattern is a conjunction of comparisons joined by ``&``::

    port = call & callMethodName = "sort" & arg0 = 0 & arg1 >= 1

Each comparison names a key, an operator, and a literal. Keys that a
given event kind does not define make that conjunct false, so a pattern
only ever selects events where every key is meaningful.

Keys
----
port            event kind; ``=`` only. One of: call (alias enter),
                return, local, field, element, output, throw, catch,
                switch, spawn, block, unblock, marker.
methodName      method whose source line the event cites (for a call
                event that is the caller).
callMethodName  callee of a call or spawn event.
parmNames       exact parameter-name list of the callee, e.g. ["a","b"].
argN            Nth call argument (arg0, arg1, ...).
returnValue     value carried by a return event.
thread          thread index (int) or thread name (string).
line            source line number.
varName         name assigned by a local or field store.
newValue        value written by a store event.
className       class of the store target or of the call receiver.
outputText      exact text of an output event; ``=`` only.

Operators: ``=`` ``!=`` ``<`` ``<=`` ``>`` ``>=``. Ordering operators
require an integer literal and match only integer values. ``!=`` is
"defined and different", never a match on an undefined key.

Matching runs in two stages. Comparisons on kind, thread index, and
line compile into a mask/want pair over the packed event word, so a
search scans the word array in the compiled kernel and touches payload
tuples only at candidate hits.
"""

from __future__ import annotations

from .errors import PatternError
from .minivm.values import UNSET, values_equal
from .recorder import (
    EventKind,
    EventStore,
    KIND_MASK,
    LINE_MASK,
    LINE_SHIFT,
    THREAD_SHIFT,
    word_line,
    word_thread,
)
from ._kernels import scan_words

__all__ = [
    "CompiledPattern",
    "compile_pattern",
    "search_events",
    "all_matches",
    "bind_triggers",
    "PORT_NAMES",
]

PORT_NAMES = {
    "call": EventKind.CALL,
    "enter": EventKind.CALL,
    "return": EventKind.RETURN,
    "local": EventKind.LOCAL_ASSIGN,
    "field": EventKind.FIELD_ASSIGN,
    "element": EventKind.ARRAY_STORE,
    "output": EventKind.OUTPUT,
    "throw": EventKind.THROW,
    "catch": EventKind.CATCH,
    "switch": EventKind.CONTEXT_SWITCH,
    "spawn": EventKind.THREAD_START,
    "block": EventKind.THREAD_BLOCK,
    "unblock": EventKind.THREAD_UNBLOCK,
    "marker": EventKind.MARKER,
}

_ORDER_OPS = {"<", "<=", ">", ">="}
_STRING_KEYS = ("methodName", "callMethodName", "varName", "className")

# kinds that place a traceline first in the payload
_TL_FIRST = frozenset([
    EventKind.CALL, EventKind.RETURN, EventKind.LOCAL_ASSIGN,
    EventKind.FIELD_ASSIGN, EventKind.ARRAY_STORE, EventKind.OUTPUT,
    EventKind.THROW, EventKind.CATCH, EventKind.THREAD_BLOCK,
    EventKind.THREAD_UNBLOCK,
])


# -- tokenizer

_PUNCT = ("!=", "<=", ">=", "=", "<", ">", "&", "[", "]", ",")


def _tokenize(text: str) -> list[tuple[str, object, int]]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c == '"':
            start = i
            i += 1
            buf = []
            while i < n and text[i] != '"':
                ch = text[i]
                if ch == "\\":
                    i += 1
                    if i >= n:
                        break
                    esc = text[i]
                    buf.append({"n": "\n", "t": "\t", "r": "\r",
                                '"': '"', "\\": "\\"}.get(esc))
                    if buf[-1] is None:
                        raise PatternError(
                            f"unknown escape \\{esc} in string", i - 1)
                else:
                    buf.append(ch)
                i += 1
            if i >= n:
                raise PatternError("unterminated string", start)
            i += 1
            toks.append(("str", "".join(buf), start))
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and text[i + 1].isdigit()):
            start = i
            i += 1
            while i < n and text[i].isdigit():
                i += 1
            toks.append(("int", int(text[start:i]), start))
            continue
        if c.isalpha() or c == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            toks.append(("ident", text[start:i], start))
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(("punct", p, i))
                i += len(p)
                break
        else:
            raise PatternError(f"unexpected character {c!r}", i)
    return toks


class _Cursor:
    def __init__(self, toks, textlen):
        self.toks = toks
        self.pos = 0
        self.end = textlen

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise PatternError("unexpected end of pattern", self.end)
        self.pos += 1
        return tok

    def take_punct(self, value):
        tok = self.peek()
        if tok is None or tok[0] != "punct" or tok[1] != value:
            at = tok[2] if tok else self.end
            raise PatternError(f"expected {value!r}", at)
        self.pos += 1


# -- value comparison helpers

def _compare(op: str, value, lit) -> bool:
    if value is UNSET:
        return False
    if op == "=":
        return values_equal(value, lit)
    if op == "!=":
        return not values_equal(value, lit)
    # ordering is over plain ints only; bools and the rest never match
    if not isinstance(value, int) or isinstance(value, bool):
        return False
    if op == "<":
        return value < lit
    if op == "<=":
        return value <= lit
    if op == ">":
        return value > lit
    return value >= lit


def _site_tl(kind: int, payload):
    """Traceline of the frame whose source line the event cites, or
    None. A call event cites the call site, so its frame is the
    caller's."""
    if kind == EventKind.CALL:
        return payload[0].parent
    if kind in _TL_FIRST:
        return payload[0]
    return None


def _callee_tl(kind: int, payload):
    if kind == EventKind.CALL:
        return payload[0]
    if kind == EventKind.THREAD_START:
        return payload[1]
    return None


def _store_value(kind: int, payload):
    if kind == EventKind.LOCAL_ASSIGN:
        return payload[2]
    if kind in (EventKind.FIELD_ASSIGN, EventKind.ARRAY_STORE):
        return payload[3]
    return UNSET


def _store_class(kind: int, payload):
    if kind in (EventKind.FIELD_ASSIGN, EventKind.ARRAY_STORE):
        return payload[1].class_name
    if kind in (EventKind.CALL, EventKind.THREAD_START):
        tl = _callee_tl(kind, payload)
        recv = tl.receiver
        return getattr(recv, "class_name", None) if recv is not None else None
    return None


class CompiledPattern:
    """A parsed pattern: a word-level filter plus payload probes."""

    __slots__ = ("text", "mask", "want", "probes", "impossible")

    def __init__(self, text: str):
        self.text = text
        self.mask = 0
        self.want = 0
        self.probes = []
        self.impossible = False

    def _pin(self, shift: int, fieldmask: int, value: int) -> None:
        m = fieldmask << shift
        w = (value & fieldmask) << shift
        if (self.mask & m) and (self.want & m) != w:
            self.impossible = True
        self.mask |= m
        self.want |= w

    def match_parts(self, store, word: int, payload) -> bool:
        """Match against an event given as its packed word and payload.
        Usable both on stored events and on one being emitted."""
        if self.impossible:
            return False
        if (word & self.mask) != self.want:
            return False
        for probe in self.probes:
            if not probe(store, word, payload):
                return False
        return True

    def match_event(self, store: EventStore, t: int) -> bool:
        return self.match_parts(store, store.word_at(t), store.payload_at(t))


def _add_conjunct(pat: CompiledPattern, key: str, op: str, lit,
                  key_pos: int) -> None:
    if key == "port":
        if op != "=":
            raise PatternError("port supports = only", key_pos)
        pat._pin(0, KIND_MASK, int(lit))
        return

    if key == "thread":
        if isinstance(lit, str):
            if op not in ("=", "!="):
                raise PatternError(
                    "thread name supports = and != only", key_pos)
            eq = op == "="
            def probe(store, word, payload, name=lit, eq=eq):
                return (store.thread_name(word_thread(word)) == name) == eq
            pat.probes.append(probe)
            return
        if op == "=":
            if 0 <= lit <= 0xFF:
                pat._pin(THREAD_SHIFT, 0xFF, lit)
            else:
                pat.impossible = True
            return
        def probe(store, word, payload, op=op, lit=lit):
            return _compare(op, word_thread(word), lit)
        pat.probes.append(probe)
        return

    if key == "line":
        if op == "=":
            if 0 <= lit <= LINE_MASK:
                pat._pin(LINE_SHIFT, LINE_MASK, lit)
            else:
                pat.impossible = True
            return
        def probe(store, word, payload, op=op, lit=lit):
            return _compare(op, word_line(word), lit)
        pat.probes.append(probe)
        return

    if key == "methodName":
        eq = op == "="
        def probe(store, word, payload, name=lit, eq=eq):
            tl = _site_tl(word & KIND_MASK, payload)
            if tl is None:
                return False
            return (tl.method == name) == eq
        pat.probes.append(probe)
        return

    if key == "callMethodName":
        eq = op == "="
        def probe(store, word, payload, name=lit, eq=eq):
            tl = _callee_tl(word & KIND_MASK, payload)
            if tl is None:
                return False
            return (tl.method == name) == eq
        pat.probes.append(probe)
        return

    if key == "parmNames":
        def probe(store, word, payload, names=lit):
            tl = _callee_tl(word & KIND_MASK, payload)
            if tl is None:
                return False
            return store.fn_params.get(tl.method) == names
        pat.probes.append(probe)
        return

    if key == "returnValue":
        def probe(store, word, payload, op=op, lit=lit):
            if (word & KIND_MASK) != EventKind.RETURN:
                return False
            return _compare(op, payload[0].ret_value, lit)
        pat.probes.append(probe)
        return

    if key == "varName":
        eq = op == "="
        def probe(store, word, payload, name=lit, eq=eq):
            kind = word & KIND_MASK
            if kind == EventKind.LOCAL_ASSIGN:
                var = payload[1]
            elif kind == EventKind.FIELD_ASSIGN:
                var = payload[2]
            else:
                return False
            return (var == name) == eq
        pat.probes.append(probe)
        return

    if key == "newValue":
        def probe(store, word, payload, op=op, lit=lit):
            return _compare(op, _store_value(word & KIND_MASK, payload), lit)
        pat.probes.append(probe)
        return

    if key == "className":
        eq = op == "="
        def probe(store, word, payload, name=lit, eq=eq):
            cls = _store_class(word & KIND_MASK, payload)
            if cls is None:
                return False
            return (cls == name) == eq
        pat.probes.append(probe)
        return

    if key == "outputText":
        if op != "=":
            raise PatternError("outputText supports = only", key_pos)
        def probe(store, word, payload, text=lit):
            if (word & KIND_MASK) != EventKind.OUTPUT:
                return False
            return store.outputs[payload[1]][1] == text
        pat.probes.append(probe)
        return

    # argN
    n = int(key[3:])
    def probe(store, word, payload, op=op, lit=lit, n=n):
        tl = _callee_tl(word & KIND_MASK, payload)
        if tl is None or tl.args is None or n >= len(tl.args):
            return False
        return _compare(op, tl.args[n], lit)
    pat.probes.append(probe)


def _parse_literal(cur: _Cursor, key: str, op: str, key_pos: int):
    tok = cur.next()
    kind, value, pos = tok

    if key == "port":
        if kind != "ident" or value not in PORT_NAMES:
            raise PatternError(
                "port needs an event kind name such as call or return", pos)
        return PORT_NAMES[value]

    if kind == "punct" and value == "[":
        if key != "parmNames":
            raise PatternError(f"{key} does not take a list", pos)
        names = []
        nxt = cur.peek()
        if nxt and nxt[0] == "punct" and nxt[1] == "]":
            cur.next()
            return names
        while True:
            item = cur.next()
            if item[0] != "str":
                raise PatternError("parmNames lists hold strings", item[2])
            names.append(item[1])
            sep = cur.next()
            if sep[0] == "punct" and sep[1] == "]":
                return names
            if not (sep[0] == "punct" and sep[1] == ","):
                raise PatternError("expected , or ] in list", sep[2])

    if key == "parmNames":
        raise PatternError('parmNames takes a list like ["a", "b"]', pos)

    if kind == "ident":
        if value == "true":
            lit = True
        elif value == "false":
            lit = False
        elif value == "null":
            lit = None
        else:
            raise PatternError(
                f"bare word {value!r}; string literals need quotes", pos)
    elif kind == "int":
        lit = value
    elif kind == "str":
        lit = value
    else:
        raise PatternError("expected a literal value", pos)

    if key in _STRING_KEYS or key == "outputText":
        if not isinstance(lit, str):
            raise PatternError(f"{key} compares against a string", pos)
    if key in ("thread",):
        if not isinstance(lit, (int, str)) or isinstance(lit, bool):
            raise PatternError("thread takes an index or a name", pos)
    if key == "line" and (not isinstance(lit, int) or isinstance(lit, bool)):
        raise PatternError("line compares against an integer", pos)
    if op in _ORDER_OPS and (not isinstance(lit, int)
                             or isinstance(lit, bool)):
        raise PatternError(f"{op} needs an integer literal", pos)
    return lit


def _valid_key(name: str) -> bool:
    if name in ("port", "methodName", "callMethodName", "parmNames",
                "returnValue", "thread", "line", "varName", "newValue",
                "className", "outputText"):
        return True
    return name.startswith("arg") and name[3:].isdigit()


_EQ_ONLY_KEYS = {"parmNames"}


def compile_pattern(text: str) -> CompiledPattern:
    toks = _tokenize(text)
    if not toks:
        raise PatternError("empty pattern", 0)
    cur = _Cursor(toks, len(text))
    pat = CompiledPattern(text)
    while True:
        tok = cur.next()
        if tok[0] != "ident" or not _valid_key(tok[1]):
            raise PatternError(f"unknown key {tok[1]!r}", tok[2])
        key, key_pos = tok[1], tok[2]
        op_tok = cur.next()
        if op_tok[0] != "punct" or op_tok[1] not in (
                "=", "!=", "<", "<=", ">", ">="):
            raise PatternError("expected a comparison operator", op_tok[2])
        op = op_tok[1]
        if key in _EQ_ONLY_KEYS and op != "=":
            raise PatternError(f"{key} supports = only", op_tok[2])
        lit = _parse_literal(cur, key, op, key_pos)
        _add_conjunct(pat, key, op, lit, key_pos)
        nxt = cur.peek()
        if nxt is None:
            return pat
        if nxt[0] == "punct" and nxt[1] == "&":
            cur.next()
            continue
        raise PatternError("expected & between comparisons", nxt[2])


# -- searching a recorded store

def _iter_matches(store: EventStore, pat: CompiledPattern, start: int,
                  backward: bool):
    if pat.impossible:
        return
    base = store.base
    words = store.words
    if backward:
        i = start - base
        while i >= 0:
            i = scan_words(words, pat.mask, pat.want, i, 0, False)
            if i < 0:
                return
            t = base + i
            if pat.match_parts(store, words[i], store.payloads[i]):
                yield t
            i -= 1
    else:
        i = start - base
        n = len(words)
        while i < n:
            i = scan_words(words, pat.mask, pat.want, i, n, True)
            if i < 0:
                return
            if pat.match_parts(store, words[i], store.payloads[i]):
                yield base + i
            i += 1


def search_events(store: EventStore, pattern, from_t: int | None = None,
                  backward: bool = False) -> int:
    """Timestamp of the nearest match strictly beyond from_t in the
    chosen direction, or -1. With no from_t the search covers the whole
    retained log from its nearer end."""
    pat = pattern if isinstance(pattern, CompiledPattern) \
        else compile_pattern(pattern)
    last = store.next_t - 1
    if backward:
        start = last if from_t is None else min(from_t - 1, last)
        if start < store.base:
            return -1
    else:
        start = store.base if from_t is None else max(from_t + 1, store.base)
        if start > last:
            return -1
    for t in _iter_matches(store, pat, start, backward):
        return t
    return -1


def all_matches(store: EventStore, pattern) -> list[int]:
    """Every matching timestamp in the retained log, ascending."""
    pat = pattern if isinstance(pattern, CompiledPattern) \
        else compile_pattern(pattern)
    if store.next_t <= store.base:
        return []
    return list(_iter_matches(store, pat, store.base, False))


def bind_triggers(recorder, start_pattern: str | None = None,
                  stop_pattern: str | None = None) -> None:
    """Compile start/stop patterns into predicates and install them on
    a recorder. With a start pattern the recorder begins switched off
    and wakes on the first match; a stop pattern switches it back off
    after the matching event."""
    start = stop = None
    if start_pattern is not None:
        start = compile_pattern(start_pattern).match_parts
    if stop_pattern is not None:
        stop = compile_pattern(stop_pattern).match_parts
    recorder.set_triggers(start, stop)
