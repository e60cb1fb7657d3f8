"""Runtime values of the mini language.

Integers, booleans, strings and null map onto the native Python types;
objects, arrays, lists and maps are handles with identity equality. Every
handle carries a per-class creation index so a value prints the same way
on every run, recorded or not: ``<Demo_0>``, ``<array[20]_1>``, ``<list_2>``.
"""

from __future__ import annotations

INT_MIN = -(1 << 63)
INT_MASK = (1 << 64) - 1


class _Unset:
    """Placeholder for a variable that has no value yet; shown as ``--``."""

    __slots__ = ()

    def __repr__(self):
        return "--"


UNSET = _Unset()


def wrap_int(n: int) -> int:
    """Clamp Python's unbounded int to 64-bit two's-complement."""
    n &= INT_MASK
    return n - (1 << 64) if n >= (1 << 63) else n


def div_trunc(a: int, b: int) -> int:
    # C-style truncation toward zero, unlike Python's floor division
    q = abs(a) // abs(b)
    return wrap_int(-q if (a < 0) != (b < 0) else q)


def mod_trunc(a: int, b: int) -> int:
    return wrap_int(a - div_trunc(a, b) * b)


class ObjectHandle:
    __slots__ = ("class_name", "index", "slots")

    def __init__(self, class_name: str, index: int):
        self.class_name = class_name
        self.index = index
        self.slots: dict = {}

    def __repr__(self):
        return f"<{self.class_name}_{self.index}>"


class ArrayHandle:
    __slots__ = ("index", "cells")

    def __init__(self, index: int, length: int):
        self.index = index
        self.cells: list = [None] * length

    @property
    def class_name(self) -> str:
        return f"array[{len(self.cells)}]"

    def __repr__(self):
        return f"<{self.class_name}_{self.index}>"


class ListHandle:
    __slots__ = ("index", "cells")

    class_name = "list"

    def __init__(self, index: int):
        self.index = index
        self.cells: list = []

    def __repr__(self):
        return f"<list_{self.index}>"


class MapHandle:
    __slots__ = ("index", "entries")

    class_name = "map"

    def __init__(self, index: int):
        self.index = index
        self.entries: dict = {}

    def __repr__(self):
        return f"<map_{self.index}>"


HANDLE_TYPES = (ObjectHandle, ArrayHandle, ListHandle, MapHandle)


def is_handle(v) -> bool:
    return isinstance(v, HANDLE_TYPES)


def display_name(h) -> str:
    """The stable identity form: class name plus creation index."""
    return f"<{h.class_name}_{h.index}>"


def values_equal(a, b) -> bool:
    """Mini `==`: value equality on primitives, identity on handles.

    bool and int are distinct types here even though Python conflates them.
    """
    if is_handle(a) or is_handle(b):
        return a is b
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if a is None or b is None:
        return a is None and b is None
    if type(a) is not type(b):
        return False
    return a == b


def render(v, depth: int = 0) -> str:
    """Program-output rendering, used by print(): strings are raw.

    Containers show their elements one level deep; anything nested
    renders in identity form.
    """
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return v
    if depth > 0:
        return display_name(v)
    if isinstance(v, ArrayHandle):
        return "[" + ", ".join(render(c, 1) for c in v.cells) + "]"
    if isinstance(v, ListHandle):
        return "[" + ", ".join(render(c, 1) for c in v.cells) + "]"
    if isinstance(v, MapHandle):
        parts = [f"{render_key(k)}: {render(x, 1)}" for k, x in v.entries.items()]
        return "{" + ", ".join(parts) + "}"
    return display_name(v)


def render_key(k) -> str:
    return f'"{k}"' if isinstance(k, str) else str(k)


def type_name(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, str):
        return "string"
    return v.class_name


class HandleAllocator:
    """Per-class creation counters; identical allocation order on every run."""

    def __init__(self):
        self.counters: dict[str, int] = {}

    def _next(self, class_name: str) -> int:
        n = self.counters.get(class_name, 0)
        self.counters[class_name] = n + 1
        return n

    def new_object(self, class_name: str) -> ObjectHandle:
        return ObjectHandle(class_name, self._next(class_name))

    def new_array(self, length: int) -> ArrayHandle:
        return ArrayHandle(self._next(f"array[{length}]"), length)

    def new_list(self) -> ListHandle:
        return ListHandle(self._next("list"))

    def new_map(self) -> MapHandle:
        return MapHandle(self._next("map"))
