"""Bytecode model: opcodes, instructions, compiled functions, disassembly.

Opcode numbers are stable; the disassembler output is covered by golden
tests, so renumbering or renaming is a breaking change.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum


class Op(IntEnum):
    # stack and data movement
    PUSH = 0        # a: const index
    POP = 1
    DUP = 2
    LOADL = 3       # a: local slot
    STOREL = 4      # a: local slot
    LOADTHIS = 5
    NEW = 6         # a: const index of class name
    GETF = 7        # a: const index of field name   [recv] -> [value]
    SETF = 8        # a: const index of field name   [recv value] -> []
    GETI = 9        #                                [recv key] -> [value]
    SETI = 10       #                                [recv key value] -> []

    # arithmetic and comparison (64-bit wrapped ints; + also joins strings)
    ADD = 11
    SUB = 12
    MUL = 13
    DIV = 14
    MOD = 15
    EQ = 16
    NE = 17
    LT = 18
    LE = 19
    GT = 20
    GE = 21
    NEG = 22
    NOT = 23

    # control flow
    JUMP = 24       # a: target pc
    JF = 25         # a: target pc, pops condition
    CALL = 26       # a: function index, b: argc
    CALLM = 27      # a: const index of method name, b: argc   [recv args...]
    BUILTIN = 28    # a: builtin id, b: argc
    SPAWN = 29      # a: function index, b: argc
    SPAWNM = 30     # a: const index of method name, b: argc
    RET = 31        # pops return value
    THROW = 32
    TRYPUSH = 33    # a: handler pc
    TRYPOP = 34
    LOCK = 35       # pops handle, may block the thread
    UNLOCK = 36

    # recording probes, inserted by the instrumenter. Invisible to the
    # scheduler quantum so instrumented and plain runs interleave alike.
    RSTORE = 37     # a: local slot            peeks [value]
    RSTOREF = 38    # a: const index of name   peeks [recv value]
    RSTOREI = 39    #                          peeks [recv key value]
    RCALL = 40      # a: function index, b: argc
    RCALLM = 41     # a: const index of name, b: argc
    RRET = 42       # peeks [return value]
    RPRINT = 43     # b: argc
    RCOLL = 44      # a: builtin id, b: argc
    RTHROW = 45     # peeks [value]
    RCATCH = 46     # peeks [value]


RECORD_OPS = frozenset(op for op in Op if op >= Op.RSTORE)

# jump targets live in operand `a` of these
JUMP_OPS = frozenset({Op.JUMP, Op.JF, Op.TRYPUSH})


class Builtin(IntEnum):
    PRINT = 0
    ARRAY = 1
    LIST = 2
    MAP = 3
    LEN = 4
    PUSH = 5
    STR = 6


# builtins that mutate a collection; these get an RCOLL probe
MUTATING_BUILTINS = frozenset({Builtin.PUSH})


@dataclass
class Instr:
    __slots__ = ("op", "a", "b", "line")
    op: int
    a: int
    b: int
    line: int


@dataclass
class Function:
    name: str
    params: list[str]
    local_names: list[str]          # params first, then discovered locals
    code: list[Instr] = field(default_factory=list)
    consts: list[object] = field(default_factory=list)
    def_line: int = 0


@dataclass
class Program:
    functions: list[Function]
    fn_index: dict[str, int]
    source: str
    path: str | None = None

    def function(self, name: str) -> Function:
        return self.functions[self.fn_index[name]]


_NAME_OPERAND = {Op.NEW, Op.GETF, Op.SETF, Op.CALLM, Op.SPAWNM,
                 Op.RSTOREF, Op.RCALLM}


def _operand_text(fn: Function, program: Program, ins: Instr) -> str:
    op = Op(ins.op)
    if op == Op.PUSH:
        return f"{ins.a} ({fn.consts[ins.a]!r})"
    if op in (Op.LOADL, Op.STOREL, Op.RSTORE):
        return f"{ins.a} ({fn.local_names[ins.a]})"
    if op in _NAME_OPERAND:
        base = f"{ins.a} ({fn.consts[ins.a]})"
        if op in (Op.CALLM, Op.SPAWNM, Op.RCALLM):
            return f"{base} argc={ins.b}"
        return base
    if op in (Op.CALL, Op.SPAWN, Op.RCALL):
        return f"{ins.a} ({program.functions[ins.a].name}) argc={ins.b}"
    if op in (Op.BUILTIN, Op.RCOLL):
        return f"{Builtin(ins.a).name.lower()} argc={ins.b}"
    if op in JUMP_OPS:
        return f"-> {ins.a}"
    if op == Op.RPRINT:
        return f"argc={ins.b}"
    return ""


def disassemble(program: Program, names: list[str] | None = None) -> str:
    """Stable text listing of the compiled (or instrumented) program."""
    lines: list[str] = []
    for fn in program.functions:
        if names is not None and fn.name not in names:
            continue
        header = f"fn {fn.name}({', '.join(fn.params)})"
        lines.append(f"{header}  // line {fn.def_line}, "
                     f"locals: {' '.join(fn.local_names) or '-'}")
        for pc, ins in enumerate(fn.code):
            opname = Op(ins.op).name
            operand = _operand_text(fn, program, ins)
            body = f"  {pc:4d}  {opname:<8s} {operand}".rstrip()
            lines.append(f"{body}  ; line {ins.line}")
        lines.append("")
    return "\n".join(lines)
