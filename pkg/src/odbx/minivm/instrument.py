"""Probe insertion.

Rewrites compiled functions so every store, call, print, throw and catch
is announced to the recorder just before (or, for returns, just after)
it happens. Jump targets are remapped to the start of each original
instruction's replacement run, so a jump that skipped a call also skips
its return probe.

Functions named in `exclude` keep their original bodies. Thread spawns
are reported by the scheduler itself and need no probe here.
"""

from __future__ import annotations

from collections.abc import Iterable

from ..errors import InstrumentError
from .bytecode import (
    JUMP_OPS, MUTATING_BUILTINS, Builtin, Function, Instr, Op, Program,
)


def _instrument_code(code: list[Instr]) -> list[Instr]:
    handler_pcs = {ins.a for ins in code if ins.op == Op.TRYPUSH}
    new_code: list[Instr] = []
    old_to_new: list[int] = []
    jump_sites: list[int] = []      # indexes in new_code needing remap

    for pc, ins in enumerate(code):
        old_to_new.append(len(new_code))
        if pc in handler_pcs:
            new_code.append(Instr(int(Op.RCATCH), 0, 0, ins.line))
        op = ins.op
        if op == Op.STOREL:
            new_code.append(Instr(int(Op.RSTORE), ins.a, 0, ins.line))
        elif op == Op.SETF:
            new_code.append(Instr(int(Op.RSTOREF), ins.a, 0, ins.line))
        elif op == Op.SETI:
            new_code.append(Instr(int(Op.RSTOREI), 0, 0, ins.line))
        elif op == Op.CALL:
            new_code.append(Instr(int(Op.RCALL), ins.a, ins.b, ins.line))
        elif op == Op.CALLM:
            new_code.append(Instr(int(Op.RCALLM), ins.a, ins.b, ins.line))
        elif op == Op.THROW:
            new_code.append(Instr(int(Op.RTHROW), 0, 0, ins.line))
        elif op == Op.BUILTIN:
            if ins.a == Builtin.PRINT:
                new_code.append(Instr(int(Op.RPRINT), 0, ins.b, ins.line))
            elif ins.a in MUTATING_BUILTINS:
                new_code.append(Instr(int(Op.RCOLL), ins.a, ins.b, ins.line))
        if ins.op in JUMP_OPS:
            jump_sites.append(len(new_code))
        new_code.append(Instr(ins.op, ins.a, ins.b, ins.line))
        if op in (Op.CALL, Op.CALLM):
            new_code.append(Instr(int(Op.RRET), 0, 0, ins.line))
    old_to_new.append(len(new_code))

    for site in jump_sites:
        target = new_code[site].a
        if not 0 <= target <= len(code):
            raise InstrumentError(f"jump target {target} out of range")
        new_code[site].a = old_to_new[target]
    return new_code


def instrument(program: Program,
               exclude: Iterable[str] = ()) -> Program:
    """Return a copy of `program` with recording probes inserted.

    `exclude` names functions to leave untouched; unknown names are an
    error to catch option typos early.
    """
    excluded = set(exclude)
    unknown = excluded - set(program.fn_index)
    if unknown:
        raise InstrumentError(
            f"cannot exclude unknown function(s): {', '.join(sorted(unknown))}")
    functions = []
    for fn in program.functions:
        if fn.name in excluded:
            functions.append(fn)
            continue
        functions.append(Function(
            name=fn.name,
            params=fn.params,
            local_names=fn.local_names,
            code=_instrument_code(fn.code),
            consts=fn.consts,
            def_line=fn.def_line,
        ))
    return Program(functions, dict(program.fn_index), program.source,
                   program.path)
