from .bytecode import Builtin, Function, Instr, Op, Program, disassemble
from .compiler import compile_source
from .instrument import instrument
from .machine import DEFAULT_QUANTUM, VM, run_program
from .values import (
    UNSET, ArrayHandle, HandleAllocator, ListHandle, MapHandle, ObjectHandle,
    display_name, is_handle, render, values_equal, wrap_int,
)

__all__ = [
    "Builtin", "Function", "Instr", "Op", "Program", "disassemble",
    "compile_source", "instrument", "DEFAULT_QUANTUM", "VM", "run_program",
    "UNSET", "ArrayHandle", "HandleAllocator", "ListHandle", "MapHandle",
    "ObjectHandle", "display_name", "is_handle", "render", "values_equal",
    "wrap_int",
]
