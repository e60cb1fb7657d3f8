"""The bytecode interpreter: frames, cooperative threads, locks, recording
hooks.

Threads run round robin with a fixed instruction quantum. Recording
probe opcodes never count against the quantum, so a program interleaves
identically with and without probes. All scheduling is deterministic;
a given program and quantum always produce the same event sequence.

Runtime failures (division by zero, bad index, null receiver, ...) are
thrown as ordinary string values and can be caught by `try`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..errors import ReplayError, VmInternalError
from .bytecode import Builtin, Function, Op, Program
from .values import (
    UNSET, ArrayHandle, HandleAllocator, ListHandle, MapHandle, ObjectHandle,
    display_name, div_trunc, is_handle, mod_trunc, render, type_name,
    values_equal, wrap_int,
)

DEFAULT_QUANTUM = 10


class MiniThrow(Exception):
    """Internal carrier for a mini-language thrown value."""

    def __init__(self, value):
        self.value = value


class Frame:
    __slots__ = ("fn", "pc", "stack", "locals", "this", "traceline",
                 "try_stack", "lock_stack")

    def __init__(self, fn: Function, args: list, this, traceline):
        self.fn = fn
        self.pc = 0
        self.stack: list = []
        self.locals: list = args + [UNSET] * (len(fn.local_names) - len(args))
        self.this = this
        self.traceline = traceline
        self.try_stack: list[tuple[int, int, int]] = []
        self.lock_stack: list = []


RUNNABLE = "runnable"
BLOCKED = "blocked"
DONE = "done"


class MiniThread:
    __slots__ = ("idx", "name", "frames", "state", "blocked_on",
                 "pending_tl", "last_ret_tl", "root_tl")

    def __init__(self, idx: int, name: str):
        self.idx = idx
        self.name = name
        self.frames: list[Frame] = []
        self.state = RUNNABLE
        self.blocked_on = None
        self.pending_tl = None      # traceline made by RCALL, claimed by CALL
        self.last_ret_tl = None     # traceline of the frame that just returned
        self.root_tl = None


@dataclass
class LockState:
    holder: int
    count: int = 1
    waiters: deque = field(default_factory=deque)


class VM:
    """One program execution. Construct, `start()`, then `run()`."""

    def __init__(self, program: Program, recorder=None,
                 quantum: int = DEFAULT_QUANTUM, max_steps: int = 50_000_000):
        self.program = program
        self.rec = recorder
        self.quantum = quantum
        self.max_steps = max_steps
        self.alloc = HandleAllocator()
        self.threads: list[MiniThread] = []
        self.locks: dict = {}           # handle -> LockState
        self.stdout_chunks: list[str] = []
        self.uncaught: list[tuple[int, object]] = []
        self.steps = 0
        self.current = 0
        self.allow_spawn = True

    # ------------------------------------------------------------ setup

    def start(self, entry: str = "main") -> None:
        if entry not in self.program.fn_index:
            raise VmInternalError(f"no entry function {entry!r}")
        fn = self.program.function(entry)
        if fn.params:
            raise VmInternalError(f"entry function {entry!r} must take no arguments")
        thread = MiniThread(0, "main")
        self.threads.append(thread)
        if self.rec is not None:
            self.rec.register_thread(0, "main", entry, None)
            thread.root_tl = self.rec.on_run_start(entry, fn.def_line)
        thread.frames.append(Frame(fn, [], None, thread.root_tl))

    def start_call(self, fn_name: str, this, args: list,
                   thread_name: str = "replay") -> None:
        """Begin execution at an arbitrary call instead of the entry
        function. The caller supplies receiver and argument values."""
        if fn_name not in self.program.fn_index:
            raise VmInternalError(f"no function {fn_name!r}")
        fn = self.program.function(fn_name)
        if len(fn.params) != len(args):
            raise VmInternalError(
                f"{fn_name} takes {len(fn.params)} arguments, "
                f"got {len(args)}")
        thread = MiniThread(0, thread_name)
        self.threads.append(thread)
        if self.rec is not None:
            self.rec.register_thread(0, thread_name, fn_name, this)
            thread.root_tl = self.rec.on_call(
                0, None, fn_name, this, list(args), fn.def_line, 0)
        thread.frames.append(Frame(fn, list(args), this, thread.root_tl))

    # ------------------------------------------------------------ scheduling

    def _runnable_after(self, idx: int) -> int | None:
        n = len(self.threads)
        for off in range(1, n + 1):
            t = self.threads[(idx + off) % n]
            if t.state == RUNNABLE:
                return t.idx
        return None

    def run(self) -> None:
        """Drive all threads to completion."""
        while True:
            t = self.threads[self.current]
            if t.state != RUNNABLE:
                nxt = self._runnable_after(self.current)
                if nxt is None:
                    if any(th.state == BLOCKED for th in self.threads):
                        raise VmInternalError("deadlock: all threads blocked")
                    return
                self._switch_to(nxt)
                continue
            self._run_slice(t, self.quantum)
            if t.state == RUNNABLE:
                nxt = self._runnable_after(self.current)
                if nxt is not None:
                    self._switch_to(nxt)

    def _switch_to(self, idx: int) -> None:
        prev = self.current
        self.current = idx
        if self.rec is not None and prev != idx:
            line = self._current_line(self.threads[idx])
            self.rec.on_context_switch(prev, idx, line)

    def _current_line(self, t: MiniThread) -> int:
        if not t.frames:
            return 0
        fr = t.frames[-1]
        if fr.pc < len(fr.fn.code):
            return fr.fn.code[fr.pc].line
        return fr.fn.def_line

    # ------------------------------------------------------------ the loop

    def _run_slice(self, t: MiniThread, budget: int) -> None:
        """Execute up to `budget` countable instructions of thread `t`."""
        rec = self.rec
        while budget > 0:
            if not t.frames:
                t.state = DONE
                return
            fr = t.frames[-1]
            code = fr.fn.code
            if fr.pc >= len(code):
                raise VmInternalError(
                    f"pc {fr.pc} past end of {fr.fn.name}")
            ins = code[fr.pc]
            fr.pc += 1
            op = ins.op
            if op < Op.RSTORE:
                budget -= 1
                self.steps += 1
                if self.steps > self.max_steps:
                    raise VmInternalError("instruction budget exhausted")
            try:
                if op == Op.PUSH:
                    fr.stack.append(fr.fn.consts[ins.a])
                elif op == Op.LOADL:
                    v = fr.locals[ins.a]
                    if v is UNSET:
                        raise MiniThrow(
                            f"unassigned variable: {fr.fn.local_names[ins.a]}")
                    fr.stack.append(v)
                elif op == Op.STOREL:
                    fr.locals[ins.a] = fr.stack.pop()
                elif op == Op.JUMP:
                    fr.pc = ins.a
                elif op == Op.JF:
                    c = fr.stack.pop()
                    if not isinstance(c, bool):
                        raise MiniThrow("condition must be true or false")
                    if not c:
                        fr.pc = ins.a
                elif Op.ADD <= op <= Op.NOT:
                    self._arith(fr, op)
                elif op == Op.POP:
                    fr.stack.pop()
                elif op == Op.DUP:
                    fr.stack.append(fr.stack[-1])
                elif op == Op.LOADTHIS:
                    if fr.this is None:
                        raise MiniThrow("no this in a plain function")
                    fr.stack.append(fr.this)
                elif op == Op.NEW:
                    fr.stack.append(self.alloc.new_object(fr.fn.consts[ins.a]))
                elif op == Op.GETF:
                    recv = fr.stack.pop()
                    if not isinstance(recv, ObjectHandle):
                        raise MiniThrow(
                            f"field read on {type_name(recv)}")
                    name = fr.fn.consts[ins.a]
                    if name not in recv.slots:
                        raise MiniThrow(f"no field {name} on {display_name(recv)}")
                    fr.stack.append(recv.slots[name])
                elif op == Op.SETF:
                    value = fr.stack.pop()
                    recv = fr.stack.pop()
                    if not isinstance(recv, ObjectHandle):
                        raise MiniThrow(f"field write on {type_name(recv)}")
                    recv.slots[fr.fn.consts[ins.a]] = value
                elif op == Op.GETI:
                    key = fr.stack.pop()
                    recv = fr.stack.pop()
                    fr.stack.append(self._index_get(recv, key))
                elif op == Op.SETI:
                    value = fr.stack.pop()
                    key = fr.stack.pop()
                    recv = fr.stack.pop()
                    self._index_set(recv, key, value)
                elif op == Op.CALL:
                    self._do_call(t, fr, self.program.functions[ins.a],
                                  ins.b, use_this=False)
                elif op == Op.CALLM:
                    self._do_call(t, fr,
                                  self._method_fn(fr, ins.a, ins.b),
                                  ins.b, use_this=True)
                elif op == Op.BUILTIN:
                    self._builtin(fr, ins.a, ins.b)
                elif op == Op.RET:
                    self._do_return(t, ins.line)
                    if t.state == DONE:
                        return
                elif op == Op.SPAWN:
                    self._do_spawn(t, fr, self.program.functions[ins.a],
                                   ins.b, use_this=False, line=ins.line)
                elif op == Op.SPAWNM:
                    self._do_spawn(t, fr,
                                   self._method_fn(fr, ins.a, ins.b),
                                   ins.b, use_this=True, line=ins.line)
                elif op == Op.THROW:
                    raise MiniThrow(fr.stack.pop())
                elif op == Op.TRYPUSH:
                    fr.try_stack.append(
                        (ins.a, len(fr.stack), len(fr.lock_stack)))
                elif op == Op.TRYPOP:
                    fr.try_stack.pop()
                elif op == Op.LOCK:
                    self._do_lock(t, fr, ins.line)
                    if t.state == BLOCKED:
                        return
                elif op == Op.UNLOCK:
                    self._do_unlock(t, fr.lock_stack.pop(), ins.line)

                # recording probes; all peek, none pop
                elif op == Op.RSTORE:
                    if rec is not None:
                        rec.on_store_local(
                            t.idx, self._tl(t, fr, ins.line),
                            fr.fn.local_names[ins.a],
                            fr.stack[-1], ins.line, len(t.frames))
                elif op == Op.RSTOREF:
                    if rec is not None and isinstance(fr.stack[-2], ObjectHandle):
                        rec.on_store_field(
                            t.idx, self._tl(t, fr, ins.line),
                            fr.stack[-2], fr.fn.consts[ins.a],
                            fr.stack[-1], ins.line, len(t.frames))
                elif op == Op.RSTOREI:
                    if rec is not None and is_handle(fr.stack[-3]):
                        key = fr.stack[-2]
                        if self._index_ok(fr.stack[-3], key):
                            rec.on_store_index(
                                t.idx, self._tl(t, fr, ins.line),
                                fr.stack[-3], key, fr.stack[-1],
                                ins.line, len(t.frames))
                elif op == Op.RCALL:
                    if rec is not None:
                        args = fr.stack[len(fr.stack) - ins.b:] if ins.b else []
                        # call events sit at the caller's depth so a
                        # depth-bounded scan steps over the callee
                        t.pending_tl = rec.on_call(
                            t.idx, self._tl(t, fr, ins.line),
                            self.program.functions[ins.a].name,
                            None, list(args), ins.line, len(t.frames))
                elif op == Op.RCALLM:
                    if rec is not None:
                        recv = fr.stack[-1 - ins.b]
                        args = fr.stack[len(fr.stack) - ins.b:] if ins.b else []
                        t.pending_tl = rec.on_call(
                            t.idx, self._tl(t, fr, ins.line),
                            fr.fn.consts[ins.a],
                            recv, list(args), ins.line, len(t.frames))
                elif op == Op.RRET:
                    if rec is not None and t.last_ret_tl is not None:
                        rec.on_return(t.idx, t.last_ret_tl, fr.stack[-1],
                                      ins.line, len(t.frames) + 1)
                        t.last_ret_tl = None
                elif op == Op.RPRINT:
                    if rec is not None:
                        args = fr.stack[len(fr.stack) - ins.b:] if ins.b else []
                        text = " ".join(render(a) for a in args)
                        rec.on_print(t.idx, self._tl(t, fr, ins.line),
                                     text, ins.line, len(t.frames))
                elif op == Op.RCOLL:
                    if rec is not None and isinstance(fr.stack[-2], ListHandle):
                        rec.on_store_index(
                            t.idx, self._tl(t, fr, ins.line),
                            fr.stack[-2], len(fr.stack[-2].cells),
                            fr.stack[-1], ins.line, len(t.frames))
                elif op == Op.RTHROW:
                    if rec is not None:
                        rec.on_throw(t.idx, self._tl(t, fr, ins.line),
                                     fr.stack[-1], ins.line, len(t.frames))
                elif op == Op.RCATCH:
                    if rec is not None:
                        rec.on_catch(t.idx, self._tl(t, fr, ins.line),
                                     fr.stack[-1], ins.line, len(t.frames))
                else:
                    raise VmInternalError(f"bad opcode {op}")
            except MiniThrow as exc:
                if rec is not None and op != Op.THROW:
                    # runtime error; explicit throws were probed already
                    rec.on_throw(t.idx, self._tl(t, t.frames[-1], ins.line),
                                 exc.value, ins.line, len(t.frames))
                self._unwind(t, exc.value, ins.line)
                if t.state != RUNNABLE:
                    return
        # budget exhausted

    # ------------------------------------------------------------ helpers

    def _tl(self, t: MiniThread, fr: Frame, line: int):
        """Frame's traceline, synthesizing an orphan when the call that
        created the frame was not itself recorded."""
        if fr.traceline is None and self.rec is not None:
            fr.traceline = self.rec.orphan_traceline(
                t.idx, fr.fn.name, fr.this, line, len(t.frames))
        return fr.traceline

    def _arith(self, fr: Frame, op: int) -> None:
        stack = fr.stack
        if op == Op.NEG:
            v = stack.pop()
            if not isinstance(v, int) or isinstance(v, bool):
                raise MiniThrow(f"cannot negate {type_name(v)}")
            stack.append(wrap_int(-v))
            return
        if op == Op.NOT:
            v = stack.pop()
            if not isinstance(v, bool):
                raise MiniThrow(f"cannot apply ! to {type_name(v)}")
            stack.append(not v)
            return
        b = stack.pop()
        a = stack.pop()
        if op == Op.EQ:
            stack.append(values_equal(a, b))
            return
        if op == Op.NE:
            stack.append(not values_equal(a, b))
            return
        if op == Op.ADD and isinstance(a, str) and isinstance(b, str):
            stack.append(a + b)
            return
        a_int = isinstance(a, int) and not isinstance(a, bool)
        b_int = isinstance(b, int) and not isinstance(b, bool)
        if not (a_int and b_int):
            opname = {Op.ADD: "+", Op.SUB: "-", Op.MUL: "*", Op.DIV: "/",
                      Op.MOD: "%", Op.LT: "<", Op.LE: "<=", Op.GT: ">",
                      Op.GE: ">="}[op]
            raise MiniThrow(
                f"type error: {type_name(a)} {opname} {type_name(b)}")
        if op == Op.ADD:
            stack.append(wrap_int(a + b))
        elif op == Op.SUB:
            stack.append(wrap_int(a - b))
        elif op == Op.MUL:
            stack.append(wrap_int(a * b))
        elif op == Op.DIV:
            if b == 0:
                raise MiniThrow("divide by zero")
            stack.append(div_trunc(a, b))
        elif op == Op.MOD:
            if b == 0:
                raise MiniThrow("divide by zero")
            stack.append(mod_trunc(a, b))
        elif op == Op.LT:
            stack.append(a < b)
        elif op == Op.LE:
            stack.append(a <= b)
        elif op == Op.GT:
            stack.append(a > b)
        else:
            stack.append(a >= b)

    def _index_ok(self, recv, key) -> bool:
        if isinstance(recv, (ArrayHandle, ListHandle)):
            return isinstance(key, int) and not isinstance(key, bool) \
                and 0 <= key < len(recv.cells)
        if isinstance(recv, MapHandle):
            return isinstance(key, (int, str)) and not isinstance(key, bool)
        return False

    def _index_get(self, recv, key):
        if isinstance(recv, (ArrayHandle, ListHandle)):
            if not isinstance(key, int) or isinstance(key, bool):
                raise MiniThrow(f"index must be int, not {type_name(key)}")
            if not 0 <= key < len(recv.cells):
                raise MiniThrow(f"index {key} out of range")
            return recv.cells[key]
        if isinstance(recv, MapHandle):
            if not isinstance(key, (int, str)) or isinstance(key, bool):
                raise MiniThrow(f"bad map key type {type_name(key)}")
            if key not in recv.entries:
                raise MiniThrow(f"missing key {key!r}")
            return recv.entries[key]
        raise MiniThrow(f"cannot index {type_name(recv)}")

    def _index_set(self, recv, key, value) -> None:
        if isinstance(recv, (ArrayHandle, ListHandle)):
            if not isinstance(key, int) or isinstance(key, bool):
                raise MiniThrow(f"index must be int, not {type_name(key)}")
            if not 0 <= key < len(recv.cells):
                raise MiniThrow(f"index {key} out of range")
            recv.cells[key] = value
            return
        if isinstance(recv, MapHandle):
            if not isinstance(key, (int, str)) or isinstance(key, bool):
                raise MiniThrow(f"bad map key type {type_name(key)}")
            recv.entries[key] = value
            return
        raise MiniThrow(f"cannot index {type_name(recv)}")

    def _method_fn(self, fr: Frame, name_const: int, argc: int) -> Function:
        recv = fr.stack[-1 - argc]
        if not isinstance(recv, ObjectHandle):
            raise MiniThrow(f"method call on {type_name(recv)}")
        name = fr.fn.consts[name_const]
        return self.program.function(name)

    def _pop_args(self, fr: Frame, argc: int) -> list:
        if argc == 0:
            return []
        args = fr.stack[len(fr.stack) - argc:]
        del fr.stack[len(fr.stack) - argc:]
        return args

    def _do_call(self, t: MiniThread, fr: Frame, fn: Function, argc: int,
                 use_this: bool) -> None:
        args = self._pop_args(fr, argc)
        this = fr.stack.pop() if use_this else None
        tl = t.pending_tl
        t.pending_tl = None
        t.frames.append(Frame(fn, args, this, tl))

    def _do_return(self, t: MiniThread, line: int) -> None:
        fr = t.frames.pop()
        value = fr.stack.pop()
        self._release_frame_locks(t, fr, line)
        t.last_ret_tl = fr.traceline
        if self.rec is not None:
            self.rec.on_frame_pop(t.idx, fr.traceline)
        if t.frames:
            t.frames[-1].stack.append(value)
        else:
            t.state = DONE
            if self.rec is not None:
                self.rec.on_thread_done(t.idx, fr.traceline, value, line)

    def _do_spawn(self, t: MiniThread, fr: Frame, fn: Function, argc: int,
                  use_this: bool, line: int) -> None:
        if not self.allow_spawn:
            raise ReplayError("spawn is not available while replaying")
        args = self._pop_args(fr, argc)
        this = fr.stack.pop() if use_this else None
        idx = len(self.threads)
        name = display_name(this) if this is not None else f"{fn.name}-{idx}"
        nt = MiniThread(idx, name)
        self.threads.append(nt)
        if self.rec is not None:
            self.rec.register_thread(idx, name, fn.name, this)
            nt.root_tl = self.rec.on_spawn(
                t.idx, idx, fn.name, this, list(args), line,
                len(t.frames))
        nt.frames.append(Frame(fn, args, this, nt.root_tl))

    def _do_lock(self, t: MiniThread, fr: Frame, line: int) -> None:
        handle = fr.stack.pop()
        if not is_handle(handle):
            raise MiniThrow(f"cannot lock {type_name(handle)}")
        st = self.locks.get(handle)
        if st is None:
            self.locks[handle] = LockState(holder=t.idx)
            fr.lock_stack.append(handle)
        elif st.holder == t.idx:
            st.count += 1
            fr.lock_stack.append(handle)
        else:
            st.waiters.append(t.idx)
            t.state = BLOCKED
            t.blocked_on = handle
            if self.rec is not None:
                self.rec.on_block(t.idx, self._tl(t, fr, line), handle,
                                  st.holder, line, len(t.frames))

    def _do_unlock(self, t: MiniThread, handle, line: int) -> None:
        st = self.locks.get(handle)
        if st is None or st.holder != t.idx:
            raise VmInternalError("unlock of a lock not held")
        st.count -= 1
        if st.count > 0:
            return
        if not st.waiters:
            del self.locks[handle]
            return
        nxt = st.waiters.popleft()
        st.holder = nxt
        st.count = 1
        wt = self.threads[nxt]
        wt.state = RUNNABLE
        wt.blocked_on = None
        wt.frames[-1].lock_stack.append(handle)
        if self.rec is not None:
            wline = self._current_line(wt)
            self.rec.on_unblock(nxt, self._tl(wt, wt.frames[-1], wline),
                                handle, wline, len(wt.frames))

    def _release_frame_locks(self, t: MiniThread, fr: Frame,
                             line: int) -> None:
        while fr.lock_stack:
            self._do_unlock(t, fr.lock_stack.pop(), line)

    def _builtin(self, fr: Frame, bid: int, argc: int) -> None:
        args = self._pop_args(fr, argc)
        if bid == Builtin.PRINT:
            self.stdout_chunks.append(" ".join(render(a) for a in args) + "\n")
            fr.stack.append(None)
        elif bid == Builtin.ARRAY:
            n = args[0]
            if not isinstance(n, int) or isinstance(n, bool) or n < 0:
                raise MiniThrow("array size must be a non-negative int")
            fr.stack.append(self.alloc.new_array(n))
        elif bid == Builtin.LIST:
            fr.stack.append(self.alloc.new_list())
        elif bid == Builtin.MAP:
            fr.stack.append(self.alloc.new_map())
        elif bid == Builtin.LEN:
            v = args[0]
            if isinstance(v, str):
                fr.stack.append(len(v))
            elif isinstance(v, (ArrayHandle, ListHandle)):
                fr.stack.append(len(v.cells))
            elif isinstance(v, MapHandle):
                fr.stack.append(len(v.entries))
            else:
                raise MiniThrow(f"len of {type_name(v)}")
        elif bid == Builtin.PUSH:
            lst, value = args
            if not isinstance(lst, ListHandle):
                raise MiniThrow(f"push needs a list, got {type_name(lst)}")
            lst.cells.append(value)
            fr.stack.append(None)
        elif bid == Builtin.STR:
            v = args[0]
            fr.stack.append(v if isinstance(v, str) else render(v, 1))
        else:
            raise VmInternalError(f"bad builtin {bid}")

    def _unwind(self, t: MiniThread, value, line: int) -> None:
        while t.frames:
            fr = t.frames[-1]
            if fr.try_stack:
                hpc, sdepth, ldepth = fr.try_stack.pop()
                while len(fr.lock_stack) > ldepth:
                    self._do_unlock(t, fr.lock_stack.pop(), line)
                del fr.stack[sdepth:]
                fr.stack.append(value)
                fr.pc = hpc
                return
            t.frames.pop()
            self._release_frame_locks(t, fr, line)
            if self.rec is not None:
                self.rec.on_unwind_frame(t.idx, fr.traceline, line,
                                         len(t.frames) + 1)
        t.state = DONE
        self.uncaught.append((t.idx, value))
        if self.rec is not None:
            self.rec.on_thread_done(t.idx, t.root_tl, None, line)

    # ------------------------------------------------------------ results

    @property
    def stdout(self) -> str:
        return "".join(self.stdout_chunks)


def run_program(program: Program, recorder=None,
                quantum: int = DEFAULT_QUANTUM,
                max_steps: int = 50_000_000) -> VM:
    vm = VM(program, recorder, quantum, max_steps)
    vm.start()
    vm.run()
    return vm
