"""AST to bytecode translation. No recording probes are emitted here;
`instrument` adds those to an already compiled program."""

from __future__ import annotations

from ..errors import CompileError
from . import parser as ast
from .bytecode import Builtin, Function, Instr, Op, Program

_BUILTIN_ARITY = {
    Builtin.PRINT: None,   # varargs
    Builtin.ARRAY: 1,
    Builtin.LIST: 0,
    Builtin.MAP: 0,
    Builtin.LEN: 1,
    Builtin.PUSH: 2,
    Builtin.STR: 1,
}

_BUILTIN_BY_NAME = {b.name.lower(): b for b in Builtin}


def _collect_locals(fn: ast.FnDef) -> list[str]:
    names: list[str] = list(fn.params)
    seen = set(names)

    def visit(node: object) -> None:
        if isinstance(node, ast.AssignLocal):
            if node.name not in seen:
                seen.add(node.name)
                names.append(node.name)
            visit(node.value)
        elif isinstance(node, ast.Try):
            visit(node.body)
            if node.var not in seen:
                seen.add(node.var)
                names.append(node.var)
            visit(node.handler)
        elif isinstance(node, ast.Block):
            for s in node.stmts:
                visit(s)
        elif isinstance(node, ast.If):
            visit(node.cond)
            visit(node.then)
            if node.otherwise:
                visit(node.otherwise)
        elif isinstance(node, ast.While):
            visit(node.cond)
            visit(node.body)
        elif isinstance(node, ast.Lock):
            visit(node.target)
            visit(node.body)
        elif isinstance(node, (ast.Return, ast.Throw)):
            if getattr(node, "value", None) is not None:
                visit(node.value)
        elif isinstance(node, (ast.ExprStmt,)):
            visit(node.expr)
        elif isinstance(node, ast.Spawn):
            visit(node.call)
        elif isinstance(node, ast.AssignField):
            visit(node.recv)
            visit(node.value)
        elif isinstance(node, ast.AssignIndex):
            visit(node.recv)
            visit(node.index)
            visit(node.value)
        # plain expressions introduce no locals

    visit(fn.body)
    return names


class _FnCompiler:
    def __init__(self, fndef: ast.FnDef, fn_index: dict[str, int],
                 fn_arity: dict[str, int]):
        self.fndef = fndef
        self.fn_index = fn_index
        self.fn_arity = fn_arity
        self.locals = _collect_locals(fndef)
        self.slot = {name: i for i, name in enumerate(self.locals)}
        self.code: list[Instr] = []
        self.consts: list[object] = []
        self._const_key: dict[tuple, int] = {}

    def const(self, value: object) -> int:
        key = (type(value).__name__, value)
        idx = self._const_key.get(key)
        if idx is None:
            idx = len(self.consts)
            self.consts.append(value)
            self._const_key[key] = idx
        return idx

    def emit(self, op: Op, a: int = 0, b: int = 0, line: int = 0) -> int:
        self.code.append(Instr(int(op), a, b, line))
        return len(self.code) - 1

    def patch(self, at: int, target: int) -> None:
        self.code[at].a = target

    def here(self) -> int:
        return len(self.code)

    # ---- expressions

    def expr(self, e: ast.Node) -> None:
        if isinstance(e, ast.IntLit):
            self.emit(Op.PUSH, self.const(e.value), line=e.line)
        elif isinstance(e, ast.StrLit):
            self.emit(Op.PUSH, self.const(e.value), line=e.line)
        elif isinstance(e, ast.BoolLit):
            self.emit(Op.PUSH, self.const(e.value), line=e.line)
        elif isinstance(e, ast.NullLit):
            self.emit(Op.PUSH, self.const(None), line=e.line)
        elif isinstance(e, ast.ThisExpr):
            self.emit(Op.LOADTHIS, line=e.line)
        elif isinstance(e, ast.VarExpr):
            if e.name not in self.slot:
                raise CompileError(
                    f"unknown variable {e.name!r} in fn {self.fndef.name} "
                    f"(line {e.line})")
            self.emit(Op.LOADL, self.slot[e.name], line=e.line)
        elif isinstance(e, ast.Unary):
            self.expr(e.operand)
            self.emit(Op.NEG if e.op == "-" else Op.NOT, line=e.line)
        elif isinstance(e, ast.Binary):
            self.binary(e)
        elif isinstance(e, ast.Call):
            self.call(e, spawn=False)
        elif isinstance(e, ast.MethodCall):
            self.method_call(e, spawn=False)
        elif isinstance(e, ast.FieldGet):
            self.expr(e.recv)
            self.emit(Op.GETF, self.const(e.name), line=e.line)
        elif isinstance(e, ast.IndexGet):
            self.expr(e.recv)
            self.expr(e.index)
            self.emit(Op.GETI, line=e.line)
        elif isinstance(e, ast.NewExpr):
            self.emit(Op.NEW, self.const(e.class_name), line=e.line)
        else:
            raise CompileError(f"cannot compile node {type(e).__name__}")

    _BINOPS = {
        "+": Op.ADD, "-": Op.SUB, "*": Op.MUL, "/": Op.DIV, "%": Op.MOD,
        "==": Op.EQ, "!=": Op.NE, "<": Op.LT, "<=": Op.LE,
        ">": Op.GT, ">=": Op.GE,
    }

    def binary(self, e: ast.Binary) -> None:
        if e.op == "&&":
            # keep left when false, else replace with right
            self.expr(e.left)
            self.emit(Op.DUP, line=e.line)
            jf = self.emit(Op.JF, 0, line=e.line)
            self.emit(Op.POP, line=e.line)
            self.expr(e.right)
            self.patch(jf, self.here())
            return
        if e.op == "||":
            self.expr(e.left)
            self.emit(Op.DUP, line=e.line)
            self.emit(Op.NOT, line=e.line)
            jf = self.emit(Op.JF, 0, line=e.line)
            self.emit(Op.POP, line=e.line)
            self.expr(e.right)
            self.patch(jf, self.here())
            return
        self.expr(e.left)
        self.expr(e.right)
        self.emit(self._BINOPS[e.op], line=e.line)

    def call(self, e: ast.Call, spawn: bool) -> None:
        if e.name in _BUILTIN_BY_NAME:
            if spawn:
                raise CompileError(f"cannot spawn builtin {e.name} (line {e.line})")
            b = _BUILTIN_BY_NAME[e.name]
            arity = _BUILTIN_ARITY[b]
            if arity is not None and len(e.args) != arity:
                raise CompileError(
                    f"{e.name} takes {arity} argument(s), got {len(e.args)} "
                    f"(line {e.line})")
            for a in e.args:
                self.expr(a)
            self.emit(Op.BUILTIN, int(b), len(e.args), line=e.line)
            return
        idx = self.fn_index.get(e.name)
        if idx is None:
            raise CompileError(f"unknown function {e.name!r} (line {e.line})")
        if len(e.args) != self.fn_arity[e.name]:
            raise CompileError(
                f"{e.name} takes {self.fn_arity[e.name]} argument(s), "
                f"got {len(e.args)} (line {e.line})")
        for a in e.args:
            self.expr(a)
        self.emit(Op.SPAWN if spawn else Op.CALL, idx, len(e.args), line=e.line)

    def method_call(self, e: ast.MethodCall, spawn: bool) -> None:
        if e.name not in self.fn_index:
            raise CompileError(f"unknown method {e.name!r} (line {e.line})")
        if len(e.args) != self.fn_arity[e.name]:
            raise CompileError(
                f"{e.name} takes {self.fn_arity[e.name]} argument(s), "
                f"got {len(e.args)} (line {e.line})")
        self.expr(e.recv)
        for a in e.args:
            self.expr(a)
        op = Op.SPAWNM if spawn else Op.CALLM
        self.emit(op, self.const(e.name), len(e.args), line=e.line)

    # ---- statements

    def stmt(self, s: ast.Node) -> None:
        if isinstance(s, ast.ExprStmt):
            self.expr(s.expr)
            self.emit(Op.POP, line=s.line)
        elif isinstance(s, ast.AssignLocal):
            self.expr(s.value)
            self.emit(Op.STOREL, self.slot[s.name], line=s.line)
        elif isinstance(s, ast.AssignField):
            self.expr(s.recv)
            self.expr(s.value)
            self.emit(Op.SETF, self.const(s.name), line=s.line)
        elif isinstance(s, ast.AssignIndex):
            self.expr(s.recv)
            self.expr(s.index)
            self.expr(s.value)
            self.emit(Op.SETI, line=s.line)
        elif isinstance(s, ast.If):
            self.expr(s.cond)
            jf = self.emit(Op.JF, 0, line=s.line)
            self.block(s.then)
            if s.otherwise is None:
                self.patch(jf, self.here())
            else:
                jend = self.emit(Op.JUMP, 0, line=s.line)
                self.patch(jf, self.here())
                self.block(s.otherwise)
                self.patch(jend, self.here())
        elif isinstance(s, ast.While):
            top = self.here()
            self.expr(s.cond)
            jf = self.emit(Op.JF, 0, line=s.line)
            self.block(s.body)
            self.emit(Op.JUMP, top, line=s.line)
            self.patch(jf, self.here())
        elif isinstance(s, ast.Return):
            if s.value is None:
                self.emit(Op.PUSH, self.const(None), line=s.line)
            else:
                self.expr(s.value)
            self.emit(Op.RET, line=s.line)
        elif isinstance(s, ast.Throw):
            self.expr(s.value)
            self.emit(Op.THROW, line=s.line)
        elif isinstance(s, ast.Try):
            tp = self.emit(Op.TRYPUSH, 0, line=s.line)
            self.block(s.body)
            self.emit(Op.TRYPOP, line=s.line)
            jend = self.emit(Op.JUMP, 0, line=s.line)
            self.patch(tp, self.here())
            # thrown value arrives on the stack at handler entry
            self.emit(Op.STOREL, self.slot[s.var], line=s.catch_line)
            self.block(s.handler)
            self.patch(jend, self.here())
        elif isinstance(s, ast.Lock):
            self.expr(s.target)
            self.emit(Op.LOCK, line=s.line)
            self.block(s.body)
            self.emit(Op.UNLOCK, line=s.line)
        elif isinstance(s, ast.Spawn):
            if isinstance(s.call, ast.Call):
                self.call(s.call, spawn=True)
            else:
                self.method_call(s.call, spawn=True)
        else:
            raise CompileError(f"cannot compile statement {type(s).__name__}")

    def block(self, b: ast.Block) -> None:
        for s in b.stmts:
            self.stmt(s)

    def compile(self) -> Function:
        self.block(self.fndef.body)
        last_line = self.code[-1].line if self.code else self.fndef.line
        self.emit(Op.PUSH, self.const(None), line=last_line)
        self.emit(Op.RET, line=last_line)
        return Function(
            name=self.fndef.name,
            params=list(self.fndef.params),
            local_names=self.locals,
            code=self.code,
            consts=self.consts,
            def_line=self.fndef.line,
        )


def compile_source(text: str, path: str | None = None) -> Program:
    tree = ast.parse(text)
    fn_index: dict[str, int] = {}
    fn_arity: dict[str, int] = {}
    for i, fn in enumerate(tree.functions):
        if fn.name in fn_index:
            raise CompileError(f"duplicate function {fn.name!r} (line {fn.line})")
        if fn.name in _BUILTIN_BY_NAME:
            raise CompileError(
                f"function name {fn.name!r} shadows a builtin (line {fn.line})")
        fn_index[fn.name] = i
        fn_arity[fn.name] = len(fn.params)
    functions = [_FnCompiler(fn, fn_index, fn_arity).compile()
                 for fn in tree.functions]
    return Program(functions, fn_index, text, path)
