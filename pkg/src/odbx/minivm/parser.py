"""Recursive-descent parser producing the mini-language AST.

Each node carries the 1-based source line it started on; the compiler
copies that line into every instruction it emits for the node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import MiniSyntaxError
from .lexer import Token, tokenize


# ---------------------------------------------------------------- AST nodes

@dataclass
class Node:
    line: int


# expressions

@dataclass
class IntLit(Node):
    value: int


@dataclass
class StrLit(Node):
    value: str


@dataclass
class BoolLit(Node):
    value: bool


@dataclass
class NullLit(Node):
    pass


@dataclass
class ThisExpr(Node):
    pass


@dataclass
class VarExpr(Node):
    name: str


@dataclass
class Unary(Node):
    op: str
    operand: Node


@dataclass
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass
class Call(Node):
    name: str
    args: list[Node]


@dataclass
class MethodCall(Node):
    recv: Node
    name: str
    args: list[Node]


@dataclass
class FieldGet(Node):
    recv: Node
    name: str


@dataclass
class IndexGet(Node):
    recv: Node
    index: Node


@dataclass
class NewExpr(Node):
    class_name: str


# statements

@dataclass
class Block(Node):
    stmts: list[Node] = field(default_factory=list)


@dataclass
class ExprStmt(Node):
    expr: Node


@dataclass
class AssignLocal(Node):
    name: str
    value: Node


@dataclass
class AssignField(Node):
    recv: Node
    name: str
    value: Node


@dataclass
class AssignIndex(Node):
    recv: Node
    index: Node
    value: Node


@dataclass
class If(Node):
    cond: Node
    then: Block
    otherwise: Block | None


@dataclass
class While(Node):
    cond: Node
    body: Block


@dataclass
class Return(Node):
    value: Node | None


@dataclass
class Throw(Node):
    value: Node


@dataclass
class Try(Node):
    body: Block
    var: str
    handler: Block
    catch_line: int = 0


@dataclass
class Lock(Node):
    target: Node
    body: Block


@dataclass
class Spawn(Node):
    call: Node  # Call or MethodCall


@dataclass
class FnDef(Node):
    name: str
    params: list[str]
    body: Block


@dataclass
class ProgramAst(Node):
    functions: list[FnDef]


# ---------------------------------------------------------------- parser

class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    # token plumbing

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def at(self, kind: str, value: object = None) -> bool:
        t = self.peek()
        if t.kind != kind:
            return False
        return value is None or t.value == value

    def expect(self, kind: str, value: object = None) -> Token:
        t = self.peek()
        if not self.at(kind, value):
            want = value if value is not None else kind
            got = t.value if t.value is not None else t.kind
            raise MiniSyntaxError(f"expected {want!r}, got {got!r}", t.line, t.col)
        return self.next()

    def accept(self, kind: str, value: object = None) -> Token | None:
        if self.at(kind, value):
            return self.next()
        return None

    # grammar

    def program(self) -> ProgramAst:
        fns = []
        first_line = self.peek().line
        while not self.at("eof"):
            fns.append(self.fndef())
        return ProgramAst(first_line, fns)

    def fndef(self) -> FnDef:
        kw = self.expect("keyword", "fn")
        name = self.expect("ident").value
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            params.append(self.expect("ident").value)
            while self.accept(","):
                params.append(self.expect("ident").value)
        self.expect(")")
        body = self.block()
        if len(set(params)) != len(params):
            raise MiniSyntaxError(f"duplicate parameter in fn {name}", kw.line, kw.col)
        return FnDef(kw.line, str(name), [str(p) for p in params], body)

    def block(self) -> Block:
        lb = self.expect("{")
        stmts = []
        while not self.at("}"):
            stmts.append(self.statement())
        self.expect("}")
        return Block(lb.line, stmts)

    def statement(self) -> Node:
        t = self.peek()
        if t.kind == "keyword":
            if t.value == "if":
                return self.if_stmt()
            if t.value == "while":
                self.next()
                self.expect("(")
                cond = self.expression()
                self.expect(")")
                body = self.block()
                return While(t.line, cond, body)
            if t.value == "return":
                self.next()
                value = None if self.at(";") else self.expression()
                self.expect(";")
                return Return(t.line, value)
            if t.value == "throw":
                self.next()
                value = self.expression()
                self.expect(";")
                return Throw(t.line, value)
            if t.value == "try":
                self.next()
                body = self.block()
                ckw = self.expect("keyword", "catch")
                self.expect("(")
                var = self.expect("ident").value
                self.expect(")")
                handler = self.block()
                return Try(t.line, body, str(var), handler, catch_line=ckw.line)
            if t.value == "lock":
                self.next()
                self.expect("(")
                target = self.expression()
                self.expect(")")
                body = self.block()
                return Lock(t.line, target, body)
            if t.value == "spawn":
                self.next()
                call = self.expression()
                if not isinstance(call, (Call, MethodCall)):
                    raise MiniSyntaxError("spawn requires a call", t.line, t.col)
                self.expect(";")
                return Spawn(t.line, call)
        expr = self.expression()
        if self.accept("="):
            value = self.expression()
            self.expect(";")
            if isinstance(expr, VarExpr):
                return AssignLocal(expr.line, expr.name, value)
            if isinstance(expr, FieldGet):
                return AssignField(expr.line, expr.recv, expr.name, value)
            if isinstance(expr, IndexGet):
                return AssignIndex(expr.line, expr.recv, expr.index, value)
            raise MiniSyntaxError("invalid assignment target", expr.line, 1)
        self.expect(";")
        return ExprStmt(expr.line, expr)

    def if_stmt(self) -> If:
        kw = self.expect("keyword", "if")
        self.expect("(")
        cond = self.expression()
        self.expect(")")
        then = self.block()
        otherwise: Block | None = None
        if self.accept("keyword", "else"):
            if self.at("keyword", "if"):
                nested = self.if_stmt()
                otherwise = Block(nested.line, [nested])
            else:
                otherwise = self.block()
        return If(kw.line, cond, then, otherwise)

    # precedence climb: || then && then comparison then +- then */% then unary

    def expression(self) -> Node:
        return self.or_expr()

    def or_expr(self) -> Node:
        left = self.and_expr()
        while self.at("||"):
            op = self.next()
            right = self.and_expr()
            left = Binary(op.line, "||", left, right)
        return left

    def and_expr(self) -> Node:
        left = self.cmp_expr()
        while self.at("&&"):
            op = self.next()
            right = self.cmp_expr()
            left = Binary(op.line, "&&", left, right)
        return left

    def cmp_expr(self) -> Node:
        left = self.add_expr()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at(op):
                tok = self.next()
                right = self.add_expr()
                return Binary(tok.line, op, left, right)
        return left

    def add_expr(self) -> Node:
        left = self.mul_expr()
        while self.at("+") or self.at("-"):
            op = self.next()
            right = self.mul_expr()
            left = Binary(op.line, op.value, left, right)
        return left

    def mul_expr(self) -> Node:
        left = self.unary_expr()
        while self.at("*") or self.at("/") or self.at("%"):
            op = self.next()
            right = self.unary_expr()
            left = Binary(op.line, op.value, left, right)
        return left

    def unary_expr(self) -> Node:
        if self.at("-") or self.at("!"):
            op = self.next()
            operand = self.unary_expr()
            return Unary(op.line, op.value, operand)
        return self.postfix_expr()

    def postfix_expr(self) -> Node:
        expr = self.primary()
        while True:
            if self.accept("."):
                name = self.expect("ident")
                if self.accept("("):
                    args = self.arg_list()
                    expr = MethodCall(name.line, expr, str(name.value), args)
                else:
                    expr = FieldGet(name.line, expr, str(name.value))
                continue
            if self.at("["):
                lb = self.next()
                index = self.expression()
                self.expect("]")
                expr = IndexGet(lb.line, expr, index)
                continue
            return expr

    def arg_list(self) -> list[Node]:
        args: list[Node] = []
        if not self.at(")"):
            args.append(self.expression())
            while self.accept(","):
                args.append(self.expression())
        self.expect(")")
        return args

    def primary(self) -> Node:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return IntLit(t.line, t.value)
        if t.kind == "string":
            self.next()
            return StrLit(t.line, t.value)
        if t.kind == "keyword":
            if t.value in ("true", "false"):
                self.next()
                return BoolLit(t.line, t.value == "true")
            if t.value == "null":
                self.next()
                return NullLit(t.line)
            if t.value == "this":
                self.next()
                return ThisExpr(t.line)
            if t.value == "new":
                self.next()
                name = self.expect("ident")
                return NewExpr(t.line, str(name.value))
        if t.kind == "ident":
            self.next()
            if self.accept("("):
                args = self.arg_list()
                return Call(t.line, str(t.value), args)
            return VarExpr(t.line, str(t.value))
        if self.accept("("):
            expr = self.expression()
            self.expect(")")
            return expr
        got = t.value if t.value is not None else t.kind
        raise MiniSyntaxError(f"unexpected {got!r}", t.line, t.col)


def parse(text: str) -> ProgramAst:
    return _Parser(tokenize(text)).program()
