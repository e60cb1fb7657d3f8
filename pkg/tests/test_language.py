"""The bundled language end to end: lexing, parsing, compiled shape,
and runtime semantics. Runtime checks go through run_plain and assert
on printed output, the only observable a plain run has."""

import pytest

from odbx.errors import CompileError, MiniSyntaxError
from odbx.minivm.bytecode import Op, disassemble
from odbx.minivm.compiler import compile_source
from odbx.minivm.instrument import instrument
from odbx.minivm.lexer import tokenize
from odbx.run import run_plain


def run(src):
    vm = run_plain(src)
    assert vm.uncaught == [], vm.uncaught
    return "".join(vm.stdout_chunks)


# ------------------------------------------------------------- lexer

def test_token_stream():
    toks = tokenize('x = a1 + 204; // trailing\nif (s != "hi\\n") {}')
    kinds = [(t.kind, t.value) for t in toks]
    assert ("ident", "x") in kinds
    assert ("int", 204) in kinds
    assert ("string", "hi\n") in kinds
    assert ("!=", "!=") in kinds
    assert all(v != "trailing" for _, v in kinds)   # comments vanish


def test_keywords_are_not_names():
    toks = tokenize("while return fn whiles")
    kinds = [(t.kind, t.value) for t in toks]
    assert ("keyword", "while") in kinds
    assert ("keyword", "return") in kinds
    assert ("ident", "whiles") in kinds


def test_unterminated_string():
    with pytest.raises(MiniSyntaxError) as e:
        tokenize('x = "oops;\ny = 1;')
    assert str(e.value).startswith("1:")    # reported on the right line


def test_stray_character():
    with pytest.raises(MiniSyntaxError):
        tokenize("x = 1 $ 2;")


# ------------------------------------------------------------ parser

@pytest.mark.parametrize("src", [
    "fn main() { x = 1 }",                  # missing semicolon
    "fn main() { if x { } }",               # condition needs parens
    "fn () { }",                            # function needs a name
    "fn main() { x = ; }",
    "fn main() { while (true) { }",         # unclosed block
])
def test_parse_errors(src):
    with pytest.raises(MiniSyntaxError):
        compile_source(src)


def test_arity_checked_at_compile_time():
    with pytest.raises(CompileError):
        compile_source("fn f(a, b) { return a; } fn main() { x = f(1); }")


def test_duplicate_function():
    with pytest.raises(CompileError):
        compile_source("fn f() {} fn f() {} fn main() {}")


# ----------------------------------------------------- compiled shape

PLAIN_ADD = """\
fn add(a, b)  // line 1, locals: a b c
     0  LOADL    0 (a)  ; line 2
     1  LOADL    1 (b)  ; line 2
     2  ADD  ; line 2
     3  STOREL   2 (c)  ; line 2
     4  LOADL    2 (c)  ; line 3
     5  RET  ; line 3
     6  PUSH     0 (None)  ; line 3
     7  RET  ; line 3
"""

INSTRUMENTED_ADD = """\
fn add(a, b)  // line 1, locals: a b c
     0  LOADL    0 (a)  ; line 2
     1  LOADL    1 (b)  ; line 2
     2  ADD  ; line 2
     3  RSTORE   2 (c)  ; line 2
     4  STOREL   2 (c)  ; line 2
     5  LOADL    2 (c)  ; line 3
     6  RET  ; line 3
     7  PUSH     0 (None)  ; line 3
     8  RET  ; line 3
"""

ADD_SRC = "fn add(a, b) {\n  c = a + b;\n  return c;\n}\n"


def test_golden_disassembly():
    assert disassemble(compile_source(ADD_SRC)) == PLAIN_ADD


def test_golden_instrumented_disassembly():
    prog = instrument(compile_source(ADD_SRC), ())
    assert disassemble(prog) == INSTRUMENTED_ADD


def test_excluded_function_keeps_plain_body():
    prog = instrument(compile_source(ADD_SRC), ("add",))
    ops = {ins.op for ins in prog.function("add").code}
    assert Op.RSTORE not in ops
    assert Op.STOREL in ops


def test_probes_precede_their_stores():
    # the probe must see the value before the store commits, for every
    # store family
    src = ("fn main() { x = 1; o = new Box; o.f = 2; a = array(1); "
           "a[0] = 3; }")
    prog = instrument(compile_source(src), ())
    code = prog.function("main").code
    for i, ins in enumerate(code):
        if ins.op == Op.STOREL and i > 0:
            assert code[i - 1].op in (Op.RSTORE, Op.STOREL) or i == 0
        if ins.op == Op.SETF:
            assert code[i - 1].op == Op.RSTOREF
        if ins.op == Op.SETI:
            assert code[i - 1].op == Op.RSTOREI


# --------------------------------------------------------- semantics

def test_ints_wrap_at_64_bits():
    assert run("fn main() { print(9223372036854775807 + 1); }") == \
        "-9223372036854775808\n"


def test_division_truncates_toward_zero():
    assert run("fn main() { print(-7 / 2); print(-7 % 2); print(7 / -2); }") \
        == "-3\n-1\n-3\n"


def test_divide_by_zero_is_catchable():
    src = 'fn main() { try { x = 1 / 0; } catch (e) { print("got", e); } }'
    assert run(src) == "got divide by zero\n"


def test_strict_typing():
    assert run('fn main() { try { x = "a" + 1; } catch (e) { print(e); } }') \
        == "type error: string + int\n"
    assert run('fn main() { try { if (1) {} } catch (e) { print(e); } }') \
        == "condition must be true or false\n"
    assert run('fn main() { try { x = 1 < "a"; } catch (e) { print(e); } }') \
        == "type error: int < string\n"


def test_short_circuit():
    src = ('fn boom() { print("boom"); return true; }\n'
           'fn main() { x = false && boom(); y = true || boom(); '
           'print(x, y); }')
    assert run(src) == "false true\n"


def test_strings_and_builtins():
    src = ('fn main() { s = "ab" + "cd"; '
           'print(s, len(s), str(42), s == "abcd"); }')
    assert run(src) == "abcd 4 42 true\n"


def test_arrays():
    src = ('fn main() { a = array(3); print(a[0], len(a)); a[2] = 9; '
           'print(a[2]); try { x = a[3]; } catch (e) { print(e); } }')
    assert run(src) == "null 3\n9\nindex 3 out of range\n"


def test_lists_and_maps():
    assert run('fn main() { l = list(); push(l, 1); push(l, 2); '
               'print(l[1], len(l), l); }') == "2 2 [1, 2]\n"
    assert run('fn main() { m = map(); m["k"] = 5; print(m["k"], len(m)); '
               'try { x = m["zz"]; } catch (e) { print(e); } }') == \
        "5 1\nmissing key 'zz'\n"


def test_objects_and_methods():
    src = """
fn area(  ) { return this.w * this.h; }
fn main() {
  r = new Rect;
  r.w = 3;
  r.h = 4;
  print(r.area());
  print(r);
}
"""
    assert run(src) == "12\n<Rect_0>\n"


def test_this_outside_method_is_catchable():
    src = ('fn f() { return this; } fn main() { try { x = f(); } '
           'catch (e) { print("got", e); } }')
    assert run(src) == "got no this in a plain function\n"


def test_uncaught_throw_surfaces():
    vm = run_plain('fn main() { throw "bad"; }')
    assert vm.uncaught == [(0, "bad")]
    assert vm.stdout_chunks == []


def test_recursion():
    src = ('fn fib(n) { if (n < 2) { return n; } '
           'return fib(n - 1) + fib(n - 2); } '
           'fn main() { print(fib(12)); }')
    assert run(src) == "144\n"


def test_round_robin_interleaving_is_deterministic():
    src = """
fn worker(tag, n) {
  i = 0;
  while (i < n) {
    print(tag, i);
    i = i + 1;
  }
}
fn main() {
  spawn worker("a", 3);
  spawn worker("b", 3);
  worker("m", 3);
}
"""
    expect = ("a 0\nb 0\nm 0\na 1\nb 1\nm 1\na 2\nb 2\nm 2\n")
    assert run(src) == expect
    assert run(src) == expect       # same interleaving every run


def test_reentrant_lock_serializes_threads():
    src = """
fn bump(box) {
  lock (box) {
    lock (box) {
      box["n"] = box["n"] + 1;
    }
  }
}
fn hammer(box, k) {
  j = 0;
  while (j < k) { bump(box); j = j + 1; }
}
fn main() {
  box = map();
  box["n"] = 0;
  spawn hammer(box, 40);
  spawn hammer(box, 40);
  hammer(box, 40);
  print("n", box["n"]);
}
"""
    assert run(src) == "n 120\n"
