"""The odbx command, driven in-process through main(argv)."""

import pytest

from conftest import DEMOS

from odbx.cli import main
from odbx.session import load_session

QUICKSORT = str(DEMOS / "quicksort.mini")


@pytest.fixture
def sess(tmp_path):
    out = tmp_path / "q.odbx"
    assert main(["record", QUICKSORT, "-o", str(out)]) == 0
    return str(out)


def run(capsys, argv):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_record_writes_a_loadable_session(tmp_path, capsys):
    out = tmp_path / "s.odbx"
    code, op, err = run(capsys, ["record", QUICKSORT, "-o", str(out)])
    assert code == 0
    assert "before" in op and "after" in op
    assert "recorded 223 events (223 retained)" in err
    assert load_session(str(out)).next_t == 223


def test_record_default_output_next_to_program(tmp_path, capsys):
    prog = tmp_path / "tiny.mini"
    prog.write_text('fn main() { print("hi"); }\n')
    code, op, err = run(capsys, ["record", str(prog)])
    assert code == 0 and op == "hi\n"
    assert (tmp_path / "tiny.odbx").is_file()


def test_record_uncaught_throw_exits_1(tmp_path, capsys):
    prog = tmp_path / "boom.mini"
    prog.write_text('fn main() { throw "boom"; }\n')
    code, op, err = run(capsys, ["record", prog.as_posix(),
                                 "-o", str(tmp_path / "b.odbx")])
    assert code == 1
    assert 'uncaught in main: "boom"' in err
    # the partial session is still on disk, ready to debug
    assert load_session(str(tmp_path / "b.odbx")).next_t > 0


def test_record_bad_inputs_exit_2(tmp_path, capsys):
    assert run(capsys, ["record", str(tmp_path / "no.mini")])[0] == 2
    prog = tmp_path / "bad.mini"
    prog.write_text("fn main( {}\n")
    assert run(capsys, ["record", str(prog),
                        "-o", str(tmp_path / "x.odbx")])[0] == 2
    code, _, err = run(capsys, ["record", QUICKSORT,
                                "-o", str(tmp_path / "y.odbx"),
                                "--start-when", "port = "])
    assert code == 2 and "odbx:" in err


def test_record_budget_flags(tmp_path, capsys):
    out = tmp_path / "g.odbx"
    src = DEMOS / "gc_overflow.mini"
    code, _, err = run(capsys, ["record", str(src), "-o", str(out),
                                "--max-events", "1000"])
    assert code == 0
    store = load_session(str(out))
    assert store.gc_runs > 0 and store.base > 0
    assert f"({store.next_t - store.base} retained)" in err
    code, _, _ = run(capsys, ["record", str(src), "-o", str(out),
                              "--max-events", "1000",
                              "--on-overflow", "halt"])
    assert code == 0
    assert load_session(str(out)).next_t == 1000


def test_record_env_budget(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ODBX_MAX_EVENTS", "1000")
    out = tmp_path / "e.odbx"
    assert main(["record", str(DEMOS / "gc_overflow.mini"),
                 "-o", str(out)]) == 0
    assert load_session(str(out)).gc_runs > 0
    capsys.readouterr()
    monkeypatch.setenv("ODBX_MAX_EVENTS", "many")
    assert main(["record", QUICKSORT, "-o", str(out)]) == 2


def test_record_exclude_flag(tmp_path, capsys):
    out = tmp_path / "x.odbx"
    assert main(["record", QUICKSORT, "-o", str(out),
                 "--exclude", "average,split"]) == 0
    capsys.readouterr()
    store = load_session(str(out))
    assert store.excluded == ["average", "split"]
    assert store.next_t < 223


def test_query_exit_codes(sess, capsys):
    code, op, _ = run(capsys, [
        "query", sess, 'port = call & callMethodName = "sort"', "--all"])
    assert code == 0
    ts = [int(ln.split()[0]) for ln in op.splitlines()]
    assert ts == [17, 67, 99, 117, 139, 174, 192]
    code, op, _ = run(capsys, [
        "query", sess, 'port = call & callMethodName = "nothing"'])
    assert code == 1 and op == ""
    assert run(capsys, ["query", sess, "port < call"])[0] == 2
    assert run(capsys, ["query", str(DEMOS), "port = call"])[0] == 2


def test_query_direction_flags(sess, capsys):
    code, op, _ = run(capsys, [
        "query", sess, 'port = call & callMethodName = "sort"',
        "--from", "17"])
    assert code == 0 and op.startswith("67  ")
    code, op, _ = run(capsys, [
        "query", sess, 'port = call & callMethodName = "sort"',
        "--backward"])
    assert code == 0 and op.startswith("192  ")


def test_debug_scripted_walk(sess, capsys):
    code, op, err = run(capsys, [
        "debug", sess, "-e",
        "goto 17; stack; print end; over; bstep; quit"])
    assert code == 0
    lines = op.splitlines()
    assert lines[0].startswith("t=222 [main]")
    assert lines[1].startswith("t=17 [main]")
    assert any(ln.strip().startswith("<Sorter_0>.sort(0, 12)")
               for ln in lines)
    assert "end = 12" in op
    # over from a call lands past the callee, bstep comes back one
    t_over = int(lines[-2].split()[0][2:])
    t_back = int(lines[-1].split()[0][2:])
    assert t_over > 17 and t_back == t_over - 1


def test_debug_values_and_search(sess, capsys):
    code, op, _ = run(capsys, [
        "debug", sess, "-e",
        'goto 0; search port = output; output; '
        'values <array[12]_0>[6]; quit'])
    assert code == 0
    assert op.splitlines()[2].startswith("t=16 ")   # after the goto echo
    assert "before [33, 51," in op
    # the value current at t=16 is starred, the later one is not
    assert "* t=10  75" in op
    assert "  t=167  54" in op


def test_debug_eval_command(sess, capsys):
    code, op, _ = run(capsys, [
        "debug", sess, "-e", "goto 120; eval <Sorter_0>.average(0, 3); quit"])
    assert code == 0
    assert "=> 9" in op     # cells 0 and 1 hold 15 and 14 at t=120


def test_debug_bad_commands_keep_the_repl_alive(sess, capsys):
    code, op, _ = run(capsys, [
        "debug", sess, "-e",
        "goto 9999; wiggle; print nosuch; search port = ; state; quit"])
    assert code == 0
    assert "t must be in 0..222" in op
    assert "unknown command 'wiggle'" in op
    assert op.count("error:") >= 2
    assert "t = 222 of 0..222" in op    # repl still working at the end


def test_debug_rejects_broken_sessions(tmp_path, capsys):
    junk = tmp_path / "junk.odbx"
    junk.write_bytes(b"ODBX 99\nwhat\n")
    assert run(capsys, ["debug", str(junk), "-e", "quit"])[0] == 2
    empty = tmp_path / "none.odbx"
    empty.write_bytes(b"")
    assert run(capsys, ["debug", str(empty), "-e", "quit"])[0] == 2
