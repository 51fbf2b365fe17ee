"""Command line: exit codes, report forms, determinism, formatting and the bench harness."""

import os
import re
import stat
import sys
import textwrap

import pytest

from efsmt.cli import main
from efsmt.sexp import parse_all

ROOT = os.path.dirname(os.path.dirname(__file__))
PROBLEMS = os.path.join(ROOT, "problems")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_running_example_exit_zero(capsys):
    code, out, _ = run(capsys, "solve", os.path.join(PROBLEMS, "running.efs"), "--strategy", "la-la")
    assert code == 0
    m = re.search(r"x = (\S+)", out)
    from fractions import Fraction

    assert m and Fraction(m.group(1)) >= Fraction(3, 2)


def test_incomplete_exit_two(capsys):
    code, out, _ = run(capsys, "solve", os.path.join(PROBLEMS, "incomplete.efs"), "--max-iters", "50")
    assert code == 2 and "verdict: unknown" in out


def test_invalid_exit_one(capsys):
    code, _, _ = run(capsys, "solve", os.path.join(PROBLEMS, "incomplete-fixed.efs"))
    assert code == 1


def test_usage_and_input_errors(capsys, tmp_path):
    assert run(capsys, "solve")[0] == 64
    assert run(capsys, "solve", "x.efs", "--extrapolate", "maybe")[0] == 64
    assert run(capsys, "frobnicate")[0] == 64
    assert run(capsys)[0] == 64
    assert run(capsys, "solve", str(tmp_path / "missing.efs"))[0] == 66
    bad = tmp_path / "bad.efs"
    bad.write_text("(declare-exists x Real 0 1)\n(guarantee (< x y))\n")
    code, _, err = run(capsys, "solve", str(bad))
    assert code == 65 and ":2:" in err and "undeclared" in err
    empty = tmp_path / "empty.efs"
    empty.write_text("")
    code, _, err = run(capsys, "solve", str(empty))
    assert code == 65 and "no declarations" in err
    nonlin = tmp_path / "nonlin.efs"
    nonlin.write_text("(declare-exists x Real 0 1)\n(declare-forall y Real 0 1)\n(guarantee (> (* x y y) 0))\n")
    assert run(capsys, "solve", str(nonlin), "--strategy", "la-la")[0] == 65


def test_text_and_sexp_carry_the_same_data(capsys):
    path = os.path.join(PROBLEMS, "running.efs")
    _, text, _ = run(capsys, "solve", path, "--trace", "--no-time")
    _, sx, _ = run(capsys, "solve", path, "--trace", "--no-time", "--sexp")
    (report,) = parse_all(sx)
    fields = {item.items[0].text: item for item in report.items[1:]}
    assert fields["verdict"].items[1].text in text
    assert f"iterations: {fields['iterations'].items[1].text}" in text
    for binding in fields["witness"].items[1:]:
        assert f"{binding.items[0].text} = {binding.items[1].text}" in text
    cexs = fields["counterexamples"].items[1:]
    assert f"counterexamples: {len(cexs)}" in text


def test_output_is_deterministic(capsys):
    path = os.path.join(PROBLEMS, "linear-sy.efs")
    first = run(capsys, "solve", path, "--trace", "--sexp", "--no-time")[1]
    second = run(capsys, "solve", path, "--trace", "--sexp", "--no-time")[1]
    assert first == second
    timed = run(capsys, "solve", path, "--trace", "--sexp")[1]
    assert re.sub(r" \(time [0-9.]+\)", "", timed) == first


def test_fmt_is_idempotent(capsys, tmp_path):
    code, out, _ = run(capsys, "fmt", os.path.join(PROBLEMS, "running.efs"))
    assert code == 0
    f = tmp_path / "again.efs"
    f.write_text(out)
    assert run(capsys, "fmt", str(f))[1] == out


def test_preset_file_runs_oracle(capsys):
    code, out, _ = run(capsys, "solve", os.path.join(PROBLEMS, "preset-cruise-control.efs"))
    assert code == 0 and "check oracle: pass" in out and "decoded:" in out


def test_preset_step_flag(capsys, tmp_path):
    f = tmp_path / "bv.efs"
    f.write_text("(preset lyapunov-bv)\n")
    code, out, _ = run(capsys, "solve", str(f), "--step", "1/16")
    assert code == 0 and "strategy: fixed-fixed" in out


def test_external_backend_flag(capsys, tmp_path):
    script = tmp_path / "always_unsat.py"
    script.write_text(textwrap.dedent("""\
        import sys
        sys.stdin.read()
        print("unsat")
    """))
    script.chmod(script.stat().st_mode | stat.S_IEXEC)
    code, out, _ = run(
        capsys, "solve", os.path.join(PROBLEMS, "running.efs"), "--backend", f"external:{sys.executable} {script}"
    )
    # an E-solver that always answers unsat makes every problem invalid
    assert code == 1 and "verdict: invalid" in out


def test_bench_writes_tsv_and_png(tmp_path, capsys):
    code = main(["bench", "--suite", "quick", "--out", str(tmp_path)])
    capsys.readouterr()
    assert code == 0
    rows = (tmp_path / "bench.tsv").read_text().splitlines()
    assert rows[0].split("\t")[:3] == ["problem", "verdict", "expected"]
    assert len(rows) >= 10
    png = (tmp_path / "bench.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


@pytest.mark.parametrize("flag", ["--extrapolate=off", "--verify=off", "--depth=4", "--seed=3"])
def test_flags_are_accepted(capsys, flag):
    code, _, _ = run(capsys, "solve", os.path.join(PROBLEMS, "extrapolate.efs"), flag, "--max-iters", "20")
    assert code in (0, 2)
