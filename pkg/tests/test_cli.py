"""Command-line behavior: outputs, exit codes, JSON stability."""

import json
import subprocess
import sys

import pytest

from destcalc.prelude import prelude_path

CONS = prelude_path("demos/cons_example.ld")
SCOPE2 = prelude_path("scope_escape2.ld")


def cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "destcalc.cli", *args], capture_output=True, text=True
    )


def test_check_prints_main_type():
    r = cli("check", CONS)
    assert r.returncode == 0 and r.stdout == "List 1\n"


def test_trace_final_line():
    r = cli("trace", "--from-prime-primitive", CONS)
    assert r.returncode == 0
    lines = r.stdout.strip().splitlines()
    assert lines[-1] == "Inr ((), Inl ())"
    assert lines[0].startswith("step 1  ")


def test_run_with_verify():
    r = cli("run", CONS, "--verify")
    assert r.returncode == 0, r.stderr
    assert r.stdout.strip() == "Inr ((), Inl ())"


def test_type_error_exit_code():
    r = cli("run", SCOPE2)
    assert r.returncode == 1
    assert "AgeEscape" in r.stderr


def test_parse_error_exit_code(tmp_path):
    f = tmp_path / "bad.ld"
    f.write_text("def x : 1 = ((")
    r = cli("check", str(f))
    assert r.returncode == 2


def test_fuel_exhaustion_exit_code(tmp_path):
    f = tmp_path / "loop.ld"
    f.write_text("def loop : Nat = fix x : Nat -> x\nmain = loop")
    r = cli("run", str(f), "--fuel", "50")
    assert r.returncode == 4


def test_json_schema_and_determinism(tmp_path):
    r1 = cli("trace", CONS, "--json", "--verify")
    r2 = cli("trace", CONS, "--json", "--verify")
    assert r1.returncode == 0
    assert r1.stdout == r2.stdout  # byte-identical reruns
    assert r1.stdout.endswith("\n")
    doc = json.loads(r1.stdout)
    assert set(doc) == {"program", "type", "steps", "final", "verdicts"}
    assert doc["type"] == "List 1"
    assert doc["final"] == "Inr ((), Inl ())"
    assert doc["steps"][0]["i"] == 1 and "rule" in doc["steps"][0]
    assert all(doc["verdicts"].values())


def test_run_decodes_known_types(tmp_path):
    f = tmp_path / "n.ld"
    f.write_text("def six : Nat = succ 5\nmain = six")
    r = cli("run", str(f))
    assert r.stdout.strip() == "6"
    f2 = tmp_path / "l.ld"
    f2.write_text("def xs : List Nat = consN 1 (consN 2 nilN)\nmain = xs")
    r = cli("run", str(f2))
    assert r.stdout.strip() == "[1, 2]"
    f3 = tmp_path / "b.ld"
    f3.write_text("def t : Bool = true\nmain = t")
    r = cli("run", str(f3))
    assert r.stdout.strip() == "true"


def test_desugar_prints_core(tmp_path):
    f = tmp_path / "d.ld"
    f.write_text("def u : 1 = ()\nmain = u")
    r = cli("desugar", str(f))
    assert r.returncode == 0
    assert "new*" in r.stdout and "upd" in r.stdout


def test_verify_does_not_change_result():
    plain = cli("run", CONS)
    verified = cli("run", CONS, "--verify")
    assert plain.stdout == verified.stdout
    assert plain.returncode == verified.returncode == 0
