import json
import subprocess
import sys
from pathlib import Path

import pytest

from csplab.cli import main
from csplab.csp import complete_dicut, parse_instance, save_instance

DATA = Path(__file__).resolve().parent.parent / "data"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out.splitlines(), out.err


def test_value_and_lp(capsys):
    code, lines, _ = run(capsys, "value", "--instance", str(DATA / "dicut_n4.csp"))
    assert code == 0 and lines[0].startswith("# config: ") and lines[1] == "1/3"
    assert json.loads(lines[0][len("# config: "):])["argv"][0] == "value"
    code, lines, _ = run(capsys, "lp", "--instance", str(DATA / "dicut_n4.csp"))
    assert lines[1] == "1/2"


def test_curve_rows(capsys):
    code, lines, _ = run(capsys, "curve", "--family", "2sat", "--grid", "4")
    assert code == 0 and "1,3/4" in lines and lines[1] == "c,theta"


def test_exit_codes(capsys, tmp_path):
    assert run(capsys, "nonsense")[0] == 1
    assert run(capsys, "value")[0] == 1
    assert run(capsys, "value", "--instance", str(tmp_path / "missing.csp"))[0] == 2
    bad = tmp_path / "bad.csp"
    bad.write_text("maxcsp k=2\n")
    assert run(capsys, "lp", "--instance", str(bad))[0] == 2


def test_seeds_and_jobs_rows_sorted(capsys):
    args = ["stream-approx", "--instance", str(DATA / "dicut_n3.csp"), "--Q", "10", "--c", "1/2", "--seed", "5", "--seeds", "3"]
    _, serial, _ = run(capsys, *args)
    _, para, _ = run(capsys, *args, "--jobs", "3")
    rows = [json.loads(x) for x in serial[1:]]
    assert [r["seed"] for r in rows] == [5, 6, 7]
    assert serial[1:] == para[1:]
    assert {"estimate", "decision", "passes", "queries"} <= set(rows[0])


def test_reduce_roundtrip(capsys, tmp_path):
    out = tmp_path / "r.csp"
    code, _, _ = run(capsys, "reduce", "--instance", str(DATA / "dicut_n3.csp"), "--B", "3", "--D", "2", "--out", str(out))
    assert code == 0
    inst = parse_instance(out.read_text())
    assert inst.m == 18
    assert json.loads((tmp_path / "r.csp.json").read_text())["B"] == 3


def test_round_and_dihp(capsys):
    code, lines, _ = run(capsys, "round", "--instance", str(DATA / "dicut_n4.csp"), "--seeds", "2")
    assert code == 0 and json.loads(lines[1])["expected"] == "1/4"
    code, lines, _ = run(capsys, "dihp-build", "--instance", str(DATA / "dicut_n3.csp"))
    assert json.loads(lines[1])["N"] == 2
    code, lines, _ = run(capsys, "dihp-experiment", "--instance", str(DATA / "dicut_n3.csp"), "--K", "2")
    assert lines[1].startswith("seed,case")
    assert len(lines) == 4


def test_fourier_check(capsys):
    code, lines, _ = run(capsys, "fourier-check", "--check", "orthonormal")
    assert code == 0 and json.loads(lines[1])["pass"] is True


def test_console_script_module():
    res = subprocess.run([sys.executable, "-m", "csplab.cli", "lp", "--instance", str(DATA / "dicut_n3.csp")], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.splitlines()[1] == "1/2"
