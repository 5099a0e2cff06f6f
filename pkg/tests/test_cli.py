import json
import sys

import pytest

from ldgv.cli import main

from corpus import LISTINGS, NEGATIVE, corpus

COMPUTE = str(LISTINGS / "compute.ldgv")
LSST = str(LISTINGS / "compute.lsst")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_listing(capsys):
    code, out, _ = run(capsys, "check", COMPUTE)
    assert code == 0 and "all definitions check" in out


def test_check_lsst(capsys):
    assert run(capsys, "check", LSST)[0] == 0


def test_run_prints_result(capsys):
    code, out, _ = run(capsys, "run", COMPUTE)
    assert code == 0 and out.splitlines()[0] == "main = -5"


def test_run_entry_and_trace(capsys):
    code, out, _ = run(capsys, "run", COMPUTE, "--entry", "addMain", "--trace", "--typed-replay")
    assert code == 0
    assert "Rl-Com" in out and "addMain = 7" in out


def test_sub_verdict(capsys):
    code, out, _ = run(capsys, "sub", "--left", "{Neg}", "--right", "{Neg,Add}")
    assert code == 0 and out.strip() == "subtype at un"
    code, out, _ = run(capsys, "sub", "--left", "{Neg,Add}", "--right", "{Neg}")
    assert code == 1 and out.startswith("not a subtype")


def test_dual_with_aliases(capsys):
    code, out, _ = run(capsys, "dual", COMPUTE, "--type", "TServer")
    assert code == 0 and out.startswith("!(l:{Add, Neg})")


def test_dual_of_general_type(capsys):
    code, _, err = run(capsys, "dual", "--type", "Int")
    assert code == 1 and "not a session type" in err


def test_translate_to_file(tmp_path, capsys):
    target = tmp_path / "out.ldgv"
    assert run(capsys, "translate", LSST, "-o", str(target))[0] == 0
    assert run(capsys, "check", str(target))[0] == 0


def test_simulate(capsys):
    code, out, _ = run(capsys, "simulate", LSST)
    assert code == 0 and "simulation ok" in out and "lsst main = -5" in out


def test_failed_check_exit_code(tmp_path, capsys):
    f = tmp_path / "bad.ldgv"
    f.write_text(NEGATIVE[0].source)
    code, out, _ = run(capsys, "check", str(f))
    assert code == 1 and "LinearityViolation" in out


def test_parse_error_exit_code(tmp_path, capsys):
    f = tmp_path / "bad.ldgv"
    f.write_text("val main = let x = in 1")
    code, _, err = run(capsys, "check", str(f))
    assert code == 1 and "1:20" in err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["check"],
        ["check", "/nonexistent/file.ldgv"],
        ["check", COMPUTE, "--fuel", "0"],
        ["run", COMPUTE, "--format", "yaml"],
    ],
)
def test_usage_errors(argv, capsys):
    assert run(capsys, *argv)[0] == 2


def test_fuel_flag_wins_over_environment(monkeypatch, capsys):
    monkeypatch.setenv("LDST_FUEL", "1")
    # a single unrolling is not enough for the summing server
    assert run(capsys, "check", str(LISTINGS / "sum.ldgv"))[0] in (0, 1)
    assert run(capsys, "check", str(LISTINGS / "sum.ldgv"), "--fuel", "64")[0] == 0


def test_structured_output_for_corpus(tmp_path, capsys):
    for i, sample in enumerate(corpus()):
        f = tmp_path / f"p{i}.ldgv"
        f.write_text(sample.source)
        code, out, _ = run(capsys, "check", str(f), "--format", "structured")
        data = json.loads(out)
        assert code == (0 if data["ok"] else 1)
        code, out, _ = run(capsys, "run", str(f), "--entry", sample.entry, "--format", "structured")
        data = json.loads(out)
        assert data["outcome"] in ("AllFinished", "Deadlocked")
        assert code == (0 if data["outcome"] == "AllFinished" else 1)
    for i, bad in enumerate(NEGATIVE):
        f = tmp_path / f"n{i}.ldgv"
        f.write_text(bad.source)
        code, out, _ = run(capsys, "check", str(f), "--format", "structured")
        data = json.loads(out)
        assert code == 1 and not data["ok"]
        assert any(d.get("code") == bad.code for d in data["definitions"])


def test_module_entry_point(tmp_path):
    import subprocess

    r = subprocess.run([sys.executable, "-m", "ldgv", "run", COMPUTE], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("main = -5")
