import pathlib
import subprocess
import sys

import pytest

from dbcat.cli import main, run
from dbcat.dsl import parse_workspace, parse_workspace_text, serialize_workspace

DATA = pathlib.Path(__file__).parent / "data"
FILES = sorted(DATA.glob("*.dbc"))


def ws(*names):
    return parse_workspace([DATA / n for n in names])


def test_eval_command():
    report = run("eval", ["A0", "q(X) :- r(X,Y)"], ws("demo.dbc"), 2, 4, 100000)
    assert report.status == 0
    ((cid, verdict, detail),) = report.lines
    assert verdict == "PASS" and detail == "{(1) (2)}"


def test_eval_cross_component_fails():
    report = run(
        "eval", ["S0", "j(X,Y) :- p(X), q(Y)"], ws("federation.dbc"), 2, 4, 100000
    )
    assert report.status == 1
    assert "separated" in report.lines[0][2]


def test_eval_federated_succeeds():
    report = run(
        "eval", ["F0", "j(X,Y) :- p(X), q(Y)"], ws("federation.dbc"), 2, 4, 100000
    )
    assert report.status == 0
    assert report.lines[0][2] == "{(1,2)}"


def test_iso_command():
    report = run("iso", ["A0", "A0"], ws("demo.dbc"), 2, 4, 100000)
    assert report.status == 0
    report2 = run("iso", ["A0", "B0"], ws("demo.dbc"), 2, 4, 100000)
    assert report2.status == 1


def test_powerview_command_deterministic():
    w = ws("demo.dbc")
    r1 = run("powerview", ["B0"], w, 2, 2, 100000).render("lines")
    r2 = run("powerview", ["B0"], w, 2, 2, 100000).render("lines")
    assert r1 == r2
    assert "PASS" in r1


def test_flux_and_compose_commands():
    report = run("flux", ["M", "A0", "B0"], ws("demo.dbc"), None, 2, 100000)
    assert report.status == 0
    report2 = run("compose", ["M", "N", "A0", "B0", "D0"], ws("demo.dbc"), None, 2, 100000)
    assert report2.status == 0
    assert any("kind" in cid and detail == "c-arrow" for cid, _, detail in report2.lines)


def test_check_model_and_functor_commands():
    w = ws("system.dbc")
    model = run("check-model", ["G"], w, None, 2, 100000)
    assert model.status == 0
    functor = run("check-functor", ["G"], w, None, 2, 100000)
    assert functor.status == 0
    gamma = run("gamma-iso", ["G"], w, None, 2, 100000)
    assert gamma.status == 0


def test_laws_and_duality_commands():
    w = ws("demo.dbc")
    laws = run("laws", [], w, None, 2, 100000)
    assert laws.status == 0
    duality = run("duality", ["A0", "B0"], w, None, 2, 100000)
    assert duality.status == 0


def test_report_lines_format():
    report = run("iso", ["A0", "A0"], ws("demo.dbc"), 2, 4, 100000)
    line = report.render("lines")
    cid, verdict, detail = line.split("\t")
    assert verdict == "PASS"


def test_main_exit_codes(tmp_path, capsys):
    demo = str(DATA / "demo.dbc")
    assert main(["iso", "A0", "A0", "-i", demo]) == 0
    capsys.readouterr()
    assert main(["iso", "A0", "B0", "-i", demo]) == 1
    capsys.readouterr()
    assert main(["eval", "A0", "q(X) :- r(X,Y)", "-i", "/nonexistent.dbc"]) == 2
    capsys.readouterr()
    bad = tmp_path / "bad.dbc"
    bad.write_text("schema { }")
    assert main(["iso", "A0", "A0", "-i", str(bad)]) == 2
    capsys.readouterr()
    assert main(["no-such-command", "-i", demo]) == 2
    capsys.readouterr()


def test_exhausted_view_budget_is_a_usage_error(capsys):
    demo = str(DATA / "demo.dbc")
    assert main(["powerview", "A0", "-i", demo, "--depth", "-1", "--arity", "4", "--cap", "50"]) == 2
    assert "cap" in capsys.readouterr().err


def test_console_script_runs():
    demo = str(DATA / "demo.dbc")
    proc = subprocess.run(
        [sys.executable, "-m", "dbcat.cli", "iso", "A0", "A0", "-i", demo, "--format", "lines"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "PASS" in proc.stdout


def test_byte_identical_reports_across_runs():
    for command, args in [
        ("powerview", ["A0"]),
        ("laws", []),
        ("duality", ["A0", "B0"]),
    ]:
        outs = set()
        for _ in range(2):
            w = ws("demo.dbc")  # fresh parse each time
            outs.add(run(command, args, w, 2, 2, 100000).render("lines"))
        assert len(outs) == 1


def test_workspace_round_trip_on_data_files():
    for path in FILES:
        w1 = parse_workspace([path])
        text = serialize_workspace(w1)
        w2 = parse_workspace_text(text)
        assert w1 == w2, path
        assert serialize_workspace(w2) == text, path
