import json
import os
from pathlib import Path

import pytest
from click.testing import CliRunner

from dlagrange import corpus_data as C
from dlagrange.cli import cli, main

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
GOLDEN = Path(__file__).parent / "golden"


def run(*args):
    return CliRunner().invoke(cli, [str(a) for a in args])


def check_golden(name, text):
    path = GOLDEN / name
    if os.environ.get("UPDATE_GOLDEN"):
        path.write_text(text)
    assert text == path.read_text()


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p

    return _write


# el


def test_el_verified(write):
    p = write("a.problem", "k=2\nforward: -x[n-2]\nlagrangian: x[n+2]*x[n]\n")
    res = run("el", p)
    assert res.exit_code == 0
    assert res.output == "el: x[n+2] + x[n-2]\nresidual: 0\nverdict: verified\n"


def test_el_failed(write):
    p = write("b.problem", "k=2\nforward: x[n-2]\nlagrangian: x[n+2]*x[n]\n")
    res = run("el", p)
    assert res.exit_code == 1
    assert "residual: 2*x[n-2]" in res.output and "verdict: failed" in res.output


def test_el_dpii2_golden():
    res = run("el", CORPUS / "dpii2.problem")
    assert res.exit_code == 0
    check_golden("el_dpii2.txt", res.output)


def test_el_without_law(write):
    p = write("c.problem", "k=2\nlagrangian: x[n+2]*x[n]\n")
    res = run("el", p)
    assert res.exit_code == 0 and res.output == "el: x[n+2] + x[n-2]\n"


def test_el_missing_lagrangian(write):
    p = write("d.problem", "k=2\nforward: -x[n-2]\n")
    assert main(["el", str(p)]) == 1


# conditions


@pytest.mark.parametrize("entry", ["kdv_1_2", "pluskdv_1_2", "lv_1_2", "asdl_1_2", "dpii2", "qiii"])
def test_conditions_golden(entry):
    res = run("conditions", CORPUS / f"{entry}.problem")
    assert res.exit_code == 0
    check_golden(f"conditions_{entry}.txt", res.output)


def test_conditions_k1_rejected(write, capsys):
    p = write("k1.problem", "k=1\nforward: -x[n-1]\n")
    assert main(["conditions", str(p)]) == 1
    assert "k = 1 is not supported" in capsys.readouterr().err


def test_conditions_backward_and_report(write, tmp_path):
    p = write("flip.problem", "k=2\nforward: -x[n-2]\n")
    rep = tmp_path / "r.json"
    res = run("conditions", p, "--direction", "bwd", "--report", rep)
    assert res.exit_code == 0 and "direction=bwd" in res.output
    assert json.loads(rep.read_text())["direction"] == "bwd"


# invert


def test_invert_linear_with_report(write, tmp_path):
    p = write("flip.problem", "k=2\nforward: -x[n-2]\n")
    rep = tmp_path / "r.json"
    res = run("invert", p, "--degree", "1", "--report", rep)
    assert res.exit_code == 0
    assert "density: x[n+2]*x[n]" in res.output
    data = json.loads(rep.read_text())
    assert data["outcome"] == "Lagrangian" and data["exit"] == 0 and data["density"] == "x[n+2]*x[n]"


def test_invert_qiii_exit_2(tmp_path):
    rep = tmp_path / "q.json"
    res = run("invert", CORPUS / "qiii.problem", "--report", rep)
    assert res.exit_code == 2
    assert "outcome: NonExistence" in res.output and "target: l_d{-2} = 0" in res.output
    assert json.loads(rep.read_text())["certificate"]["target"] == "l_d{-2}"


def test_invert_degree_zero_exit_3():
    res = run("invert", CORPUS / "dpii2.problem", "--degree", "0")
    assert res.exit_code == 3 and "outcome: Inconclusive" in res.output


def test_invert_output_is_deterministic():
    a = run("invert", CORPUS / "qiii.problem").output
    b = run("invert", CORPUS / "qiii.problem").output
    assert a == b


def test_usage_errors_map_to_1(write):
    assert main(["no-such-command"]) == 1
    p = write("flip.problem", "k=2\nforward: -x[n-2]\n")
    assert main(["invert", str(p), "--direction", "sideways"]) == 1


def test_parse_error_maps_to_1(write, capsys):
    p = write("bad.problem", "k=2\nforward: x[n+\n")
    assert main(["invert", str(p)]) == 1
    assert "offset" in capsys.readouterr().err


# corpus


def _mini_corpus(d):
    d.mkdir()
    (d / "flip.problem").write_text("k=2\nforward: -x[n-2]\nlagrangian: x[n+2]*x[n]\ndegree=1\n")
    (d / "flip.expect").write_text("checks=el,invert\noutcome=Lagrangian\nequivalent: x[n+2]*x[n]\n")
    return d


def test_corpus_empty(tmp_path):
    res = run("corpus", tmp_path)
    assert res.exit_code == 0
    assert res.output == "total: 0  passed: 0  failed: 0\n"


def test_corpus_corrupted_entry_isolated(tmp_path):
    d = _mini_corpus(tmp_path / "c")
    (d / "broken.problem").write_text("k=2\nforward: x[n+\n")
    (d / "broken.expect").write_text("checks=invert\noutcome=Lagrangian\n")
    res = run("corpus", d)
    assert res.exit_code == 1
    lines = res.output.splitlines()
    assert lines[0].startswith("FAIL  broken") and "ParseError" in lines[0]
    assert lines[1].startswith("PASS  flip")
    assert lines[-1] == "total: 2  passed: 1  failed: 1"


def test_corpus_missing_sidecar(tmp_path):
    d = _mini_corpus(tmp_path / "c")
    (d / "lonely.problem").write_text("k=2\nforward: -x[n-2]\n")
    res = run("corpus", d)
    assert res.exit_code == 1 and "FAIL  lonely" in res.output


def test_corpus_parallel_matches_serial(tmp_path):
    d = _mini_corpus(tmp_path / "c")
    (d / "flip2.problem").write_text((d / "flip.problem").read_text())
    (d / "flip2.expect").write_text((d / "flip.expect").read_text())
    assert run("corpus", d).output == run("corpus", d, "--jobs", "2").output


def test_corpus_report(tmp_path):
    d = _mini_corpus(tmp_path / "c")
    rep = tmp_path / "r.json"
    run("corpus", d, "--report", rep)
    assert json.loads(rep.read_text())["entries"] == [{"name": "flip", "pass": True, "detail": "el ok, scale 1, invert Lagrangian"}]


def test_corpus_unreadable(tmp_path):
    assert main(["corpus", str(tmp_path / "missing")]) == 1


def test_shipped_corpus_files_are_current():
    # the shipped files are generated; they must match the generator
    import random

    entries = C.fixed_entries() + C.family_entries() + C.synthetic_entries(random.Random(2024), 3)
    for name, prob, exp in entries:
        assert (CORPUS / f"{name}.problem").read_text() == prob
        assert (CORPUS / f"{name}.expect").read_text() == exp
