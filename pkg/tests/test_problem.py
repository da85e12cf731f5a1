import pytest

from dlagrange.annihilate import DegenerateError
from dlagrange.problem import Expectation, ProblemError, ProblemFile

DPII2 = """\
# comment lines are ignored
k=2
params=A, B, C
autonomous=true
degree=2
atoms=log(x[n] - 1); log(x[n] + 1)
equation: x[n+2]*(1 - x[n+1]^2) + x[n-2]*(1 - x[n-1]^2)
  = (x[n+1] + x[n-1])*(x[n]*(x[n+1] + x[n-1]) + C) - (A*x[n] + B)/(1 - x[n]^2)
lagrangian: (x[n+1]^2 - 1)*x[n]*x[n+2] + x[n+1]*x[n]*(x[n+1]*x[n] + 2*C)/2
  + ((A + B)*log(x[n+1] - 1) + (A - B)*log(x[n+1] + 1))/2
"""


def test_parse_full_file():
    pf = ProblemFile.parse(DPII2)
    assert pf.k == 2 and pf.params == ("A", "B", "C") and pf.autonomous
    assert "= (x[n+1]" in pf.forward
    r = pf.recurrence()
    assert r.backward is not None
    assert pf.density().k == 2
    cfg = pf.config()
    assert cfg.degree == 2 and cfg.atoms == ("log(x[n] - 1)", "log(x[n] + 1)")


def test_cli_values_override_file():
    cfg = ProblemFile.parse(DPII2).config(degree=4, seed=None)
    assert cfg.degree == 4 and cfg.seed == 0


def test_sparsity_header():
    pf = ProblemFile.parse("k=3\nsparsity=0, 1, 2, 3\nforward: -x[n-3]\n")
    assert pf.sparsity == (0, 1, 2, 3)
    assert pf.config().sparsity == (0, 1, 2, 3)


@pytest.mark.parametrize(
    "text, msg",
    [
        ("forward: -x[n-2]\n", "missing 'k='"),
        ("k=two\nforward: -x[n-2]\n", "k must be an integer"),
        ("k=2\ncolour=red\n", "unknown header"),
        ("k=2\nfoo: x[n]\n", "unknown entry"),
        ("k=2\n  x[n]\n", "continuation"),
        ("k=2\nforward: x[n]\nequation: x[n+2] = x[n]\n", "not both"),
        ("k=2\nautonomous=maybe\n", "not a boolean"),
        ("k=2\ndirection=up\n", "direction"),
        ("k=2\nforward: a\nforward: b\n", "duplicate"),
    ],
)
def test_malformed_files(text, msg):
    with pytest.raises(ProblemError, match=msg):
        ProblemFile.parse(text)


def test_autonomy_mismatch():
    pf = ProblemFile.parse("k=2\nautonomous=true\nforward: n - x[n-2]\n")
    with pytest.raises(ProblemError, match="autonomous"):
        pf.recurrence()


def test_undeclared_parameter_in_lagrangian():
    pf = ProblemFile.parse("k=2\nparams=A\nforward: -x[n-2]\nlagrangian: B*x[n+2]*x[n]\n")
    with pytest.raises(ProblemError, match="undeclared parameters in lagrangian: B"):
        pf.density()


def test_degenerate_law_propagates():
    with pytest.raises(DegenerateError):
        ProblemFile.parse("k=2\nforward: x[n+1] + x[n-1]\n").recurrence()


def test_missing_entries():
    pf = ProblemFile.parse("k=2\n")
    with pytest.raises(ProblemError, match="no 'forward:'"):
        pf.recurrence()
    with pytest.raises(ProblemError, match="no 'lagrangian:'"):
        pf.density()


def test_read_missing_file(tmp_path):
    with pytest.raises(ProblemError, match="cannot read"):
        ProblemFile.read(tmp_path / "nope.problem")


def test_expectation_parse():
    e = Expectation.parse(
        "checks=conditions, invert\noutcome=Lagrangian\nequivalent: x[n+2]*x[n]\n"
        "condition: l_d{-2,-2}\ncondition: l_d{-2,-1}\n"
    )
    assert e.checks == ("conditions", "invert")
    assert e.conditions == ("l_d{-2,-2}", "l_d{-2,-1}")
    assert e.equivalent == "x[n+2]*x[n]"


def test_expectation_needs_outcome_for_invert():
    with pytest.raises(ProblemError, match="outcome"):
        Expectation.parse("checks=invert\n")
    with pytest.raises(ProblemError, match="unknown checks"):
        Expectation.parse("checks=bake\n")
