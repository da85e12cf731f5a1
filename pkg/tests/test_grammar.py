import pytest
import sympy as sp

from dlagrange.expr import ALT, F_AS, N, X
from dlagrange.grammar import ParseError, parse, render, tokenize


def test_product_of_stencil_variables():
    assert parse("x[n+1]*x[n]") == X(1) * X(0)


def test_alternating_atom_and_index():
    e = parse("c0*(-1)^n - n")
    assert e == sp.Symbol("c0") * ALT - N


def test_shifted_alternating_atom():
    assert parse("(-1)^(n+1)") == -ALT


def test_defined_function_application():
    e = parse("F_AS(x[n] - x[n+3])")
    assert isinstance(e, F_AS)


@pytest.mark.parametrize(
    "text, pos",
    [
        ("x[n+", 3),
        ("x[n+1/2]", 5),
        ("1 +", 3),
        ("(x[n]", 5),
    ],
)
def test_syntax_errors_report_offset(text, pos):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.pos == pos


def test_unknown_function():
    with pytest.raises(ParseError, match="unknown function 'foo'"):
        parse("foo(x[n])")


def test_jet_symbols_round_trip():
    e = parse("l_d{-2,-1} - 2*x[n-1]*l_d{-2}")
    assert parse(render(e)) == e


@pytest.mark.parametrize(
    "text",
    [
        "x[n+2]*(1 - x[n+1]^2) + x[n-2]",
        "(n + 2 - c0*(-1)^n - c1)*log(x[n+2])",
        "x[n] - log(exp(-x[n+1])*(1 + exp(x[n-3] - x[n])) - 1)",
        "1/(x[n] - x[n-3])^2 + F_AS(x[n] + x[n+3])/3",
        "-x[n]",
    ],
)
def test_parse_render_fixpoint(text):
    e = parse(text)
    assert parse(render(e)) == e
    assert render(parse(render(e))) == render(e)


def test_render_is_deterministic_and_sorted():
    assert render(parse("x[n] + x[n+1]")) == render(parse("x[n+1] + x[n]"))


def test_tokenize_positions():
    toks = tokenize("x[n+1] + c")
    assert [t.pos for t in toks][:2] == [0, 7]
