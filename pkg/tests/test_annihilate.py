import random

import pytest
import sympy as sp

from dlagrange import corpus_data as C
from dlagrange import expr as E
from dlagrange.annihilate import (
    BWD,
    FWD,
    DegenerateError,
    KOneError,
    Recurrence,
    RecurrenceError,
    RoundTripError,
    backward_annihilators,
    condition_system,
    forward_annihilators,
    make_recurrence,
    parse_conditions,
    same_row_space,
)
from dlagrange.expr import X
from dlagrange.grammar import parse, parse_raw


@pytest.fixture(scope="module")
def dpii2():
    return make_recurrence(C.DPII2_EQUATION, 2, params=("A", "B", "C"))


@pytest.fixture(scope="module")
def qiii():
    return make_recurrence(C.QIII_EQUATION, 2, params=("alpha", "beta", "B", "C"))


# recurrences


def test_dpii2_accepted_with_backward(dpii2):
    # independent oracle: sympy's solver on the raw equation
    lhs, rhs = C.DPII2_EQUATION.split("=")
    eq = parse_raw(lhs) - parse_raw(rhs)
    (fwd,) = sp.solve(eq, X(2))
    (bwd,) = sp.solve(eq, X(-2))
    assert E.is_zero(dpii2.forward - fwd)
    assert E.is_zero(dpii2.backward - bwd)
    assert dpii2.autonomous


def test_linear_flip_backward():
    r = make_recurrence("-x[n-2]", 2)
    assert r.backward == -X(2)


def test_degenerate_rejected():
    with pytest.raises(DegenerateError):
        make_recurrence("x[n+1] + x[n-1]", 2)


def test_k_one_rejected_with_explanation():
    with pytest.raises(KOneError, match="k = 1"):
        make_recurrence("x[n-1]", 1)
    with pytest.raises(KOneError):
        Recurrence(1, -X(-1))


def test_round_trip_inconsistency():
    with pytest.raises(RoundTripError):
        make_recurrence("-x[n-2]", 2, backward_text="x[n+2]")


def test_offsets_checked():
    with pytest.raises(RecurrenceError):
        make_recurrence("x[n-3] + x[n+2]", 2)


def test_nonautonomous_detected():
    r = make_recurrence(C.DPI2_EQUATION, 2, params=("c0", "c1", "c2", "c3"))
    assert not r.autonomous


# annihilators


def test_operator_count(dpii2):
    assert len(forward_annihilators(dpii2)) == 1
    r = make_recurrence(C.family_law("kdv", 2, 3), 5)
    assert [op.m for op in forward_annihilators(r)] == [1, 2, 3, 4]


def test_dpii2_forward_coefficients(dpii2):
    (op,) = forward_annihilators(dpii2)
    F = dpii2.forward
    assert op.a == E.diff(F, X(-1))
    assert E.is_zero(op.b - (1 - X(-1) ** 2) / (X(1) ** 2 - 1))


def test_kdv_operators_match_listing_up_to_scale():
    # A_p ~ d/dx[n-p] + (x[n]-x[n-3])^2 d/dx[n-3], A_q with the opposite sign
    r = make_recurrence(C.family_law("kdv", 1, 2), 3)
    ops = {op.m: op for op in forward_annihilators(r)}
    d2 = (X(0) - X(-3)) ** 2
    assert E.is_zero(ops[1].a / (-ops[1].b) - d2)
    assert E.is_zero(ops[2].a / (-ops[2].b) + d2)


def test_linear_flip_backward_operator():
    r = make_recurrence("-x[n-2]", 2)
    (op,) = backward_annihilators(r)
    assert op.a == 0 and op.b == -1


def test_dpii2_backward_annihilates(dpii2):
    (op,) = backward_annihilators(dpii2)
    assert E.is_zero(op.apply(dpii2.backward))
    # mirror of the forward coefficient
    assert E.is_zero(op.b - (1 - X(1) ** 2) / (X(-1) ** 2 - 1))


def test_qiii_backward_single_operator(qiii):
    assert qiii.backward is not None
    assert len(backward_annihilators(qiii)) == 1


def test_backward_requires_law():
    r = Recurrence(2, parse("x[n-2]^3"), None)
    with pytest.raises(RecurrenceError):
        backward_annihilators(r)


def _random_G(rng, syms):
    terms = [rng.randint(-3, 3) * a * b for a in syms for b in syms] + [sp.log(1 + syms[0] ** 2)]
    return sum(terms)


@pytest.mark.parametrize("name", ["dpii2", "kdv"])
def test_annihilators_kill_composed_functions(name):
    if name == "dpii2":
        r = make_recurrence(C.DPII2_EQUATION, 2, params=("A", "B", "C"))
    else:
        r = make_recurrence(C.family_law("kdv", 1, 2), 3)
    rng = random.Random(3)
    y = [X(i) for i in range(r.k)] + [sp.Symbol("yk")]
    G = _random_G(rng, y).xreplace({y[-1]: r.forward})
    for op in forward_annihilators(r):
        assert E.is_zero(op.apply(G))


# condition systems


def test_dpii2_conditions_golden(dpii2):
    cs = condition_system(dpii2, FWD)
    golden = [e for line in C.DPII2_CONDITIONS for e in parse_conditions(line)]
    assert same_row_space(cs.exprs(), golden)


@pytest.mark.parametrize("name", C.FAMILIES)
@pytest.mark.parametrize("pq", [(1, 2), (2, 3)])
def test_family_conditions_golden(name, pq):
    p, q = pq
    r = make_recurrence(C.family_law(name, p, q), p + q)
    golden = [e for line in C.family_conditions(name, p, q) for e in parse_conditions(line)]
    assert same_row_space(condition_system(r, FWD).exprs(), golden)
    sparse = condition_system(r, FWD, (0, p, q, p + q))
    golden = [e for line in C.family_conditions(name, p, q, sparse=True) for e in parse_conditions(line)]
    assert same_row_space(sparse.exprs(), golden)


def test_qiii_conditions_golden(qiii):
    golden = parse_conditions(C.QIII_CONDITION)
    assert same_row_space(condition_system(qiii, FWD).exprs(), golden)


def test_no_spurious_variables(dpii2, qiii):
    for r in (dpii2, qiii, make_recurrence(C.family_law("lv", 2, 3), 5)):
        for e in condition_system(r, FWD).exprs(True):
            assert all(o <= 0 for o in E.offsets(e))


def test_backward_conditions_mirror(dpii2):
    cs = condition_system(dpii2, BWD)
    assert cs.offsets == (0, 1, 2)
    for e in cs.exprs():
        assert all(o >= 0 for o in E.offsets(e))


def test_cleared_denominator_gives_same_system():
    # same recurrence written with its denominator moved across
    r1 = make_recurrence(C.family_law("kdv", 1, 2), 3)
    eq = "x[n+3]*(x[n+1] + x[n-1] - x[n+2] - x[n-2])*(x[n-3] - x[n]) + x[n+3] = " \
         "x[n]*(x[n+1] + x[n-1] - x[n+2] - x[n-2])*(x[n-3] - x[n]) + x[n] - x[n-3] + x[n]"
    r2 = make_recurrence(eq, 3)
    assert E.is_zero(r1.forward - r2.forward)
    assert same_row_space(condition_system(r1).exprs(), condition_system(r2).exprs())


def test_serialize_is_deterministic(dpii2):
    a = condition_system(dpii2).serialize()
    b = condition_system(make_recurrence(C.DPII2_EQUATION, 2, params=("A", "B", "C"))).serialize()
    assert a == b
    assert a.startswith("# conditions direction=fwd k=2\n")
