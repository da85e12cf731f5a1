"""Reference recurrences, Lagrangians and condition systems.

Text here is in the parse grammar.  Used to generate the shipped corpus and
by the acceptance tests.
"""

from __future__ import annotations

import random

import sympy as sp

from . import expr as E
from .grammar import render
from .variational import euler_raw

# --------------------------------------------------------------------------
# fourth-order discrete Painleve II (autonomous)

DPII2_EQUATION = (
    "x[n+2]*(1 - x[n+1]^2) + x[n-2]*(1 - x[n-1]^2)"
    " = (x[n+1] + x[n-1])*(x[n]*(x[n+1] + x[n-1]) + C) - (A*x[n] + B)/(1 - x[n]^2)"
)
DPII2_LAGRANGIAN = (
    "(x[n+1]^2 - 1)*x[n]*x[n+2] + x[n+1]*x[n]*(x[n+1]*x[n] + 2*C)/2"
    " + ((A + B)*log(x[n+1] - 1) + (A - B)*log(x[n+1] + 1))/2"
)
DPII2_CONDITIONS = (
    "l_d{-2,-2}",
    "l_d{-2,-1} - 2*x[n-1]/(x[n-1]^2 - 1)*l_d{-2}",
)

# --------------------------------------------------------------------------
# Q.iii: no Lagrangian

QIII_EQUATION = (
    "(x[n-2]*x[n-1]^2 - x[n+1]^2*x[n+2] - C*x[n-1] + C*x[n+1])*x[n]"
    " + (C/2*x[n-2] + B)*x[n-1] - (C/2*x[n+2] + B)*x[n+1]"
    " = (alpha/beta)*x[n]*(x[n+1] - x[n-1])"
)
QIII_CONDITION = (
    "((4*x[n]*x[n-2]*x[n-1] - 2*C*x[n] + C*x[n-2] + 2*B)*beta + 2*alpha*x[n])*l_d{-2,-2}"
    " - (x[n-1]*(2*x[n]*x[n-1] + C)*l_d{-2,-1} - l_d{-2}*(4*x[n]*x[n-1] + C))*beta"
)

# --------------------------------------------------------------------------
# fourth-order discrete Painleve I (non-autonomous)

DPI2_EQUATION = (
    "x[n]*(x[n+1]*x[n+2] + x[n-1]*x[n-2]) + x[n]*x[n-1]*x[n+1]"
    " + 2*x[n]^2*(x[n+1] + x[n-1]) + x[n]*(x[n+1]^2 + x[n]^2 + x[n-1]^2)"
    " + c3*x[n]*(x[n-1] + x[n] + x[n+1]) + c2*x[n] = c1 + c0*(-1)^n - n"
)
DPI2_LAGRANGIAN = (
    "x[n]*x[n+1]*x[n+2] + x[n+2]*x[n+1]*(c3 + x[n+2] + x[n+1]) + x[n+2]^3/3"
    " + c3*x[n+2]^2/2 + c2*x[n+2] + (n + 2 - c0*(-1)^n - c1)*log(x[n+2])"
)

# --------------------------------------------------------------------------
# (p, q)-reductions of lattice equations: laws, Lagrangians, EL expressions


def X_(i: int) -> str:
    return render(E.X(i))


def _sums(p, q):
    S = f"({X_(p)} + {X_(-p)} - {X_(q)} - {X_(-q)})"
    Sp = f"({X_(p)} + {X_(-p)} + {X_(q)} + {X_(-q)})"
    return S, Sp


FAMILIES = ("kdv", "pluskdv", "lv", "asdl")


def family_law(name: str, p: int, q: int) -> str:
    """``F`` in ``x[n+p+q] = F``."""
    k = p + q
    S, Sp = _sums(p, q)
    return {
        "kdv": f"x[n] - 1/({S} + 1/({X_(-k)} - x[n]))",
        "pluskdv": f"1/({Sp} - 1/({X_(-k)} + x[n])) - x[n]",
        "lv": f"x[n] - log(exp(-{S})*(1 + exp({X_(-k)} - x[n])) - 1)",
        "asdl": f"-x[n] + log(exp(-{Sp})/(1 + exp({X_(-k)} + x[n])) - 1)",
    }[name]


def family_lagrangian(name: str, p: int, q: int) -> str:
    k = p + q
    return {
        "kdv": f"x[n]*{X_(p)} - x[n]*{X_(q)} - log(x[n] - {X_(k)})",
        "pluskdv": f"x[n]*{X_(p)} + x[n]*{X_(q)} - log(x[n] + {X_(k)})",
        "lv": f"x[n]*{X_(p)} - x[n]*{X_(q)} + F_AS(x[n] - {X_(k)})",
        "asdl": f"x[n]*{X_(p)} + x[n]*{X_(q)} + F_AS(x[n] + {X_(k)})",
    }[name]


def family_el(name: str, p: int, q: int) -> str:
    """The Euler-Lagrange expression of :func:`family_lagrangian`."""
    k = p + q
    S, Sp = _sums(p, q)
    return {
        "kdv": f"{S} - 1/(x[n] - {X_(k)}) + 1/({X_(-k)} - x[n])",
        "pluskdv": f"{Sp} - 1/(x[n] + {X_(k)}) - 1/({X_(-k)} + x[n])",
        "lv": f"{S} + log((1 + exp(x[n] - {X_(k)}))/(1 + exp({X_(-k)} - x[n])))",
        "asdl": f"{Sp} + log((1 + exp(x[n] + {X_(k)}))*(1 + exp({X_(-k)} + x[n])))",
    }[name]


def family_conditions(name: str, p: int, q: int, sparse: bool = False) -> list[str]:
    """Forward condition system (prefactors dropped).

    With ``sparse`` the density is restricted to offsets 0, p, q, p+q, so the
    cross rows ``l_d{-k,-m}`` for m not in (p, q) are vacuous and omitted.
    """
    k = p + q
    K = -k
    lkk, lk = f"l_d{{{K},{K}}}", f"l_d{{{K}}}"
    lp, lq = f"l_d{{{K},{-p}}}", f"l_d{{{K},{-q}}}"
    cross = [] if sparse else [f"l_d{{{K},{-m}}}" for m in range(1, k) if m not in (p, q)]
    d = f"(x[n] - {X_(K)})"
    s = f"(x[n] + {X_(K)})"
    e1 = f"exp(x[n] - {X_(K)})"
    e2 = f"exp(x[n] + {X_(K)})"
    rows = {
        "kdv": [f"{d}^2*{lkk} + {lp} - 2*{d}*{lk}", f"{d}^2*{lkk} - {lq} - 2*{d}*{lk}"],
        "pluskdv": [f"{s}^2*{lkk} - {lp} + 2*{s}*{lk}", f"{s}^2*{lkk} - {lq} + 2*{s}*{lk}"],
        "lv": [f"(1 + {e1})*{lkk} + {lp} - {e1}*{lk}", f"(1 + {e1})*{lkk} - {lq} - {e1}*{lk}"],
        "asdl": [f"(1 + {e2})*{lkk} - {e2}*{lp} - {lk}", f"(1 + {e2})*{lkk} - {e2}*{lq} - {lk}"],
    }[name]
    return cross + rows


def family_reference(name: str, p: int, q: int) -> str:
    """Lagrangian the inverse construction is compared with.

    For KdV this is the density with ``K = -1`` normalization (the sign
    flip of the printed form makes it reduce to the Lagrangian above).
    """
    return family_lagrangian(name, p, q)


# --------------------------------------------------------------------------
# corpus entries


def _problem(k, body: dict, header: dict | None = None, comment: str = "") -> str:
    lines = [f"# {comment}"] if comment else []
    lines.append(f"k={k}")
    for key, val in (header or {}).items():
        lines.append(f"{key}={val}")
    for key, val in body.items():
        lines.append(f"{key}: {val}")
    return "\n".join(lines) + "\n"


def _expect(outcome=None, checks=("invert",), equivalent=None, el=None, conditions=()) -> str:
    lines = [f"checks={','.join(checks)}"]
    if outcome:
        lines.append(f"outcome={outcome}")
    if equivalent:
        lines.append(f"equivalent: {equivalent}")
    if el:
        lines.append(f"el: {el}")
    for c in conditions:
        lines.append(f"condition: {c}")
    return "\n".join(lines) + "\n"


def fixed_entries() -> list[tuple[str, str, str]]:
    return [
        (
            "dpii2",
            _problem(2, {"equation": DPII2_EQUATION, "lagrangian": DPII2_LAGRANGIAN},
                     {"params": "A, B, C", "autonomous": "true"},
                     "autonomous fourth-order dPII"),
            _expect("Lagrangian", ("conditions", "el", "invert"), DPII2_LAGRANGIAN,
                    conditions=DPII2_CONDITIONS),
        ),
        (
            "dpii2_degree0",
            _problem(2, {"equation": DPII2_EQUATION},
                     {"params": "A, B, C", "degree": "0"},
                     "ansatz too small by construction"),
            _expect("Inconclusive"),
        ),
        (
            "qiii",
            _problem(2, {"equation": QIII_EQUATION},
                     {"params": "alpha, beta, B, C", "autonomous": "true"},
                     "no Lagrangian exists"),
            _expect("NonExistence", ("conditions", "invert"), conditions=(QIII_CONDITION,)),
        ),
        (
            "dpi2",
            _problem(2, {"equation": DPI2_EQUATION, "lagrangian": DPI2_LAGRANGIAN},
                     {"params": "c0, c1, c2, c3", "autonomous": "false"},
                     "non-autonomous fourth-order dPI"),
            _expect("Lagrangian", ("el", "invert"), DPI2_LAGRANGIAN),
        ),
        (
            "linear_flip",
            _problem(2, {"forward": "x[n+2] = -x[n-2]", "lagrangian": "x[n+2]*x[n]"},
                     {"degree": "1"}, "x[n+2] + x[n-2] = 0"),
            _expect("Lagrangian", ("el", "invert"), "x[n+2]*x[n]", el="x[n+2] + x[n-2]"),
        ),
    ]


def family_entries(pairs=((1, 2), (2, 3))) -> list[tuple[str, str, str]]:
    out = []
    for p, q in pairs:
        k = p + q
        for name in FAMILIES:
            header = {"sparsity": f"0, {p}, {q}, {k}", "degree": "2"}
            prob = _problem(
                k,
                {"forward": family_law(name, p, q), "lagrangian": family_lagrangian(name, p, q)},
                header,
                f"{name} reduction, p={p}, q={q}",
            )
            exp = _expect(
                "Lagrangian",
                ("conditions", "el", "invert"),
                family_reference(name, p, q),
                el=family_el(name, p, q),
                conditions=family_conditions(name, p, q, sparse=True),
            )
            out.append((f"{name}_{p}_{q}", prob, exp))
    return out


# --------------------------------------------------------------------------
# synthetic round trips


def random_quadratic_lagrangian(rng: random.Random, k: int = 2, coeff: int = 3) -> sp.Expr:
    """Random normal quadratic density on offsets 0..k (nonzero x[n+k]*x[n])."""
    xs = [E.X(i) for i in range(k + 1)]
    monos = [a * b for i, a in enumerate(xs) for b in xs[i:]] + xs
    L = sp.Integer(rng.choice([c for c in range(-coeff, coeff + 1) if c])) * xs[k] * xs[0]
    for m in monos:
        if m == xs[k] * xs[0]:
            continue
        L += rng.randint(-coeff, coeff) * m
    return L


def el_law(L: sp.Expr, k: int) -> sp.Expr:
    """``F`` with ``x[n+k] = F`` solving ``EL(L) = 0`` (EL affine in x[n+k])."""
    el = sp.expand(euler_raw(L))
    top = E.X(k)
    a = sp.diff(el, top)
    b = el.subs(top, 0)
    return E.canonicalize(-b / a)


def synthetic_entries(rng: random.Random, count: int) -> list[tuple[str, str, str]]:
    out = []
    for i in range(count):
        L = random_quadratic_lagrangian(rng)
        F = el_law(L, 2)
        prob = _problem(2, {"forward": render(F), "lagrangian": render(L)},
                        {"total_degree": "2"}, "EL-derived from a random quadratic density")
        out.append((f"synthetic_{i}", prob, _expect("Lagrangian", ("el", "invert"), render(L))))
    return out
