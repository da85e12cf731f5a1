"""Symbolic expression kernel.

Expressions are plain sympy objects built from a small vocabulary:

* stencil variables ``x[n+i]`` (see :func:`X`),
* the index symbol ``n`` and the alternating atom ``(-1)^n``,
* parameter symbols (any other identifier),
* jet symbols ``l_d{...}`` / ``L_d{...}`` standing for partial derivatives of an
  unknown density,
* ``log``, ``exp`` and registered one-argument defined functions.

Transcendental atoms are treated as algebraically independent symbols by the
rational normal form.  Zero testing is canonical-form first, with a random
evaluation cross-check.

Logarithms follow the ``log|.|`` convention: densities are defined up to
additive constants, so ``log(-u)`` and ``log(u)`` are identified when
comparing (constant ``i*pi`` terms are dropped, see :func:`abs_logs`).
Canonical forms themselves stay sign-exact because laws containing ``log``
get exponentiated.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable

import mpmath
import sympy as sp

Expr = sp.Expr

N = sp.Symbol("n")
ALT = sp.Symbol("(-1)^n")
SLOT = sp.Symbol("t")

_STENCIL_RE = re.compile(r"^x\[n(?:([+-])(\d+))?\]$")
_JET_RE = re.compile(r"^([lL])_d\{([-\d,]*)\}$")


class ExprError(Exception):
    """Base class for expression-kernel failures."""


class NonRationalError(ExprError):
    pass


class InconsistencyError(ExprError):
    """Canonical form is nonzero but the expression vanishes at every sample."""


class IndeterminateError(ExprError):
    """Random evaluation kept hitting poles."""


# --------------------------------------------------------------------------
# symbols


@lru_cache(maxsize=None)
def X(i: int) -> sp.Symbol:
    """The stencil variable ``x[n+i]``."""
    i = int(i)
    if i == 0:
        return sp.Symbol("x[n]")
    return sp.Symbol(f"x[n{'+' if i > 0 else '-'}{abs(i)}]")


def stencil_offset(s) -> int | None:
    if not isinstance(s, sp.Symbol):
        return None
    m = _STENCIL_RE.match(s.name)
    if not m:
        return None
    if m.group(1) is None:
        return 0
    v = int(m.group(2))
    return v if m.group(1) == "+" else -v


def is_stencil(s) -> bool:
    return stencil_offset(s) is not None


@lru_cache(maxsize=None)
def jet(offsets: tuple[int, ...], prefix: str = "l") -> sp.Symbol:
    """Formal partial derivative of the unknown density w.r.t. the given offsets."""
    offs = ",".join(str(o) for o in sorted(offsets))
    return sp.Symbol(f"{prefix}_d{{{offs}}}")


def jet_offsets(s) -> tuple[int, ...] | None:
    if not isinstance(s, sp.Symbol):
        return None
    m = _JET_RE.match(s.name)
    if not m:
        return None
    body = m.group(2)
    return tuple(int(t) for t in body.split(",")) if body else ()


def jet_prefix(s) -> str | None:
    m = _JET_RE.match(s.name) if isinstance(s, sp.Symbol) else None
    return m.group(1) if m else None


def is_jet(s) -> bool:
    return jet_offsets(s) is not None


def param(name: str) -> sp.Symbol:
    return sp.Symbol(name)


def offsets(e: Expr) -> set[int]:
    """Offsets of all stencil variables occurring in ``e`` (inside atoms too)."""
    return {o for s in sp.sympify(e).free_symbols if (o := stencil_offset(s)) is not None}


def stencil_symbols(e: Expr) -> list[sp.Symbol]:
    return sorted((s for s in sp.sympify(e).free_symbols if is_stencil(s)), key=stencil_offset)


def parameters(e: Expr) -> set[sp.Symbol]:
    return {
        s
        for s in sp.sympify(e).free_symbols
        if not is_stencil(s) and not is_jet(s) and s not in (N, ALT)
    }


def depends_on_n(e: Expr) -> bool:
    fs = sp.sympify(e).free_symbols
    return N in fs or ALT in fs


# --------------------------------------------------------------------------
# defined functions


@dataclass(frozen=True)
class DefinedFunction:
    """A one-argument function known only through its derivative.

    ``derivative`` is written in the formal slot ``t``.  ``numeric`` evaluates
    the function itself with mpmath (used by random zero testing only).
    """

    name: str
    derivative: Expr
    numeric: Callable | None = None


_REGISTRY: dict[str, tuple[DefinedFunction, type]] = {}
_FROZEN = False


def register_function(fn: DefinedFunction) -> type:
    if _FROZEN:
        raise ExprError("defined-function registry is frozen")
    if fn.name in _REGISTRY:
        return _REGISTRY[fn.name][1]
    deriv = sp.sympify(fn.derivative)

    def fdiff(self, argindex=1):
        return deriv.xreplace({SLOT: self.args[0]})

    cls = type(fn.name, (sp.Function,), {"fdiff": fdiff, "nargs": 1})
    _REGISTRY[fn.name] = (fn, cls)
    return cls


def freeze_registry() -> None:
    global _FROZEN
    _FROZEN = True


def defined_function(name: str) -> type | None:
    entry = _REGISTRY.get(name)
    return entry[1] if entry else None


def defined_functions() -> dict[str, DefinedFunction]:
    return {k: v[0] for k, v in _REGISTRY.items()}


def _fas_numeric(x):
    # int_0^x log(1+e^t) dt = -Li2(-e^x) - pi^2/12
    return -mpmath.polylog(2, -mpmath.exp(x)) - mpmath.pi**2 / 12


F_AS = register_function(
    DefinedFunction("F_AS", sp.log(1 + sp.exp(SLOT)), _fas_numeric)
)


def is_defined_application(e) -> bool:
    return isinstance(e, sp.Function) and type(e).__name__ in _REGISTRY


def transcendental_atoms(e: Expr) -> set[Expr]:
    e = sp.sympify(e)
    return {
        a
        for a in e.atoms(sp.Function)
        if isinstance(a, (sp.log, sp.exp)) or is_defined_application(a)
    }


# --------------------------------------------------------------------------
# canonical form


def _reduce_alt(e: Expr) -> Expr:
    if ALT not in e.free_symbols:
        return e
    return e.replace(
        lambda t: t.is_Pow and t.base == ALT and t.exp.is_Integer,
        lambda t: ALT if int(t.exp) % 2 else sp.Integer(1),
    )


def _canon_atoms(e: Expr) -> Expr:
    """Canonicalize the arguments of transcendental atoms, innermost first."""
    atoms = sorted(transcendental_atoms(e), key=sp.count_ops)
    if not atoms:
        return e
    repl = {}
    for a in atoms:
        arg = canonicalize(a.args[0])
        if isinstance(a, sp.log) and arg.has(sp.exp):
            repl[a] = _split_log_exp(arg)
        elif arg != a.args[0]:
            repl[a] = a.func(arg)
    if repl:
        e = e.xreplace(repl)
    if e.has(sp.log):
        e = sp.expand_log(e, force=True)
        split = {
            a: _split_log_exp(a.args[0])
            for a in e.atoms(sp.log)
            if a.args[0].has(sp.exp)
        }
        split = {a: v for a, v in split.items() if v != a}
        if split:
            e = sp.expand_log(e.xreplace(split), force=True)
        if e.has(sp.I):
            # log(-u) = log(u) + i*pi: logs are taken up to additive constants
            e = e.xreplace({sp.I: sp.Integer(0)})
    return e


def _split_log_exp(arg: Expr) -> Expr:
    """``log(arg)`` as ``u + sum m_i log(f_i)`` with exponentials factored out.

    The overall sign is folded into one sum factor, so ``exp`` of the result
    is ``arg`` exactly (no ``i*pi`` bookkeeping needed).
    """
    num, den = sp.fraction(sp.together(sp.expand(arg, power_exp=True, mul=False, multinomial=False)))
    out = sp.Integer(0)
    coeff = sp.Integer(1)
    logs = []  # (factor, multiplicity)
    for part, sgn in ((num, 1), (den, -1)):
        try:
            c, fl = sp.factor_list(part)
        except sp.PolificationFailed:
            c, fl = sp.Integer(1), [(part, 1)]
        coeff *= c**sgn
        for f, m in fl:
            f = sp.powsimp(f, combine="exp", deep=True)
            if isinstance(f, sp.exp):
                out += sgn * m * f.args[0]
            elif f.is_Pow and isinstance(f.base, sp.exp):
                out += sgn * m * f.exp * f.base.args[0]
            else:
                if f.is_Add and min(f.args, key=sp.default_sort_key).as_coeff_Mul()[0] < 0:
                    f = sp.expand(-f)
                    if m % 2:
                        coeff = -coeff
                logs.append((f, sgn * m))
    if coeff < 0:
        for i, (f, m) in enumerate(logs):
            if f.is_Add and m % 2:
                logs[i] = (sp.expand(-f), m)
                coeff = -coeff
                break
    if coeff != 1:
        logs.append((coeff, 1))
    return out + sp.Add(*[m * sp.log(f) for f, m in logs])


def abs_logs(e: Expr) -> Expr:
    """Canonical form with every ``log(u)`` read as ``log|u|``.

    Flips the sign of log arguments whose leading term is negative and drops
    the resulting ``i*pi`` constants.  Derivatives are unchanged, so this is
    the right normal form for comparing densities and Euler-Lagrange
    expressions, but not for laws that get exponentiated.
    """
    e = canonicalize(e)
    flips = {}
    for a in e.atoms(sp.log):
        arg = a.args[0]
        if arg.is_Add and min(arg.args, key=sp.default_sort_key).as_coeff_Mul()[0] < 0:
            flips[a] = sp.log(sp.expand(-arg))
    if not flips:
        return e
    return canonicalize(e.xreplace(flips))


def canonicalize(e) -> Expr:
    """Rational normal form over stencil variables, parameters and atoms."""
    e = sp.sympify(e)
    if e.is_Number or e.is_Symbol:
        return e
    e = _canon_atoms(e)
    e = _reduce_alt(e)
    e = sp.cancel(e)
    r = _reduce_alt(e)
    if r != e:
        e = sp.cancel(r)
    if e.has(sp.exp):
        e = sp.powsimp(e, combine="exp", deep=True)
    return e


# --------------------------------------------------------------------------
# calculus and substitution


def diff(e: Expr, v: sp.Symbol) -> Expr:
    return canonicalize(sp.diff(sp.sympify(e), v))


def raw_diff(e: Expr, v: sp.Symbol) -> Expr:
    """Derivative without normalization (cheap; for intermediate use)."""
    return sp.diff(sp.sympify(e), v)


def substitute(e: Expr, v: sp.Symbol, r: Expr) -> Expr:
    return canonicalize(sp.sympify(e).xreplace({v: sp.sympify(r)}))


def numer_denom(e: Expr) -> tuple[Expr, Expr]:
    """``(N, D)`` with ``e = N/D`` and no common factor; atoms stay opaque."""
    c = canonicalize(e)
    for p in c.atoms(sp.Pow):
        if not p.exp.is_Integer and offsets(p.base):
            raise NonRationalError(f"non-rational power {p}")
    num, den = sp.fraction(sp.cancel(sp.together(c)))
    return sp.expand(num), sp.expand(den)


# --------------------------------------------------------------------------
# random evaluation


def _rand_rational(rng: random.Random) -> Fraction:
    num = rng.randint(-999, 999)
    den = rng.randint(1, 999)
    return Fraction(num, den)


def random_point(symbols: Iterable[sp.Symbol], rng: random.Random) -> dict:
    pt = {}
    for s in symbols:
        if s == ALT:
            pt[s] = Fraction(rng.choice((-1, 1)))
        elif s == N:
            pt[s] = Fraction(rng.randint(-999, 999))
        else:
            pt[s] = _rand_rational(rng)
    return pt


def _mp_value(e: Expr, pt: dict):
    mods = {name: fn.numeric for name, fn in defined_functions().items() if fn.numeric}
    syms = sorted(pt, key=lambda s: s.name)
    f = sp.lambdify(syms, e, modules=[mods, "mpmath"], dummify=True)
    with mpmath.workdps(60):
        args = [mpmath.mpf(v.numerator) / v.denominator for v in (pt[s] for s in syms)]
        return f(*args)


def evaluate(e: Expr, pt: dict):
    """Value of ``e`` at ``pt``: exact Fraction if possible, else mpmath complex/real."""
    e = sp.sympify(e)
    if not transcendental_atoms(e):
        from .numeric import compile_expr

        syms = sorted(e.free_symbols, key=lambda s: s.name)
        fn = compile_expr(e, syms)
        v = fn(*[pt[s] for s in syms])
        return Fraction(int(v.numerator), int(v.denominator))
    return _mp_value(e, pt)


def _is_numerically_zero(v) -> bool:
    if isinstance(v, Fraction):
        return v == 0
    with mpmath.workdps(60):
        return abs(v) < mpmath.mpf(10) ** -40


def is_zero(e: Expr, samples: int = 20, rng: random.Random | None = None) -> bool:
    """Canonical-form zero test with a random-evaluation cross-check."""
    c = canonicalize(e)
    if c == 0:
        return True
    if c.has(sp.log):
        c = abs_logs(c)
        if c == 0:
            return True
    rng = rng or random.Random(0x5EED)
    syms = list(c.free_symbols)
    hits = 0
    attempts = 0
    while hits < samples:
        attempts += 1
        if attempts > 4 * samples + 20:
            raise IndeterminateError(f"evaluation hit poles repeatedly for {c}")
        pt = random_point(syms, rng)
        try:
            v = evaluate(c, pt)
        except (ZeroDivisionError, ValueError, OverflowError):
            continue
        if isinstance(v, mpmath.mpc) or isinstance(v, mpmath.mpf):
            if not mpmath.isfinite(v):
                continue
        if not _is_numerically_zero(v):
            return False
        hits += 1
    raise InconsistencyError(f"nonzero canonical form vanishes at {samples} random points: {c}")


def same(a: Expr, b: Expr) -> bool:
    return is_zero(sp.sympify(a) - sp.sympify(b))
