"""Translation operator, discrete Euler-Lagrange operator and friends."""

from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from . import expr as E
from .grammar import parse, render


class ConstructionFailed(Exception):
    """A telescoping/splitting construction left the supported expression class."""


# --------------------------------------------------------------------------
# translation


def shift_map(e, j: int) -> dict:
    """Substitution dict realising the shift by ``j`` on the symbols of ``e``."""
    j = int(j)
    repl = {}
    for s in sp.sympify(e).free_symbols:
        o = E.stencil_offset(s)
        if o is not None:
            repl[s] = E.X(o + j)
        elif s == E.N:
            repl[s] = E.N + j
        elif s == E.ALT and j % 2:
            repl[s] = -E.ALT
    return repl


def raw_shift(e, j: int):
    """Shift without canonicalization."""
    if j == 0:
        return sp.sympify(e)
    e = sp.sympify(e)
    return e.xreplace(shift_map(e, j))


def shift(e, j: int):
    """``x[n+i] -> x[n+i+j]``, ``n -> n+j``, ``(-1)^n -> (-1)^j (-1)^n``."""
    return E.canonicalize(raw_shift(e, j))


# --------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class LagrangianDensity:
    density: sp.Expr
    k: int
    autonomous: bool = field(default=None)

    def __post_init__(self):
        d = E.canonicalize(self.density)
        object.__setattr__(self, "density", d)
        offs = E.offsets(d)
        if offs and (min(offs) < 0 or max(offs) > self.k):
            raise ValueError(f"density offsets {sorted(offs)} outside 0..{self.k}")
        aut = not E.depends_on_n(d)
        if self.autonomous is None:
            object.__setattr__(self, "autonomous", aut)
        elif self.autonomous != aut:
            raise ValueError("autonomous flag does not match n-dependence of the density")

    @classmethod
    def parse(cls, text: str, k: int) -> "LagrangianDensity":
        return cls(parse(text), k)

    def render(self) -> str:
        return f"k={self.k}\n{render(self.density)}\n"

    def __sub__(self, other: "LagrangianDensity") -> "LagrangianDensity":
        return LagrangianDensity(self.density - other.density, max(self.k, other.k))


@dataclass(frozen=True)
class ELResult:
    expression: sp.Expr
    k: int

    def __post_init__(self):
        offs = E.offsets(self.expression)
        if offs and (min(offs) < -self.k or max(offs) > self.k):
            raise ValueError(f"EL offsets {sorted(offs)} outside -{self.k}..{self.k}")


def _as_expr(L):
    return L.density if isinstance(L, LagrangianDensity) else sp.sympify(L)


def euler_raw(density) -> sp.Expr:
    """``sum_l T^{-l} dL/dx[n+l]`` over every offset present, unnormalized."""
    d = _as_expr(density)
    out = sp.Integer(0)
    for o in sorted(E.offsets(d)):
        out += raw_shift(sp.diff(d, E.X(o)), -o)
    return out


def euler_apply(L) -> ELResult:
    d = _as_expr(L)
    k = L.k if isinstance(L, LagrangianDensity) else max(E.offsets(d) | {0})
    return ELResult(E.canonicalize(euler_raw(d)), k)


def euler_is_zero(g) -> bool:
    return E.is_zero(euler_raw(g))


# --------------------------------------------------------------------------
# total differences


@dataclass(frozen=True)
class TotalDifference:
    """Verdict of :func:`is_total_difference`; ``f`` is None when not constructed."""

    yes: bool
    f: sp.Expr | None = None
    flagged: str | None = None

    def __bool__(self):
        return self.yes


def _terms(e):
    return sp.Add.make_args(sp.expand(e))


def antidifference_n(c):
    """``f(n)`` with ``f(n+1) - f(n) = c`` for ``c`` polynomial in n plus (-1)^n times one."""
    c = sp.expand(E.canonicalize(c))
    if E.offsets(c):
        raise ConstructionFailed("antidifference of a stencil-dependent term")
    A = sp.expand(c.subs(E.ALT, 0))
    B = sp.expand((c - A).subs(E.ALT, 1))
    out = sp.Integer(0)
    for part, alt in ((A, False), (B, True)):
        if part == 0:
            continue
        if not part.is_polynomial(E.N):
            raise ConstructionFailed(f"n-dependence {part} is not polynomial")
        d = sp.degree(part, E.N)
        deg = d + 1 if not alt else d
        cs = sp.symbols(f"_q0:{deg + 1}")
        q = sum(ci * E.N**i for i, ci in enumerate(cs))
        if alt:
            eqn = -q.subs(E.N, E.N + 1) - q - part
        else:
            eqn = q.subs(E.N, E.N + 1) - q - part
        sol = sp.solve(sp.Poly(sp.expand(eqn), E.N).all_coeffs(), cs, dict=True)
        if not sol:
            raise ConstructionFailed(f"no antidifference for {part}")
        qs = q.subs(sol[0]).subs({ci: 0 for ci in cs})
        out += E.ALT * qs if alt else qs
    return E.canonicalize(out)


def telescope(g):
    """Construct ``f`` with ``g = T f - f``; assumes the Euler test already passed."""
    g = E.canonicalize(g)
    f = sp.Integer(0)
    for _ in range(64):
        offs = E.offsets(g)
        if not offs:
            return E.canonicalize(f + antidifference_n(g))
        lo = min(offs)
        h = sp.Add(*[t for t in _terms(g) if E.X(lo) not in t.free_symbols])
        if h == 0:
            raise ConstructionFailed(f"cannot peel x[n{lo:+d}] off {render(g)}")
        hs = raw_shift(h, -1)
        f += hs
        g = E.canonicalize(g - h + hs)
    raise ConstructionFailed("telescoping did not terminate")


def is_total_difference(g) -> TotalDifference:
    g = _as_expr(g)
    if not euler_is_zero(g):
        return TotalDifference(False)
    try:
        f = telescope(g)
    except ConstructionFailed as exc:
        return TotalDifference(True, None, str(exc))
    return TotalDifference(True, f)


def equivalent(L1, L2) -> bool:
    return euler_is_zero(_as_expr(L1) - _as_expr(L2))


# --------------------------------------------------------------------------
# normality


def mixed_partial(d, i: int, j: int):
    return E.diff(E.diff(d, E.X(i)), E.X(j))


def is_normal(L: LagrangianDensity) -> bool:
    return not E.is_zero(mixed_partial(L.density, L.k, 0))


@dataclass(frozen=True)
class Normalized:
    density: LagrangianDensity
    m: int
    partial: bool = False
    note: str | None = None

    def __iter__(self):
        return iter((self.density, self.m))


def normalize_lagrangian(L: LagrangianDensity) -> Normalized:
    """Equivalent density on offsets ``0..k-m`` with nonzero extreme mixed partial.

    A density equivalent to a function of a single point is reported as the
    trivial density with ``m = k + 1``.
    """
    d = L.density
    top = L.k
    while top > 0:
        if not E.is_zero(mixed_partial(d, top, 0)):
            return Normalized(LagrangianDensity(d, L.k), L.k - top)
        # d = a(x1..x_top) + b(x0..x_{top-1}); replace by shift(a,-1) + b
        a = sp.Integer(0)
        for t in _terms(d):
            fs = t.free_symbols
            if E.X(top) in fs:
                if E.X(0) in fs:
                    return Normalized(
                        LagrangianDensity(d, L.k),
                        L.k - top,
                        partial=True,
                        note=f"cannot separate x[n+{top}] from x[n] in {render(t)}",
                    )
                a += t
        d = E.canonicalize(d - a + raw_shift(a, -1))
        top -= 1
    return Normalized(LagrangianDensity(sp.Integer(0), L.k), L.k + 1)


def equivalence_scale(L1, L2, samples: int = 8, seed: int = 0):
    """Rational ``c`` with ``L1 ~ c*L2`` (same EL expression), or ``None``.

    ``c`` is read off at a random point (exactly for rational EL
    expressions, by 60-digit evaluation and rational recognition otherwise),
    then confirmed by the symbolic test on ``L1 - c*L2``.
    """
    import random
    from fractions import Fraction

    import mpmath

    e1, e2 = euler_raw(_as_expr(L1)), euler_raw(_as_expr(L2))
    syms = sorted(e1.free_symbols | e2.free_symbols, key=lambda s: s.name)
    rng = random.Random(seed)
    c = None
    for _ in range(samples * 4):
        pt = E.random_point(syms, rng)
        try:
            v1, v2 = E.evaluate(e1, pt), E.evaluate(e2, pt)
        except (ZeroDivisionError, ValueError, OverflowError):
            continue
        if isinstance(v1, Fraction) and isinstance(v2, Fraction):
            if v2 == 0:
                if v1 != 0:
                    return None
                continue
            c = v1 / v2
            break
        with mpmath.workdps(60):
            if abs(v2) < mpmath.mpf(10) ** -30:
                continue
            ratio = v1 / v2
            if abs(mpmath.im(ratio)) > mpmath.mpf(10) ** -30:
                return None
            c = Fraction(mpmath.nstr(mpmath.re(ratio), 40)).limit_denominator(10**9)
        break
    if c is None or c == 0:
        return None
    c = sp.Rational(int(c.numerator), int(c.denominator))
    if not E.is_zero(e1 - c * e2):
        return None
    return c
