"""From condition systems to Lagrangians (or a proof that none exists).

Pipeline used by :func:`invert`:

1. build the condition system for ``l`` and try to derive ``dl/dx[n-k] = 0``
   from it by linear elimination over the rational-function field
   (:func:`certify_nonexistence`);
2. solve the system on a finite ansatz by exact linear algebra on random
   evaluations (:func:`solve_conditions`);
3. integrate each solution in the extreme variable (:func:`integrate_density`);
4. fix the remaining freedom with the Euler-Lagrange equation itself
   (:func:`fix_compatibility`), then verify symbolically.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from typing import Sequence

import sympy as sp

from . import expr as E
from .annihilate import (
    BWD,
    FWD,
    MIXED,
    ConditionSystem,
    Recurrence,
    _collect,
    allowed_offsets,
    condition_system,
    jet_order,
    mixed_system,
)
from .grammar import parse, render
from .linalg import frac_field, nullspace_modular, rref_mod, sympy_matrix_over, _to_mod, _PRIMES
from .numeric import Atomizer, compile_raw, random_values
from .variational import LagrangianDensity, euler_raw, is_normal, raw_shift


class NonIntegrableError(ValueError):
    pass


class AtomClosureError(ValueError):
    pass


# --------------------------------------------------------------------------
# ansatz


def monomials(xs: Sequence[sp.Symbol], degree: int, total: int | None = None, least=None):
    """Monomials with each exponent <= degree (and total <= total)."""
    out = []
    for exps in itertools.product(range(degree + 1), repeat=len(xs)):
        if total is not None and sum(exps) > total:
            continue
        if least is not None and exps[least] == 0:
            continue
        m = sp.Integer(1)
        for x, e in zip(xs, exps):
            m *= x**e
        out.append(m)
    return out


@dataclass(frozen=True)
class AnsatzSpace:
    """A finite span of products ``stencil part * multiplier``.

    Stencil parts are monomials (degree per variable bounded by ``degree``),
    monomials over a reciprocal power of an affine ``factor`` and
    transcendental ``atoms`` times low-degree monomials.  Multipliers are
    parameter monomials of degree <= ``param_degree`` times ``1``, ``n`` or
    ``(-1)^n`` (as listed in ``nonaut``).  With ``require`` set, only stencil
    parts that depend on that offset are kept.
    """

    offsets: tuple[int, ...]
    degree: int = 3
    total_degree: int | None = None
    atoms: tuple = ()
    factors: tuple = ()
    inv_power: int = 2
    atom_degree: int = 0
    param_degree: int = 1
    params: tuple = ()
    nonaut: tuple = ("1",)
    require: int | None = None

    def stencil_basis(self) -> list[sp.Expr]:
        offs = sorted(self.offsets)
        xs = [E.X(o) for o in offs]
        out: list = []
        if self.require is None:
            out += monomials(xs, self.degree, self.total_degree)
        else:
            xr = E.X(self.require)
            out += monomials(xs, self.degree, self.total_degree, least=xs.index(xr))
        for f in self.factors:
            fo = E.offsets(f)
            if not fo <= set(offs):
                continue
            if self.require is not None:
                if self.require not in fo:
                    continue
                pivot = self.require
            else:
                pivot = max(fo)
            others = [E.X(o) for o in offs if o != pivot]
            for j in range(1, self.inv_power + 1):
                for m in monomials(others, self.degree, self.total_degree):
                    out.append(m / f**j)
        for a in self.atoms:
            ao = E.offsets(a)
            if not ao <= set(offs):
                continue
            for m in monomials(xs, self.atom_degree, self.atom_degree):
                if self.require is not None and self.require not in (ao | E.offsets(m)):
                    continue
                out.append(a * m)
        seen = set()
        uniq = []
        for b in out:
            if b not in seen:
                seen.add(b)
                uniq.append(b)
        return uniq

    def multipliers(self, symbols=None) -> list[sp.Expr]:
        ps = [p for p in self.params if symbols is None or p in symbols]
        pm = monomials(ps, self.param_degree, self.param_degree)
        na = []
        for tag in self.nonaut:
            s = {"1": sp.Integer(1), "n": E.N, "alt": E.ALT}[tag]
            if symbols is None or s == 1 or s in symbols:
                na.append(s)
        return [a * b for b in na for a in pm]

    def basis(self) -> list[sp.Expr]:
        return [b * m for m in self.multipliers() for b in self.stencil_basis()]

    def describe(self) -> str:
        return (
            f"offsets={list(self.offsets)} degree={self.degree} total={self.total_degree} "
            f"atoms=[{', '.join(render(a) for a in self.atoms)}] "
            f"factors=[{', '.join(render(f) for f in self.factors)}] "
            f"params=[{', '.join(map(str, self.params))}] param_degree={self.param_degree} "
            f"nonaut={list(self.nonaut)} require={self.require} size={len(self.stencil_basis())}x{len(self.multipliers())}"
        )


# --------------------------------------------------------------------------
# evaluation helpers


class _Sampler:
    """Evaluates many expressions at shared random points with atoms as symbols."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.atomizer = Atomizer()
        self.exprs: list = []
        self.fns = None
        self.syms = None

    def add(self, e) -> int:
        e = sp.sympify(e)
        if E.transcendental_atoms(e):
            # one representation per atom, so that atomizing keeps relations
            e = E.abs_logs(e)
        self.exprs.append(self.atomizer(e))
        self.fns = None
        return len(self.exprs) - 1

    def compile(self):
        syms = set()
        for e in self.exprs:
            syms |= e.free_symbols
        self.syms = tuple(sorted(syms, key=lambda s: s.name))
        self.fns = [compile_raw(e, self.syms) for e in self.exprs]

    def point(self, extra=None):
        """Values of all registered expressions at a fresh random point."""
        if self.fns is None:
            self.compile()
        for _ in range(50):
            vals = random_values(self.syms, self.rng)
            if extra:
                vals = extra(vals)
                if vals is None:
                    continue
            args = [vals[s] for s in self.syms]
            try:
                return [f(*args) for f in self.fns], vals
            except ZeroDivisionError:
                continue
        raise E.IndeterminateError("random evaluation kept hitting poles")


def _coef_symbols(coef_maps) -> set:
    out = set()
    for cm in coef_maps:
        for c in cm.values():
            out |= {s for s in c.free_symbols if not E.is_stencil(s) and not E.is_jet(s)}
    return out


def _jet_vars(j):
    return [E.X(o) for o in E.jet_offsets(j)]


def _jdiff(b, j):
    for v in _jet_vars(j):
        b = sp.diff(b, v)
    return b


def _rank_mod(rows):
    for p in _PRIMES[-3:]:
        try:
            return len(rref_mod(_to_mod(rows, p), p)[1])
        except ZeroDivisionError:
            continue
    raise ArithmeticError("no usable prime for the rank estimate")


def sample_rows(point_rows, ncols: int, slack: int = 16) -> list:
    """Rows from random points until the rank (mod p) stops growing.

    Constraints that are dependent at every point add fewer independent rows
    than their count suggests, so a fixed row budget can leave the system
    underdetermined.
    """
    rows: list = []
    target = ncols + slack
    prev = None
    while True:
        while len(rows) < target:
            rows += point_rows()
        rank = _rank_mod(rows)
        if rank == ncols or rank == prev:
            return rows
        prev = rank
        target = len(rows) + max(slack, ncols - rank + slack)


# --------------------------------------------------------------------------
# step iii: solving the condition system


@dataclass
class EllSolutions:
    """Null-space basis of the condition system on an ansatz.

    ``reduced`` solves with multipliers restricted to the symbols that occur
    in the constraint coefficients; every product ``reduced[i] * mu`` with
    ``mu`` in ``free_multipliers`` is then also a solution, and these products
    span the full solution space on the ansatz.
    """

    reduced: list
    free_multipliers: list
    columns: int

    def full(self) -> list:
        return [E.canonicalize(s * m) for m in self.free_multipliers for s in self.reduced]


def _check_closure(coef_maps, a: AnsatzSpace):
    """Every jet and coefficient atom must be expressible over the ansatz."""
    offs = set(a.offsets)
    for cm in coef_maps:
        for j, c in cm.items():
            if not set(E.jet_offsets(j)) <= offs:
                raise AtomClosureError(f"jet {render(j)} needs offsets outside the ansatz {sorted(offs)}")
            if any(E.is_jet(s) for s in c.free_symbols):
                raise AtomClosureError(f"coefficient {render(c)} of {render(j)} contains a jet")
            known = E.transcendental_atoms(c)
            for f in c.atoms(sp.Function):
                if f not in known:
                    raise AtomClosureError(f"atom {f} is not in the bookkeeping basis")


def _solve_ell(constraints: Sequence[sp.Expr], a: AnsatzSpace, rng) -> EllSolutions:
    uniq = {}
    for c in constraints:
        uniq.setdefault(render(c), c)
    coef_maps = [cm for cm in (_collect(c) for c in uniq.values()) if cm]
    _check_closure(coef_maps, a)
    bound = _coef_symbols(coef_maps)
    mults = a.multipliers(bound)
    allm = a.multipliers()
    free = [m for m in a.multipliers(set(allm_syms(allm)) - bound)]
    stencil = a.stencil_basis()
    cols = [(b, m) for m in mults for b in stencil]
    if not cols:
        return EllSolutions([], free, 0)
    if not coef_maps:
        return EllSolutions([b * m for b, m in cols], free, len(cols))
    jets = sorted({j for cm in coef_maps for j in cm}, key=jet_order)
    S = _Sampler(rng)
    coef_idx = [{j: S.add(c) for j, c in cm.items()} for cm in coef_maps]
    der_idx = {(bi, j): S.add(_jdiff(b, j)) for bi, b in enumerate(stencil) for j in jets}
    mult_idx = [S.add(m) for m in mults]
    nb = len(stencil)
    def point_rows():
        vals, _ = S.point()
        mv = [vals[i] for i in mult_idx]
        out = []
        for cm in coef_idx:
            base = [0] * nb
            for j, ci in cm.items():
                cv = vals[ci]
                if cv == 0:
                    continue
                for bi in range(nb):
                    dv = vals[der_idx[(bi, j)]]
                    if dv:
                        base[bi] += cv * dv
            out.append([mv[mi] * base[bi] for mi in range(len(mults)) for bi in range(nb)])
        return out

    rows = sample_rows(point_rows, len(cols))
    ns = nullspace_modular(rows, len(cols))
    sols = []
    for v in ns:
        e = sp.Add(*[sp.Rational(int(c.numerator), int(c.denominator)) * b * m for c, (b, m) in zip(v, cols) if c])
        if e != 0:
            sols.append(e)
    return EllSolutions(sols, free, len(cols))


def allm_syms(mults):
    out = set()
    for m in mults:
        out |= m.free_symbols
    return out


def solve_conditions(cs, a: AnsatzSpace, with_extras: bool = True, seed: int = 0) -> list:
    """Basis of the densities ``l`` in the ansatz satisfying every constraint."""
    exprs = cs.exprs(with_extras) if isinstance(cs, ConditionSystem) else list(cs)
    return _solve_ell(exprs, a, random.Random(seed)).full()


# --------------------------------------------------------------------------
# step iv: integration


def _lin(u, y):
    a = sp.diff(u, y)
    if y in a.free_symbols or a == 0:
        return None
    return a


def _two_exponentials(arg, y):
    """``(u1, u2)`` with ``arg = e^u1 + e^u2`` and ``u1 - u2`` involving ``y``."""
    terms = sp.Add.make_args(sp.expand(arg, power_exp=False))
    if len(terms) != 2:
        return None
    us = []
    for t in terms:
        t = sp.powsimp(t, combine="exp")
        if t == 1:
            us.append(sp.Integer(0))
        elif isinstance(t, sp.exp):
            us.append(t.args[0])
        else:
            return None
    u1, u2 = us
    if y not in (u1 - u2).free_symbols:
        return None
    if y in u2.free_symbols and y not in u1.free_symbols:
        u1, u2 = u2, u1
    return u1, u2


def _integrate_piece(c, g, y):
    """Integrate ``c * g`` in ``y`` where ``c`` is free of ``y``."""
    if y not in g.free_symbols:
        return c * g * y
    if g == y:
        return c * y**2 / 2
    if g.is_Pow:
        base, ex = g.as_base_exp()
        if base == y and ex.is_Integer and ex >= 0:
            return c * y ** (ex + 1) / (ex + 1)
        a = _lin(base, y) if ex.is_Integer else None
        if a is not None:
            if ex == -1:
                return c * sp.log(base) / a
            return c * base ** (ex + 1) / (a * (ex + 1))
    if isinstance(g, sp.log):
        arg = g.args[0]
        pair = _two_exponentials(arg, y)
        if pair is not None:
            # log(e^u1 + e^u2) = u2 + log(1 + e^(u1-u2))
            u1, u2 = pair
            a = _lin(u1 - u2, y)
            if a is not None and (u2 == 0 or _lin(u2, y) is not None or y not in u2.free_symbols):
                return c * (E.F_AS(sp.expand(u1 - u2)) / a + antiderivative(u2, y))
        a = _lin(arg, y)
        if a is not None:
            return c * (arg * sp.log(arg) - arg) / a
    if isinstance(g, sp.exp):
        a = _lin(g.args[0], y)
        if a is not None:
            return c * g / a
    a = _lin(g, y)
    if a is not None and g.is_Add:
        return c * g**2 / (2 * a)
    raise NonIntegrableError(f"no antiderivative in the table for {render(c * g)}")


def antiderivative(e, y) -> sp.Expr:
    """Antiderivative of ``e`` in ``y`` from the rational/log/defined-function table."""
    e = E.canonicalize(e)
    if y not in e.free_symbols:
        return E.canonicalize(e * y)
    out = sp.Integer(0)
    for t in sp.Add.make_args(sp.expand(e)):
        c, g = t.as_independent(y, as_Add=False)
        if y not in g.free_symbols:
            out += c * g * y
            continue
        if E.transcendental_atoms(g) and any(y in a.free_symbols for a in E.transcendental_atoms(g)):
            out += _integrate_piece(c, g, y)
            continue
        for piece in sp.Add.make_args(sp.apart(sp.together(g), y)):
            c2, g2 = piece.as_independent(y, as_Add=False)
            if g2.is_Mul:
                raise NonIntegrableError(f"no antiderivative in the table for {render(piece)}")
            out += _integrate_piece(c * c2, g2, y)
    return E.canonicalize(out)


@dataclass(frozen=True)
class DensityTemplate:
    """``integrated`` plus an undetermined function of the non-extreme points."""

    integrated: sp.Expr
    k: int
    placeholder: tuple  # stencil basis for the unknown function on offsets 0..k-1
    coefficients: tuple

    @property
    def density(self) -> sp.Expr:
        return self.integrated + sum(c * p for c, p in zip(self.coefficients, self.placeholder))


def integrate_density(ell, r: Recurrence, direction: str = FWD, placeholder=()) -> DensityTemplate:
    """``L = int^{x[n+k]} T^k l dy + l_hat(x[n+k-1], ..., x[n])`` (forward)."""
    k = r.k
    if direction == BWD:
        integrated = antiderivative(ell, E.X(0))
    else:
        integrated = antiderivative(raw_shift(ell, k), E.X(k))
    coefs = tuple(sp.Symbol(f"_c{i}") for i in range(len(placeholder)))
    return DensityTemplate(integrated, k, tuple(placeholder), coefs)


# --------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    """``sum_i multipliers[i] * equations[i] == target`` (an exact identity)."""

    target: sp.Symbol
    equations: list
    provenance: list
    multipliers: list

    def replay(self) -> bool:
        total = sum(m * e for m, e in zip(self.multipliers, self.equations))
        return E.is_zero(total - self.target)

    def render(self) -> str:
        lines = [f"target: {render(self.target)} = 0"]
        for m, e, p in zip(self.multipliers, self.equations, self.provenance):
            if m != 0:
                lines.append(f"  ({render(m)}) * [{p}] {render(e)}")
        return "\n".join(lines)


def total_derivative(e, v: sp.Symbol, allowed=None):
    """Derivative of a jet-linear expression along ``v`` (jets prolonged)."""
    o = E.stencil_offset(v)
    out = sp.Integer(0)
    for j, c in _collect(e).items():
        out += sp.diff(c, v) * j
        offs = E.jet_offsets(j)
        if allowed is None or o in allowed:
            out += c * E.jet(tuple(offs) + (o,), E.jet_prefix(j))
    return E.canonicalize(out)


def certify_nonexistence(
    cs: ConditionSystem,
    extra: Sequence[sp.Expr] = (),
    depth: int = 1,
    sparsity=None,
    seed: int = 0,
) -> Certificate | None:
    """Try to derive ``d l/d x[n-k] = 0`` (the normality jet) by elimination."""
    k = cs.k
    if cs.direction == FWD:
        target = E.jet((-k,))
    elif cs.direction == BWD:
        target = E.jet((k,))
    else:
        target = E.jet((0, k), "L")
    allowed = set(cs.offsets)
    base = [(c.expr, f"m={c.m} {c.direction} {c.extraction}") for c in cs.constraints]
    base += [(e, "extra") for e in extra]
    eqs = list(base)
    frontier = list(base)
    for _ in range(depth):
        new = []
        for e, p in frontier:
            for o in sorted(allowed):
                d = total_derivative(e, E.X(o), allowed)
                if d != 0:
                    new.append((d, f"d/dx[n{o:+d}] of ({p})" if o else f"d/dx[n] of ({p})"))
        eqs += new
        frontier = new
    coefs = [_collect(e) for e, _ in eqs]
    keep = [i for i, c in enumerate(coefs) if c]
    eqs = [eqs[i] for i in keep]
    coefs = [coefs[i] for i in keep]
    if not coefs:
        return None
    jets = sorted({j for c in coefs for j in c} | {target}, key=jet_order)
    at = Atomizer()
    rows = [[at(c.get(j, sp.Integer(0))) for j in jets] for c in coefs]
    tvec = [sp.Integer(int(j == target)) for j in jets]
    # cheap modular screen at a random point, also picks a small row subset
    syms = sorted({s for row in rows for v in row for s in sp.sympify(v).free_symbols}, key=str)
    rng = random.Random(seed)
    chosen = _screen(rows, tvec, syms, rng)
    if chosen is None:
        return None
    sub = [rows[i] for i in chosen]
    lam = _solve_left_exact(sub, tvec, syms)
    if lam is None:
        return None
    back = {v: a for a, v in at.table.items()}
    mult = [sp.Integer(0)] * len(eqs)
    for i, l in zip(chosen, lam):
        mult[i] = E.canonicalize(sp.sympify(l).xreplace(back))
    cert = Certificate(target, [e for e, _ in eqs], [p for _, p in eqs], mult)
    if not cert.replay():
        raise ArithmeticError("certificate failed to replay")
    return cert


def _screen(rows, tvec, syms, rng):
    """Rows (indices) whose span contains the target at a random point mod p, or None."""
    from .numeric import rand_mpq

    p = _PRIMES[0]
    for _ in range(5):
        pt = {s: rand_mpq(rng) for s in syms}
        try:
            num = []
            for row in rows:
                num.append([_eval_q(v, pt) for v in row])
        except ZeroDivisionError:
            continue
        try:
            M = _to_mod(num, p)
        except ZeroDivisionError:
            continue
        import numpy as np

        _, piv_rows = rref_mod(M.T.copy(), p)  # pivots = independent rows
        basis = list(piv_rows)
        T = _to_mod([[int(x) for x in tvec]], p)
        aug = np.vstack([M[basis], T])
        _, piv2 = rref_mod(aug.T.copy(), p)
        if len(piv2) > len(basis):
            return None
        return basis
    return None


def _eval_q(v, pt):
    from .numeric import compile_raw

    v = sp.sympify(v)
    if v.is_Rational:
        import gmpy2

        return gmpy2.mpq(int(v.p), int(v.q))
    syms = tuple(sorted(v.free_symbols, key=str))
    return compile_raw(v, syms)(*[pt[s] for s in syms])


def _solve_left_exact(rows, tvec, syms):
    K = frac_field(syms)
    m = len(rows)
    A = sympy_matrix_over(rows, K)
    t = sympy_matrix_over([tvec], K)
    aug = A.transpose().hstack(t.transpose())
    R, piv = aug.rref()
    if m in piv:
        return None
    lam = [K.zero] * m
    for i, pc in enumerate(piv):
        lam[pc] = R[i, m].element
    return [K.to_sympy(v) for v in lam]


# --------------------------------------------------------------------------
# steps v-vi: compatibility


@dataclass
class SolveOutcome:
    variant: str  # Lagrangian | NonExistence | Inconclusive
    density: LagrangianDensity | None = None
    trace: dict = field(default_factory=dict)
    certificate: Certificate | None = None
    reason: str | None = None
    residual: list = field(default_factory=list)
    ansatz: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return {"Lagrangian": 0, "NonExistence": 2, "Inconclusive": 3}[self.variant]

    def render(self) -> str:
        out = [f"outcome: {self.variant}"]
        if self.density is not None:
            out.append(f"k: {self.density.k}")
            out.append(f"density: {render(self.density.density)}")
        for key in sorted(self.trace):
            out.append(f"{key}: {self.trace[key]}")
        if self.certificate is not None:
            out.append("certificate:")
            out.append(self.certificate.render())
        if self.reason:
            out.append(f"reason: {self.reason}")
        for a in self.ansatz:
            out.append(f"ansatz: {a}")
        for e in self.residual:
            out.append(f"residual: {render(e)}")
        return "\n".join(out) + "\n"


def _substitute_top(e, r: Recurrence):
    """Replace ``x[n+k]`` by ``F`` (used for the symbolic check)."""
    return E.canonicalize(sp.sympify(e).xreplace({E.X(r.k): r.forward}))


def residual(density, r: Recurrence) -> sp.Expr:
    return _substitute_top(euler_raw(density), r)


def _sub_in_atoms(e, r: Recurrence):
    top = E.X(r.k)
    atoms = [a for a in E.transcendental_atoms(e) if top in a.free_symbols]
    if not atoms:
        return e
    repl = {a: E.canonicalize(a.xreplace({top: r.forward})) for a in atoms}
    return sp.sympify(e).xreplace(repl)


def _offset_key(b):
    offs = sorted(E.offsets(b), reverse=True)
    return (offs, sp.default_sort_key(b))


def fix_compatibility(
    r: Recurrence,
    parts: Sequence[sp.Expr],
    placeholder: AnsatzSpace,
    part_multipliers: Sequence[sp.Expr] = (sp.Integer(1),),
    seed: int = 0,
) -> SolveOutcome:
    """Find ``L = sum a_i parts_i mu + placeholder`` with EL vanishing on solutions."""
    rng = random.Random(seed)
    k = r.k
    ph = placeholder.stencil_basis()
    ph.sort(key=_offset_key, reverse=True)
    pm = placeholder.multipliers()
    stencil = [("a", s) for s in parts] + [("p", s) for s in ph]
    cols = [(i, m) for i, (tag, _) in enumerate(stencil) if tag == "a" for m in part_multipliers]
    cols += [(i, m) for i, (tag, _) in enumerate(stencil) if tag == "p" for m in pm]
    n_a = len(parts) * len(part_multipliers)
    if not cols:
        return SolveOutcome("Inconclusive", reason="empty ansatz")
    S = _Sampler(rng)
    pieces = []
    for _, s in stencil:
        pl = []
        for o in sorted(E.offsets(s)):
            pe = raw_shift(sp.diff(s, E.X(o)), -o)
            pl.append((o, S.add(_sub_in_atoms(pe, r))))
        pieces.append(pl)
    mults = sorted(set(part_multipliers) | set(pm), key=sp.default_sort_key)
    m_idx = {(m, l): S.add(raw_shift(m, -l)) for m in mults for l in range(0, k + 1)}
    F_idx = S.add(r.forward)
    top = E.X(k)
    F_atomized = S.exprs[F_idx]
    Ffn_syms = tuple(sorted(F_atomized.free_symbols, key=lambda s: s.name))
    Ffn = compile_raw(F_atomized, Ffn_syms)

    def with_top(vals):
        try:
            vals[top] = Ffn(*[vals[s] for s in Ffn_syms])
        except ZeroDivisionError:
            return None
        return vals

    # x[n+k] must be a symbol of the sampler so pieces can use it
    S.compile()
    if top not in S.syms:
        S.syms = S.syms + (top,)
        S.fns = [compile_raw(e, S.syms) for e in S.exprs]
    def point_rows():
        vals, _ = S.point(with_top)
        row = []
        for i, m in cols:
            acc = 0
            for o, pi in pieces[i]:
                pv = vals[pi]
                if pv:
                    acc += vals[m_idx[(m, o)]] * pv
            row.append(acc)
        return [row]

    rows = sample_rows(point_rows, len(cols))
    ns = nullspace_modular(rows, len(cols))
    trace = {"columns": len(cols), "nullity": len(ns)}
    if not ns:
        return SolveOutcome("Inconclusive", reason="no density in the ansatz satisfies the equation", trace=trace)
    # trivial part: placeholder combinations with identically vanishing EL
    p_rows = [row[n_a:] for row in rows]
    k0 = nullspace_modular(p_rows, len(cols) - n_a) if len(cols) > n_a else []
    k0 = _rref_rows(k0)
    cand = [row for row, _ in _rref_rows([list(v) for v in ns])]
    sols = [v for v in cand if any(v[:n_a])]
    trace["solution_dim"] = len(sols)
    trace["trivial_dim"] = len(k0)
    if not sols:
        return SolveOutcome(
            "Inconclusive",
            reason="only trivial densities satisfy the equation in this ansatz",
            trace=trace,
        )
    reduced = []
    for v in sols:
        v = list(v)
        pv = v[n_a:]
        for row, pc in k0:
            c = pv[pc]
            if c:
                pv = [a - c * b for a, b in zip(pv, row)]
        v = v[:n_a] + pv
        first = next(x for x in v if x)
        v = [x / first for x in v]
        reduced.append(v)

    def build(v):
        terms = []
        for c, (i, m) in zip(v, cols):
            if c:
                terms.append(sp.Rational(int(c.numerator), int(c.denominator)) * stencil[i][1] * m)
        return E.canonicalize(sp.Add(*terms)), len(terms)

    built = [build(v) for v in reduced]
    built.sort(key=lambda t: (t[1], render(t[0])))
    density, nterms = built[0]
    trace["terms"] = nterms
    res = residual(density, r)
    ok = E.is_zero(res)
    trace["residual_zero"] = ok
    L = LagrangianDensity(density, k)
    normal = is_normal(L)
    trace["normal"] = normal
    if not ok:
        return SolveOutcome("Inconclusive", reason="symbolic verification failed", residual=[res], trace=trace)
    if not normal:
        return SolveOutcome("Inconclusive", density=L, reason="solution is not normal", trace=trace)
    return SolveOutcome("Lagrangian", density=L, trace=trace)


def _rref_rows(vecs):
    """RREF of a list of mpq vectors; returns ``[(row, pivot_col)]``."""
    import gmpy2

    rows = [list(map(gmpy2.mpq, v)) for v in vecs]
    out = []
    if not rows:
        return out
    ncols = len(rows[0])
    r = 0
    piv = []
    for c in range(ncols):
        p = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        piv.append(c)
        r += 1
        if r == len(rows):
            break
    return list(zip(rows[: len(piv)], piv))


# --------------------------------------------------------------------------
# atoms


def _affine_factors(e) -> set:
    out = set()
    e = sp.sympify(e)
    if E.transcendental_atoms(e):
        return out
    num, den = sp.fraction(sp.together(e))
    for part in (num, den):
        if not E.offsets(part):
            continue
        try:
            _, fl = sp.factor_list(part)
        except sp.PolificationFailed:
            continue
        for f, _ in fl:
            if E.parameters(f) or not E.offsets(f):
                continue
            if E.depends_on_n(f):
                continue
            xs = E.stencil_symbols(f)
            if sp.Poly(f, *xs).total_degree() != 1:
                continue
            out.add(_normalize_affine(f))
    return out


def _normalize_affine(f):
    xs = E.stencil_symbols(f)
    lead = xs[-1]
    c = sp.Poly(f, *xs).coeff_monomial(lead)
    f = sp.expand(f / c)
    cont, prim = sp.Poly(f, *xs).primitive()
    return sp.expand(prim.as_expr())


def seed_factors(r: Recurrence, cs: ConditionSystem | None = None) -> list:
    """Affine factors of F, dF/dx[n-k] and the constraint coefficients."""
    srcs = [r.forward, E.diff(r.forward, E.X(-r.k))]
    if cs is not None:
        for c in cs.constraints:
            srcs += list(_collect(c.expr).values())
    out = set()
    for s in srcs:
        out |= _affine_factors(s)
    return sorted(out, key=sp.default_sort_key)


def seed_exp_atoms(cs: ConditionSystem, ext: int) -> list:
    """``log(1 + exp(u))`` atoms suggested by the constraint coefficients.

    ``u`` runs over the exponents of ``exp`` atoms in one coefficient and
    over their pairwise differences (coefficients come with denominators
    cleared, so ``1 + exp(a - b)`` shows up as ``exp(b) + exp(a)``); only
    affine ``u`` involving ``x[n+ext]`` are kept.
    """
    out = []
    for c in cs.exprs(True):
        for coef in _collect(c).values():
            us = sorted(
                {sp.expand(a.args[0]) for a in E.transcendental_atoms(coef) if isinstance(a, sp.exp)},
                key=sp.default_sort_key,
            )
            cands = list(us) + [sp.expand(a - b) for a, b in itertools.combinations(us, 2)]
            for u in cands:
                xs = E.stencil_symbols(u)
                if E.X(ext) not in xs or E.parameters(u) or E.depends_on_n(u):
                    continue
                if sp.Poly(u, *xs).total_degree() != 1:
                    continue
                atom = sp.log(1 + sp.exp(u))
                if atom not in out:
                    out.append(atom)
    return out


def translations(f, window: set, allowed=None) -> list:
    """All shifts of ``f`` whose offsets lie inside ``window`` (and ``allowed``)."""
    fo = E.offsets(f)
    if not fo:
        return []
    out = []
    lo, hi = min(window), max(window)
    for s in range(lo - max(fo), hi - min(fo) + 1):
        g = raw_shift(f, s)
        go = E.offsets(g)
        if go <= window and (allowed is None or go <= allowed):
            out.append(sp.expand(g))
    return out


# --------------------------------------------------------------------------
# the whole pipeline


@dataclass
class InvertConfig:
    direction: str = FWD
    degree: int = 3
    total_degree: int | None = None
    ell_degree: int | None = None
    ell_total_degree: int | None = None
    atoms: tuple | None = None  # placeholder atoms; None = auto
    ell_atoms: tuple | None = None  # None = auto (log(1+exp(u)) from the constraints)
    factors: tuple | None = None  # ell reciprocal factors; None = auto
    sparsity: tuple | None = None
    param_degree: int = 1
    seed: int = 0
    certify: bool = True
    certify_depth: int = 1
    inv_power: int = 2
    atom_degree: int = 0


def _nonaut_tags(r: Recurrence):
    tags = ["1"]
    fs = r.forward.free_symbols
    if E.N in fs:
        tags.append("n")
    if E.ALT in fs:
        tags.append("alt")
    return tuple(tags)


def invert(r: Recurrence, config: InvertConfig | None = None) -> SolveOutcome:
    cfg = config or InvertConfig()
    k = r.k
    t0 = time.perf_counter()
    timings = {}
    sparsity = tuple(cfg.sparsity) if cfg.sparsity is not None else None
    solve_dir = BWD if cfg.direction == BWD else FWD
    if solve_dir == BWD and r.backward is None:
        return SolveOutcome("Inconclusive", reason="backward law absent")
    cs = condition_system(r, solve_dir, sparsity)
    timings["conditions"] = time.perf_counter() - t0
    if cfg.certify:
        t1 = time.perf_counter()
        cert = None
        if cfg.direction == MIXED:
            ms = mixed_system(r, sparsity)
            cert = certify_nonexistence(ms, [c.expr for c in ms.extras], cfg.certify_depth, sparsity, cfg.seed)
        else:
            cert = certify_nonexistence(cs, [c.expr for c in cs.extras], cfg.certify_depth, sparsity, cfg.seed)
        timings["certify"] = time.perf_counter() - t1
        if cert is not None:
            return SolveOutcome(
                "NonExistence",
                certificate=cert,
                trace={"constraints": len(cs.constraints), "extras": len(cs.extras)},
                timings=timings,
            )
    allowed = allowed_offsets(k, solve_dir, sparsity)
    ell_offs = tuple(o for o in (range(-k, 1) if solve_dir == FWD else range(0, k + 1)) if allowed is None or o in allowed)
    ext = -k if solve_dir == FWD else k
    factors = seed_factors(r, cs) if cfg.factors is None else [parse(f) if isinstance(f, str) else f for f in cfg.factors]
    ell_factors = []
    for f in factors:
        for g in translations(f, set(ell_offs), allowed):
            if E.X(ext) in g.free_symbols and g not in ell_factors:
                ell_factors.append(g)
    if cfg.ell_atoms is None:
        ell_atoms = seed_exp_atoms(cs, ext)
    else:
        ell_atoms = [parse(a) if isinstance(a, str) else a for a in cfg.ell_atoms]
    params = r.params
    tags = _nonaut_tags(r)
    ell_ansatz = AnsatzSpace(
        ell_offs,
        cfg.ell_degree if cfg.ell_degree is not None else cfg.degree,
        cfg.ell_total_degree if cfg.ell_total_degree is not None else cfg.total_degree,
        atoms=tuple(ell_atoms),
        factors=tuple(ell_factors),
        inv_power=cfg.inv_power,
        atom_degree=cfg.atom_degree,
        param_degree=cfg.param_degree,
        params=params,
        nonaut=tags,
        require=ext,
    )
    t1 = time.perf_counter()
    sol = _solve_ell(cs.exprs(True), ell_ansatz, random.Random(cfg.seed))
    timings["solve"] = time.perf_counter() - t1
    if not sol.reduced:
        return SolveOutcome(
            "Inconclusive",
            reason="the condition system has no solution depending on the extreme variable in this ansatz",
            residual=cs.exprs(True),
            ansatz=[ell_ansatz.describe()],
            timings=timings,
        )
    t1 = time.perf_counter()
    parts = []
    for s in sol.reduced:
        try:
            parts.append(integrate_density(s, r, solve_dir).integrated)
        except NonIntegrableError as exc:
            return SolveOutcome("Inconclusive", reason=str(exc), ansatz=[ell_ansatz.describe()], timings=timings)
    timings["integrate"] = time.perf_counter() - t1
    allowed_L = set(sparsity) if sparsity is not None else None
    ph_offs = tuple(o for o in range(0, k) if allowed_L is None or o in allowed_L)
    if cfg.atoms is None:
        atoms = []
        for f in factors:
            for g in translations(f, set(ph_offs), allowed_L):
                a = sp.log(g)
                if a not in atoms:
                    atoms.append(a)
    else:
        atoms = [parse(a) if isinstance(a, str) else a for a in cfg.atoms]
    ph = AnsatzSpace(
        ph_offs,
        cfg.degree,
        cfg.total_degree,
        atoms=tuple(atoms),
        atom_degree=cfg.atom_degree,
        param_degree=cfg.param_degree,
        params=params,
        nonaut=tags,
    )
    t1 = time.perf_counter()
    out = fix_compatibility(r, parts, ph, sol.free_multipliers, cfg.seed)
    timings["compatibility"] = time.perf_counter() - t1
    out.ansatz = [ell_ansatz.describe(), ph.describe()]
    out.trace["ell_solutions"] = len(sol.reduced)
    out.timings = timings
    if out.variant == "Inconclusive" and not out.residual:
        out.residual = cs.exprs(True)
    return out
