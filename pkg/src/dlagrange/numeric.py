"""Exact evaluation of rational expressions at rational points.

Expressions are compiled to straight-line Python over ``gmpy2.mpq`` with
shared subexpressions evaluated once.  Transcendental atoms must be replaced
by symbols first (:func:`atomize`).
"""

from __future__ import annotations

import random
from functools import lru_cache

import gmpy2
import sympy as sp

from . import expr as E

mpq = gmpy2.mpq


class _Emitter:
    def __init__(self, names):
        self.names = names
        self.lines: list[str] = []
        self.memo: dict = {}
        self.consts: dict = {}

    def tmp(self, code):
        t = f"t{len(self.lines)}"
        self.lines.append(f"    {t} = {code}")
        return t

    def const(self, r):
        key = (int(r.p), int(r.q))
        if key not in self.consts:
            self.consts[key] = f"c{len(self.consts)}"
        return self.consts[key]

    def visit(self, e):
        if e in self.memo:
            return self.memo[e]
        if e.is_Symbol:
            if e not in self.names:
                raise KeyError(f"unbound symbol {e}")
            r = self.names[e]
        elif e.is_Rational:
            r = self.const(e)
        elif e.is_Add:
            r = self.tmp(" + ".join(self.visit(a) for a in e.args))
        elif e.is_Mul:
            r = self.tmp(" * ".join(self.visit(a) for a in e.args))
        elif e.is_Pow and e.exp.is_Integer:
            b = self.visit(e.base)
            x = int(e.exp)
            if x >= 0:
                r = self.tmp(f"{b} ** {x}")
            else:
                r = self.tmp(f"ONE / ({b} ** {-x})")
        else:
            raise TypeError(f"cannot compile node {e.func.__name__}: {e}")
        self.memo[e] = r
        return r


@lru_cache(maxsize=4096)
def _compile(e: sp.Expr, syms: tuple):
    names = {s: f"a{i}" for i, s in enumerate(syms)}
    em = _Emitter(names)
    out = em.visit(e)
    args = ", ".join(names[s] for s in syms)
    src = [f"def f({args}):"] + em.lines + [f"    return {out}"]
    env = {"ONE": mpq(1)}
    for (p, q), name in em.consts.items():
        env[name] = mpq(p, q)
    exec("\n".join(src), env)
    return env["f"]


def compile_expr(e: sp.Expr, syms) -> callable:
    """Return ``f(*values)`` evaluating rational ``e``; values are mpq-compatible."""
    fn = _compile(sp.sympify(e), tuple(syms))

    def call(*vals):
        return fn(*[v if isinstance(v, type(mpq(0))) else mpq(v) for v in vals])

    return call


def compile_raw(e: sp.Expr, syms):
    """Like :func:`compile_expr` but the caller passes mpq values directly."""
    return _compile(sp.sympify(e), tuple(syms))


def rand_mpq(rng: random.Random):
    return mpq(rng.randint(-999, 999), rng.randint(1, 999))


def random_values(symbols, rng: random.Random) -> dict:
    out = {}
    for s in symbols:
        if s == E.ALT:
            out[s] = mpq(rng.choice((-1, 1)))
        elif s == E.N:
            out[s] = mpq(rng.randint(-999, 999))
        else:
            out[s] = rand_mpq(rng)
    return out


# --------------------------------------------------------------------------
# atoms as independent symbols


def _exp_key(arg):
    """Split an exp argument into integer multiples of plain symbols.

    Returns ``{symbol: int}`` or ``None`` when the argument has another shape.
    """
    d = sp.expand(arg).as_coefficients_dict()
    out = {}
    for term, c in d.items():
        if not (term.is_Symbol and c.is_Integer):
            return None
        out[term] = int(c)
    return out


class Atomizer:
    """Stable map from transcendental atoms to fresh symbols.

    ``exp(c1*v1 + c2*v2)`` with integer ``ci`` and plain-symbol ``vi`` becomes
    ``E_v1**c1 * E_v2**c2``, so products of exponentials stay consistent.
    """

    def __init__(self):
        self.table: dict = {}
        self.count = 0

    def _fresh(self, atom):
        if atom not in self.table:
            self.table[atom] = sp.Symbol(f"_a{self.count}")
            self.count += 1
        return self.table[atom]

    def __call__(self, e):
        e = sp.sympify(e)
        atoms = E.transcendental_atoms(e)
        if not atoms:
            return e
        # innermost first so nested atoms are already symbols
        repl = {}
        for a in sorted(atoms, key=sp.count_ops):
            arg = a.args[0].xreplace(repl) if repl else a.args[0]
            arg = self(arg) if E.transcendental_atoms(arg) else arg
            if isinstance(a, sp.exp):
                key = _exp_key(arg)
                if key is not None:
                    val = sp.Integer(1)
                    for v, c in key.items():
                        val *= self._fresh(sp.exp(v)) ** c
                    repl[a] = val
                    continue
            repl[a] = self._fresh(a.func(arg))
        return e.xreplace(repl)
