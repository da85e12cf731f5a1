"""Recurrences, annihilation operators and the linear conditions they impose.

A recurrence of order ``2k`` is stored as ``x[n+k] = F`` with ``F`` on the
offsets ``-k..k-1`` and optionally ``x[n-k] = Ft`` with ``Ft`` on ``-k+1..k``.

Conditions are linear in formal jet symbols ``l_d{...}`` standing for the
partial derivatives of ``l = dL_{n-k}/dx[n]`` (forward, offsets ``-k..0``) or
``lt = dL_n/dx[n]`` (backward, offsets ``0..k``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import sympy as sp

from . import expr as E
from .grammar import parse, parse_raw, render
from .variational import raw_shift


class RecurrenceError(ValueError):
    pass


class KOneError(RecurrenceError):
    def __init__(self):
        super().__init__(
            "k = 1 is not supported: with a single backward variable besides "
            "x[n-k] there is no nontrivial annihilation operator, so the method "
            "gives no conditions"
        )


class DegenerateError(RecurrenceError):
    pass


class RoundTripError(RecurrenceError):
    pass


class ExtractionError(RuntimeError):
    pass


FWD, BWD, MIXED = "fwd", "bwd", "mixed"


# --------------------------------------------------------------------------
# recurrences


@dataclass(frozen=True)
class Recurrence:
    k: int
    forward: sp.Expr
    backward: sp.Expr | None = None
    autonomous: bool = True
    params: tuple = ()

    def __post_init__(self):
        if self.k < 2:
            raise KOneError() if self.k == 1 else RecurrenceError(f"k must be >= 2, got {self.k}")
        F = E.canonicalize(self.forward)
        object.__setattr__(self, "forward", F)
        _check_offsets(F, -self.k, self.k - 1, "forward law")
        if E.is_zero(E.diff(F, E.X(-self.k))):
            raise DegenerateError(f"forward law does not depend on x[n-{self.k}]")
        if self.backward is not None:
            B = E.canonicalize(self.backward)
            object.__setattr__(self, "backward", B)
            _check_offsets(B, -self.k + 1, self.k, "backward law")
            back = B.xreplace({E.X(self.k): F})
            if not E.is_zero(back - E.X(-self.k)):
                raise RoundTripError("backward law is not the inverse of the forward law")
        aut = not E.depends_on_n(F)
        object.__setattr__(self, "autonomous", aut)
        ps = tuple(sorted(E.parameters(F), key=lambda s: s.name))
        if self.params:
            missing = [s for s in ps if s.name not in {str(p) for p in self.params}]
            if missing:
                raise RecurrenceError(f"undeclared parameters: {', '.join(map(str, missing))}")
        object.__setattr__(self, "params", ps)

    @property
    def equation(self) -> sp.Expr:
        return E.X(self.k) - self.forward


def _check_offsets(e, lo, hi, what):
    offs = E.offsets(e)
    if offs and (min(offs) < lo or max(offs) > hi):
        raise RecurrenceError(f"{what} uses offsets {sorted(offs)} outside {lo}..{hi}")


def _solve_affine(eq, v):
    """Solve ``eq = 0`` for ``v`` when it is affine in ``v``; else ``None``."""
    a = E.diff(eq, v)
    if a == 0 or v in a.free_symbols or not E.is_zero(E.diff(a, v)):
        return None
    b = E.canonicalize(eq.xreplace({v: 0}))
    return E.canonicalize(-b / a)


def _solve_for(eq, v):
    sol = _solve_affine(eq, v)
    if sol is not None:
        return sol
    try:
        sols = sp.solve(eq, v, dict=False)
    except NotImplementedError:
        sols = []
    sols = [s for s in sols if not s.has(sp.I)]
    if len(sols) != 1:
        raise RecurrenceError(f"cannot solve the equation uniquely for {v}")
    return E.canonicalize(sols[0])


def _read_law(text: str, target: sp.Symbol):
    text = text.strip()
    if "=" in text:
        lhs, rhs = text.split("=", 1)
        eq = parse_raw(lhs) - parse_raw(rhs)
        if sp.sympify(parse_raw(lhs)) == target:
            return E.canonicalize(parse_raw(rhs))
        return _solve_for(E.canonicalize(eq), target)
    return parse(text)


def make_recurrence(
    forward_text: str,
    k: int,
    backward_text: str | None = None,
    params: Sequence[str] = (),
) -> Recurrence:
    """Build a validated recurrence.

    ``forward_text`` is either the right-hand side ``F`` of ``x[n+k] = F`` or
    a full equation ``lhs = rhs`` which is solved for ``x[n+k]``.  Without a
    backward law one is derived when ``F`` is affine in ``x[n-k]``.
    """
    if k == 1:
        raise KOneError()
    if k < 1:
        raise RecurrenceError(f"k must be >= 2, got {k}")
    F = _read_law(forward_text, E.X(k))
    if E.is_zero(E.diff(F, E.X(-k))):
        raise DegenerateError(f"forward law does not depend on x[n-{k}]")
    if backward_text is not None:
        B = _read_law(backward_text, E.X(-k))
    else:
        B = _solve_affine(E.X(k) - F, E.X(-k))
    return Recurrence(k, F, B, params=tuple(sp.Symbol(p) for p in params))


# --------------------------------------------------------------------------
# annihilation operators


@dataclass(frozen=True)
class AnnihilationOperator:
    """``a d/dx[n-k] - b d/dx[n-m]`` (forward) or ``a d/dx[n+k] - b d/dx[n+m]`` (backward)."""

    direction: str
    m: int
    k: int
    a: sp.Expr
    b: sp.Expr

    @property
    def targets(self) -> tuple[sp.Symbol, sp.Symbol]:
        s = -1 if self.direction == FWD else 1
        return E.X(s * self.k), E.X(s * self.m)

    def apply(self, G):
        u, v = self.targets
        return E.canonicalize(self.a * sp.diff(G, u) - self.b * sp.diff(G, v))

    def __str__(self):
        u, v = self.targets
        return f"({render(self.a)})*d/d{u} - ({render(self.b)})*d/d{v}"


def forward_annihilators(r: Recurrence) -> list[AnnihilationOperator]:
    F = r.forward
    b = E.diff(F, E.X(-r.k))
    return [
        AnnihilationOperator(FWD, m, r.k, E.diff(F, E.X(-m)), b) for m in range(1, r.k)
    ]


def backward_annihilators(r: Recurrence) -> list[AnnihilationOperator]:
    if r.backward is None:
        raise RecurrenceError("backward law absent")
    B = r.backward
    b = E.diff(B, E.X(r.k))
    return [
        AnnihilationOperator(BWD, m, r.k, E.diff(B, E.X(m)), b) for m in range(1, r.k)
    ]


# --------------------------------------------------------------------------
# condition systems


@dataclass(frozen=True)
class Constraint:
    expr: sp.Expr
    m: int
    direction: str
    extraction: str  # raw | numerator-coefficient | cross-derivative | compatibility


@dataclass(frozen=True)
class ConditionSystem:
    direction: str
    k: int
    offsets: tuple[int, ...]
    constraints: tuple[Constraint, ...]
    extras: tuple[Constraint, ...] = field(default=())
    prefix: str = "l"

    def exprs(self, with_extras: bool = False) -> list[sp.Expr]:
        cs = [c.expr for c in self.constraints]
        if with_extras:
            cs += [c.expr for c in self.extras]
        return cs

    def jets(self, with_extras: bool = True) -> list[sp.Symbol]:
        js = set()
        for e in self.exprs(with_extras):
            js |= {s for s in e.free_symbols if E.is_jet(s)}
        return sorted(js, key=jet_order)

    def serialize(self) -> str:
        lines = [f"# conditions direction={self.direction} k={self.k}"]
        lines.append("# unknown offsets " + " ".join(str(o) for o in self.offsets))
        for c in self.constraints:
            lines.append(f"m={c.m} {c.extraction}: {render(c.expr)}")
        for c in self.extras:
            lines.append(f"m={c.m} {c.extraction}: {render(c.expr)}")
        return "\n".join(lines) + "\n"


def parse_conditions(text: str) -> list[sp.Expr]:
    """Constraint expressions from a serialized system (or a bare list of lines)."""
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ": " in line:
            line = line.split(": ", 1)[1]
        if "=" in line:
            lhs, rhs = line.split("=", 1)
            out.append(parse(f"({lhs}) - ({rhs})"))
        else:
            out.append(parse(line))
    return out


def jet_order(s):
    """Highest derivative first, then by offsets."""
    offs = E.jet_offsets(s)
    return (-len(offs), tuple(offs), E.jet_prefix(s))


def _jet_allowed(offs, allowed):
    return allowed is None or all(o in allowed for o in offs)


def _jet(offs, allowed, prefix="l"):
    return E.jet(tuple(offs), prefix) if _jet_allowed(offs, allowed) else sp.Integer(0)


def _ratio_forward(r: Recurrence, m: int):
    F = r.forward
    return E.canonicalize(E.raw_diff(F, E.X(-m)) / E.raw_diff(F, E.X(-r.k)))


def _ratio_backward(r: Recurrence, m: int):
    B = r.backward
    return E.canonicalize(E.raw_diff(B, E.X(m)) / E.raw_diff(B, E.X(r.k)))


def raw_constraint(r: Recurrence, m: int, direction: str, allowed=None) -> sp.Expr:
    """``d/dx[n-+k] { R_m * l_{-+k} - l_{-+m} }`` expanded in jets."""
    k = r.k
    if direction == FWD:
        R = _ratio_forward(r, m)
        e, mm = -k, -m
    else:
        R = _ratio_backward(r, m)
        e, mm = k, m
    dR = E.diff(R, E.X(e))
    return (
        dR * _jet([e], allowed)
        + R * _jet([e, e], allowed)
        - _jet([mm, e], allowed)
    )


def _collect(expr) -> dict:
    """Split a jet-linear expression into ``{jet: coefficient}``."""
    expr = sp.expand(expr, deep=False, mul=True, multinomial=False, power_exp=False, log=False)
    out: dict = {}
    for t in sp.Add.make_args(expr):
        js = [s for s in t.free_symbols if E.is_jet(s)]
        if len(js) != 1:
            if not js and t == 0:
                continue
            raise ExtractionError(f"term {t} is not linear in a single jet")
        j = js[0]
        out[j] = out.get(j, 0) + t / j
    return {j: E.canonicalize(c) for j, c in out.items() if E.canonicalize(c) != 0}


def jet_coefficients(expr) -> dict:
    return _collect(expr)


def _has_spurious(c, spurious) -> bool:
    return bool(c.free_symbols & spurious)


def _rational_in(coefs: dict, spurious) -> bool:
    for c in coefs.values():
        for a in E.transcendental_atoms(c):
            if a.free_symbols & spurious:
                return False
    return True


def normalize_constraint(coefs: dict) -> sp.Expr:
    """Primitive, sign-fixed polynomial form of ``sum c_J l_J``."""
    if not coefs:
        return sp.Integer(0)
    jets = sorted(coefs, key=jet_order)
    nums = []
    dens = []
    for j in jets:
        n, d = sp.fraction(sp.together(coefs[j]))
        nums.append(n)
        dens.append(d)
    lcm = sp.lcm_list(dens) if len(dens) > 1 else dens[0]
    polys = [sp.expand(sp.cancel(n * lcm / d)) for n, d in zip(nums, dens)]
    g = sp.gcd_list(polys) if len(polys) > 1 else polys[0]
    if g != 0:
        polys = [sp.expand(sp.cancel(p / g)) for p in polys]
    lead = polys[0]
    gens = sorted(lead.free_symbols, key=lambda s: s.name)
    if gens:
        lc = sp.Poly(lead, *gens).LC() if lead.is_polynomial(*gens) else sp.Integer(1)
    else:
        lc = lead
    try:
        neg = bool(lc.is_number and lc < 0)
    except TypeError:
        neg = False
    if neg:
        polys = [-p for p in polys]
    return sp.Add(*[p * j for p, j in zip(polys, jets)])


def _extract(expr, spurious: set, depth: int = 0):
    """Yield ``(constraint, rule)`` pairs free of the spurious variables."""
    coefs = _collect(expr)
    if not coefs:
        return
    if not any(_has_spurious(c, spurious) for c in coefs.values()):
        yield sum(c * j for j, c in coefs.items()), "raw"
        return
    if _rational_in(coefs, spurious):
        jets = list(coefs)
        total = sp.together(sum(coefs[j] * j for j in jets))
        num, _ = sp.fraction(sp.cancel(total))
        gens = sorted(spurious & num.free_symbols, key=E.stencil_offset)
        poly = sp.Poly(sp.expand(num), *gens)
        for c in poly.coeffs():
            yield E.canonicalize(c), "numerator-coefficient"
        return
    if depth > 4:
        raise ExtractionError("cross-derivative extraction did not terminate")
    for v in sorted(spurious, key=E.stencil_offset):
        d = sum(E.diff(c, v) * j for j, c in coefs.items())
        for c, rule in _extract(d, spurious, depth + 1):
            yield c, "cross-derivative" if rule == "raw" else rule


def allowed_offsets(k: int, direction: str, sparsity) -> set | None:
    """Jet offsets permitted by a density sparsity declared on ``0..k``."""
    if sparsity is None:
        return None
    s = set(int(o) for o in sparsity)
    if direction == FWD:
        return {o - k for o in s}
    return s


def compatibility_extras(r: Recurrence, direction: str, allowed=None) -> list[Constraint]:
    """Second-derivative conditions implied by the full compatibility relation.

    Differentiating ``R_m l_{-k} - l_{-m}`` (which equals a sum of shifted
    second derivatives of ``L``) by ``x[n+k-m]`` isolates a single shifted
    jet; when ``R_m`` does not depend on ``x[n+k-m]`` that jet must vanish.
    """
    k = r.k
    out = []
    for m in range(1, k):
        if direction == FWD:
            R = _ratio_forward(r, m)
            v, j = E.X(k - m), (m - k, -k)
        else:
            R = _ratio_backward(r, m)
            v, j = E.X(m - k), (k - m, k)
        if E.is_zero(E.diff(R, v)):
            jt = _jet(j, allowed)
            if jt != 0:
                out.append(Constraint(jt, m, direction, "compatibility"))
    return out


def condition_system(r: Recurrence, direction: str = FWD, sparsity=None) -> ConditionSystem:
    if direction not in (FWD, BWD):
        raise ValueError(f"direction must be {FWD} or {BWD}")
    if direction == BWD and r.backward is None:
        raise RecurrenceError("backward law absent")
    k = r.k
    allowed = allowed_offsets(k, direction, sparsity)
    if direction == FWD:
        offs = tuple(range(-k, 1))
        spurious = {E.X(i) for i in range(1, k)}
    else:
        offs = tuple(range(0, k + 1))
        spurious = {E.X(-i) for i in range(1, k)}
    if allowed is not None:
        offs = tuple(o for o in offs if o in allowed)
    seen = set()
    cons = []
    for m in range(1, k):
        raw = raw_constraint(r, m, direction, allowed)
        for c, rule in _extract(raw, spurious):
            coefs = _collect(c)
            if not coefs:
                continue
            if any(_has_spurious(x, spurious) for x in coefs.values()):
                raise ExtractionError(f"constraint still depends on spurious variables: {c}")
            norm = normalize_constraint(coefs)
            key = render(norm)
            if key in seen:
                continue
            seen.add(key)
            cons.append(Constraint(norm, m, direction, rule))
    extras = tuple(compatibility_extras(r, direction, allowed))
    return ConditionSystem(direction, k, offs, tuple(cons), extras)


# --------------------------------------------------------------------------
# mixed forward/backward systems in the jet space of L itself


def to_L_jets(e, direction: str, k: int):
    """Rewrite an l-jet constraint as a constraint on jets of ``L_n``.

    Forward ``l = dL_{n-k}/dx[n]``: shift by ``+k`` so ``l_J -> L_{k, J+k}``.
    Backward ``lt = dL_n/dx[n]``: ``lt_J -> L_{0, J}``.
    """
    e = sp.sympify(e)
    if direction == FWD:
        e = raw_shift(e, k)
    repl = {}
    for s in e.free_symbols:
        offs = E.jet_offsets(s)
        if offs is None:
            continue
        if direction == FWD:
            repl[s] = E.jet((k,) + tuple(o + k for o in offs), "L")
        else:
            repl[s] = E.jet((0,) + tuple(offs), "L")
    return E.canonicalize(e.xreplace(repl))


def mixed_system(r: Recurrence, sparsity=None) -> ConditionSystem:
    fw = condition_system(r, FWD, sparsity)
    cons = [
        Constraint(to_L_jets(c.expr, FWD, r.k), c.m, FWD, c.extraction)
        for c in fw.constraints
    ]
    extras = [
        Constraint(to_L_jets(c.expr, FWD, r.k), c.m, FWD, c.extraction) for c in fw.extras
    ]
    if r.backward is not None:
        bw = condition_system(r, BWD, sparsity)
        cons += [
            Constraint(to_L_jets(c.expr, BWD, r.k), c.m, BWD, c.extraction)
            for c in bw.constraints
        ]
        extras += [
            Constraint(to_L_jets(c.expr, BWD, r.k), c.m, BWD, c.extraction)
            for c in bw.extras
        ]
    return ConditionSystem(MIXED, r.k, tuple(range(0, r.k + 1)), tuple(cons), tuple(extras), "L")


# --------------------------------------------------------------------------
# comparison


def row_space_rref(exprs, jets=None):
    """RREF of the jet-coefficient matrix over the rational-function field."""
    from .linalg import frac_field, sympy_matrix_over

    coefs = [_collect(e) for e in exprs]
    coefs = [c for c in coefs if c]
    if jets is None:
        jets = sorted({j for c in coefs for j in c}, key=jet_order)
    if not coefs:
        return jets, []
    # transcendental atoms become generators of the field
    from .numeric import Atomizer

    at = Atomizer()
    rows = [[at(c.get(j, 0)) for j in jets] for c in coefs]
    syms = sorted({s for row in rows for v in row for s in sp.sympify(v).free_symbols}, key=str)
    K = frac_field(syms)
    M = sympy_matrix_over(rows, K)
    R, piv = M.rref()
    back = {v: a for a, v in at.table.items()}
    out = []
    for i in range(len(piv)):
        out.append(
            [E.canonicalize(K.to_sympy(R[i, j].element).xreplace(back)) for j in range(len(jets))]
        )
    return jets, out


def same_row_space(a, b) -> bool:
    """Whether two jet-linear systems span the same space of conditions."""
    ja = {s for e in a for s in sp.sympify(e).free_symbols if E.is_jet(s)}
    jb = {s for e in b for s in sp.sympify(e).free_symbols if E.is_jet(s)}
    jets = sorted(ja | jb, key=jet_order)
    _, ra = row_space_rref(a, jets)
    _, rb = row_space_rref(b, jets)
    if len(ra) != len(rb):
        return False
    return all(E.is_zero(x - y) for r1, r2 in zip(ra, rb) for x, y in zip(r1, r2))
