"""Exact linear algebra helpers on top of sympy's DomainMatrix."""

from __future__ import annotations

import sympy as sp
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix


def qq_matrix(rows, ncols: int) -> DomainMatrix:
    """DomainMatrix over QQ from a list of rows of mpq/int/Fraction."""
    conv = QQ.convert
    data = [[conv(v) for v in row] for row in rows]
    if not data:
        return DomainMatrix.zeros((0, ncols), QQ)
    return DomainMatrix(data, (len(data), ncols), QQ)


def nullspace_qq(rows, ncols: int) -> list[list]:
    """Basis of the right nullspace, each vector as a list of QQ elements."""
    if ncols == 0:
        return []
    M = qq_matrix(rows, ncols)
    if M.shape[0] == 0:
        return [[QQ(1) if i == j else QQ(0) for i in range(ncols)] for j in range(ncols)]
    ns = M.nullspace()
    return [[ns[i, j].element for j in range(ncols)] for i in range(ns.shape[0])]


def rref_qq(rows, ncols: int):
    """Reduced row echelon form and pivot columns."""
    M = qq_matrix(rows, ncols)
    R, piv = M.rref()
    out = []
    for i in range(len(piv)):
        out.append([R[i, j].element for j in range(ncols)])
    return out, list(piv)


def rank_qq(rows, ncols: int) -> int:
    return len(rref_qq(rows, ncols)[1])


def frac_field(symbols):
    symbols = list(symbols)
    return QQ.frac_field(*symbols) if symbols else QQ


def sympy_matrix_over(rows, K) -> DomainMatrix:
    ncols = len(rows[0]) if rows else 0
    data = [[K.from_sympy(sp.sympify(v)) for v in row] for row in rows]
    return DomainMatrix(data, (len(data), ncols), K)


def solve_left(rows, target, symbols):
    """Find ``lam`` with ``sum_i lam[i]*rows[i] == target`` over the rational-function field.

    ``rows`` and ``target`` hold sympy expressions rational in ``symbols``.
    Returns a list of sympy expressions, or ``None`` when ``target`` is not in
    the row space.
    """
    if not rows:
        return None
    K = frac_field(symbols)
    A = sympy_matrix_over(rows, K)  # m x c
    m, c = A.shape
    t = sympy_matrix_over([target], K)  # 1 x c
    # augmented transpose: A^T lam = t^T
    At = A.transpose()
    aug = At.hstack(t.transpose())
    R, piv = aug.rref()
    if m in piv:
        return None
    lam = [K.zero] * m
    for i, p in enumerate(piv):
        lam[p] = R[i, m].element
    return [K.to_sympy(v) for v in lam]


# --------------------------------------------------------------------------
# multi-modular nullspace for large, dense rational systems

import numpy as np
import gmpy2

_PRIMES = [
    2147483629, 2147483587, 2147483579, 2147483563, 2147483549,
    2147483543, 2147483497, 2147483489, 2147483477, 2147483423,
    2147483399, 2147483353, 2147483323, 2147483269, 2147483249,
    2147483237, 2147483179, 2147483171, 2147483137, 2147483123,
]


def _to_mod(rows, p):
    out = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=np.int64)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            v = gmpy2.mpq(v)
            d = int(v.denominator % p)
            if d == 0:
                raise ZeroDivisionError
            out[i, j] = int(v.numerator % p) * pow(d, -1, p) % p
    return out


def rref_mod(M: np.ndarray, p: int):
    """In-place RREF of an int64 matrix modulo a prime below 2**31."""
    M = M % p
    nrows, ncols = M.shape
    piv = []
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        nz = np.nonzero(M[r:, c])[0]
        if nz.size == 0:
            continue
        i = r + int(nz[0])
        if i != r:
            M[[r, i]] = M[[i, r]]
        inv = pow(int(M[r, c]), -1, p)
        M[r] = (M[r] * inv) % p
        col = M[:, c].copy()
        col[r] = 0
        nzr = np.nonzero(col)[0]
        if nzr.size:
            M[nzr] = (M[nzr] - (col[nzr, None] * M[r][None, :]) % p) % p
        piv.append(c)
        r += 1
    return M[:r], piv


def _nullspace_from_rref(R, piv, ncols, p):
    free = [c for c in range(ncols) if c not in set(piv)]
    vecs = []
    for f in free:
        v = np.zeros(ncols, dtype=np.int64)
        v[f] = 1
        for i, c in enumerate(piv):
            v[c] = (-R[i, f]) % p
        vecs.append(v)
    return free, vecs


def rational_reconstruct(a: int, m: int):
    """``n/d`` with ``n/d = a mod m`` and ``|n|, d <= sqrt(m/2)``; or None."""
    a %= m
    bound = gmpy2.isqrt(m // 2)
    r0, r1 = m, a
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if s1 == 0 or abs(s1) > bound:
        return None
    if gmpy2.gcd(s1, m) != 1:
        return None
    return gmpy2.mpq(r1, s1) if s1 > 0 else gmpy2.mpq(-r1, -s1)


def _check(rows, vec, sample):
    for row in sample:
        acc = gmpy2.mpq(0)
        for a, b in zip(rows[row], vec):
            if b:
                acc += a * b
        if acc:
            return False
    return True


def nullspace_modular(rows, ncols: int, max_primes: int = 12, check_rows: int = 48):
    """Exact nullspace basis (RREF-normalized) via CRT over several primes.

    The result is checked against a sample of the exact rational rows; it is
    the same basis :func:`nullspace_qq` would return.
    """
    if ncols == 0:
        return []
    if not rows:
        return [[gmpy2.mpq(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    import random as _r

    rng = _r.Random(ncols * 7919 + len(rows))
    sample = list(range(len(rows)))
    if len(sample) > check_rows:
        sample = rng.sample(sample, check_rows)
    best = None  # (piv, free)
    acc = None
    modulus = 1
    used = 0
    for p in _PRIMES:
        try:
            M = _to_mod(rows, p)
        except ZeroDivisionError:
            continue
        R, piv = rref_mod(M, p)
        if best is not None and len(piv) < len(best):
            continue  # unlucky prime
        free, vecs = _nullspace_from_rref(R, piv, ncols, p)
        if best is None or len(piv) > len(best) or piv != best:
            best = piv
            acc = [[int(x) for x in v] for v in vecs]
            modulus = p
            used = 1
        else:
            # CRT combine
            newacc = []
            for old, v in zip(acc, vecs):
                row = []
                for a, b in zip(old, v):
                    b = int(b)
                    t = ((b - a) * pow(modulus, -1, p)) % p
                    row.append(a + modulus * t)
                newacc.append(row)
            acc = newacc
            modulus *= p
            used += 1
        out = []
        ok = True
        for v in acc:
            rv = []
            for a in v:
                q = rational_reconstruct(a, modulus)
                if q is None:
                    ok = False
                    break
                rv.append(q)
            if not ok:
                break
            out.append(rv)
        if ok and all(_check(rows, v, sample) for v in out):
            return out
        if used >= max_primes:
            break
    raise ArithmeticError("modular nullspace did not stabilise")
