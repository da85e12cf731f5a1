"""Text front end: a small Pratt parser and a deterministic renderer.

Grammar (informally)::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?
    atom   := number | ident | 'n' | 'x[n' ('+'|'-') int ']' | 'x[n]'
            | jet | fname '(' expr ')' | '(' expr ')'

``(-1)^n`` and ``(-1)^(n+j)`` map to the alternating atom.
"""

from __future__ import annotations

import sympy as sp
from sympy.printing.precedence import PRECEDENCE
from sympy.printing.str import StrPrinter

from . import expr as E


class ParseError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at offset {pos}")
        self.msg = msg
        self.pos = pos


_BUILTINS = {"log": sp.log, "exp": sp.exp}


class _Token:
    __slots__ = ("kind", "value", "pos")

    def __init__(self, kind, value, pos):
        self.kind = kind
        self.value = value
        self.pos = pos

    def __repr__(self):
        return f"_Token({self.kind!r}, {self.value!r}, {self.pos})"


def _ident_char(c: str, first: bool) -> bool:
    return c == "_" or c.isalpha() or (not first and c.isdigit())


def tokenize(text: str) -> list[_Token]:
    toks = []
    i = 0
    L = len(text)
    while i < L:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < L and text[i + 1].isdigit()):
            j = i
            while j < L and text[j].isdigit():
                j += 1
            if j < L and text[j] == ".":
                j += 1
                while j < L and text[j].isdigit():
                    j += 1
            toks.append(_Token("num", sp.Rational(text[i:j]), i))
            i = j
            continue
        if _ident_char(c, True):
            j = i + 1
            while j < L and _ident_char(text[j], False):
                j += 1
            name = text[i:j]
            if name == "x" and j < L and text[j] == "[":
                sym, j = _lex_stencil(text, i, j)
                toks.append(_Token("sym", sym, i))
            elif name in ("l_d", "L_d") and j < L and text[j] == "{":
                close = text.find("}", j)
                if close < 0:
                    raise ParseError("unterminated jet symbol", j)
                body = text[j + 1 : close].strip()
                try:
                    offs = tuple(int(t) for t in body.split(",")) if body else ()
                except ValueError:
                    raise ParseError("bad jet offsets", j + 1) from None
                toks.append(_Token("sym", E.jet(offs, name[0]), i))
                j = close + 1
            else:
                toks.append(_Token("ident", name, i))
            i = j
            continue
        if c in "+-*/^(),":
            toks.append(_Token(c, c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    toks.append(_Token("eof", None, L))
    return toks


def _lex_stencil(text: str, start: int, j: int):
    # text[j] == '['
    k = j + 1
    L = len(text)
    if k >= L or text[k] != "n":
        raise ParseError("expected 'n' in stencil index", k)
    k += 1
    if k < L and text[k] == "]":
        return E.X(0), k + 1
    if k >= L or text[k] not in "+-":
        raise ParseError("expected '+', '-' or ']' in stencil index", k)
    sign_pos = k
    sign = 1 if text[k] == "+" else -1
    k += 1
    d0 = k
    while k < L and text[k].isdigit():
        k += 1
    if k == d0:
        raise ParseError("expected integer stencil offset", sign_pos)
    if k < L and text[k] == ".":
        raise ParseError("non-integer stencil offset", sign_pos)
    if k >= L or text[k] != "]":
        raise ParseError("expected ']' after stencil offset", sign_pos if k >= L else k)
    return E.X(sign * int(text[d0:k])), k + 1


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        t = self.toks[self.i]
        if kind is not None and t.kind != kind:
            what = "end of input" if t.kind == "eof" else repr(t.value)
            raise ParseError(f"expected {kind!r}, found {what}", t.pos)
        self.i += 1
        return t

    # binding powers
    _INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}

    def parse(self):
        e = self.expr(0)
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(f"unexpected {t.value!r}", t.pos)
        return e

    def expr(self, rbp: int):
        left = self.nud(self.take())
        while True:
            t = self.peek()
            lbp = self._INFIX.get(t.kind, 0)
            if lbp <= rbp:
                return left
            self.take()
            left = self.led(t, left)

    def nud(self, t):
        k = t.kind
        if k == "num":
            return t.value
        if k == "sym":
            return t.value
        if k == "ident":
            name = t.value
            if self.peek().kind == "(":
                fn = _BUILTINS.get(name) or E.defined_function(name)
                if fn is None:
                    raise ParseError(f"unknown function {name!r}", t.pos)
                self.take("(")
                arg = self.expr(0)
                self.take(")")
                return fn(arg)
            if name == "n":
                return E.N
            if name in _BUILTINS or E.defined_function(name) is not None:
                raise ParseError(f"function {name!r} needs an argument", t.pos)
            return sp.Symbol(name)
        if k == "(":
            e = self.expr(0)
            self.take(")")
            return e
        if k == "-":
            # unary minus binds looser than ^ so that -x^2 = -(x^2)
            return -self.expr(30)
        if k == "+":
            return self.expr(30)
        if k == "eof":
            raise ParseError("unexpected end of input", t.pos)
        raise ParseError(f"unexpected {t.value!r}", t.pos)

    def led(self, t, left):
        k = t.kind
        if k == "+":
            return left + self.expr(10)
        if k == "-":
            return left - self.expr(10)
        if k == "*":
            return left * self.expr(20)
        if k == "/":
            right = self.expr(20)
            if right == 0:
                raise ParseError("division by zero", t.pos)
            return left / right
        if k == "^":
            right = self.expr(39)  # right associative
            return _power(left, right, t.pos)
        raise ParseError(f"unexpected {t.value!r}", t.pos)


def _power(base, ex, pos):
    if base == -1 and E.N in sp.sympify(ex).free_symbols:
        j = sp.expand(ex - E.N)
        if not j.is_Integer:
            raise ParseError("only (-1)^(n+integer) is supported", pos)
        return E.ALT * (-1) ** int(j)
    if E.offsets(ex) or E.N in sp.sympify(ex).free_symbols:
        raise ParseError("exponent may not depend on stencil variables or n", pos)
    return sp.Pow(base, ex)


def parse_raw(text: str) -> sp.Expr:
    """Parse without canonicalizing."""
    return sp.sympify(_Parser(text).parse())


def parse(text: str) -> sp.Expr:
    return E.canonicalize(parse_raw(text))


# --------------------------------------------------------------------------
# rendering


class _Printer(StrPrinter):
    def _print_Symbol(self, s):
        return s.name

    def _print_Exp1(self, e):
        return "exp(1)"

    def _print_Pow(self, p, rational=False):
        b, ex = p.as_base_exp()
        if ex == -1:
            return "1/" + self.parenthesize(b, PRECEDENCE["Pow"], strict=False)
        bs = self.parenthesize(b, PRECEDENCE["Pow"], strict=True)
        if b.is_Symbol:
            bs = self._print(b)
            if b == E.ALT:
                bs = "((-1)^n)"
        if ex.is_Integer and ex >= 0:
            es = str(ex)
        else:
            es = "(" + self._print(ex) + ")"
        return f"{bs}^{es}"

    def _print_Rational(self, r):
        return f"{r.p}/{r.q}" if r.q != 1 else str(r.p)


_PRINTER = _Printer({"order": "lex"})


def render(e) -> str:
    """Deterministic text in the parse grammar."""
    return _PRINTER.doprint(sp.sympify(e))
