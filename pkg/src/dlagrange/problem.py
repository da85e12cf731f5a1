"""Line-oriented problem files and expected-outcome sidecars.

A problem file looks like::

    # free text comments
    k=2
    params=A, B, C
    autonomous=true
    equation: x[n+2]*(1-x[n+1]^2) + ... = ...
      (indented lines continue the previous entry)
    lagrangian: ...

Header keys use ``key=value``; expression entries use ``key: text``.
Recognised header keys: ``k``, ``params``, ``autonomous``, ``sparsity``,
``direction``, ``degree``, ``total_degree``, ``param_degree``, ``atoms`` and
``ell_atoms`` (``;``-separated), ``seed``, ``certify_depth``.  Expression entries:
``forward`` (or ``equation``), ``backward``, ``lagrangian``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path


from . import expr as E
from .annihilate import FWD, BWD, MIXED, Recurrence, make_recurrence
from .grammar import parse
from .solve import InvertConfig
from .variational import LagrangianDensity


class ProblemError(ValueError):
    pass


_HEADER = {
    "k", "params", "autonomous", "sparsity", "direction", "degree", "total_degree",
    "param_degree", "atoms", "ell_atoms", "seed", "certify_depth",
}
_BODY = {"forward", "equation", "backward", "lagrangian"}


def _split_entries(text: str, allowed_header, allowed_body, what: str):
    header: dict[str, str] = {}
    body: dict[str, str] = {}
    last = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if raw[:1].isspace():
            if last is None:
                raise ProblemError(f"{what} line {lineno}: continuation without an entry")
            body[last] += " " + line.strip()
            continue
        colon = line.find(":")
        eq = line.find("=")
        if colon > 0 and (eq < 0 or colon < eq):
            key, val = line[:colon].strip(), line[colon + 1 :].strip()
            if key not in allowed_body:
                raise ProblemError(f"{what} line {lineno}: unknown entry {key!r}")
            if key in body:
                raise ProblemError(f"{what} line {lineno}: duplicate entry {key!r}")
            body[key] = val
            last = key
        elif eq > 0:
            key, val = line[:eq].strip(), line[eq + 1 :].strip()
            if key not in allowed_header:
                raise ProblemError(f"{what} line {lineno}: unknown header {key!r}")
            header[key] = val
            last = None
        else:
            raise ProblemError(f"{what} line {lineno}: expected 'key=value' or 'key: expression'")
    return header, body


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ProblemError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in s.replace(",", " ").split())
    except ValueError:
        raise ProblemError(f"not a list of integers: {s!r}") from None


@dataclass(frozen=True)
class ProblemFile:
    k: int
    forward: str | None = None
    backward: str | None = None
    lagrangian: str | None = None
    params: tuple[str, ...] | None = None
    autonomous: bool | None = None
    sparsity: tuple[int, ...] | None = None
    overrides: dict = field(default_factory=dict)
    name: str = "<input>"

    @classmethod
    def parse(cls, text: str, name: str = "<input>") -> "ProblemFile":
        header, body = _split_entries(text, _HEADER, _BODY, name)
        if "k" not in header:
            raise ProblemError(f"{name}: missing 'k=' header")
        try:
            k = int(header["k"])
        except ValueError:
            raise ProblemError(f"{name}: k must be an integer") from None
        if "forward" in body and "equation" in body:
            raise ProblemError(f"{name}: give either 'forward:' or 'equation:', not both")
        params = None
        if "params" in header:
            params = tuple(p.strip() for p in header["params"].split(",") if p.strip())
        ov = {}
        if "direction" in header:
            d = header["direction"].strip()
            if d not in (FWD, BWD, MIXED):
                raise ProblemError(f"{name}: direction must be fwd, bwd or mixed")
            ov["direction"] = d
        for key in ("degree", "total_degree", "param_degree", "seed", "certify_depth"):
            if key in header:
                try:
                    ov[key] = int(header[key])
                except ValueError:
                    raise ProblemError(f"{name}: {key} must be an integer") from None
        for key in ("atoms", "ell_atoms"):
            if key in header:
                ov[key] = tuple(a.strip() for a in header[key].split(";") if a.strip())
        return cls(
            k=k,
            forward=body.get("forward", body.get("equation")),
            backward=body.get("backward"),
            lagrangian=body.get("lagrangian"),
            params=params,
            autonomous=_bool(header["autonomous"]) if "autonomous" in header else None,
            sparsity=_ints(header["sparsity"]) if "sparsity" in header else None,
            overrides=ov,
            name=name,
        )

    @classmethod
    def read(cls, path) -> "ProblemFile":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ProblemError(f"cannot read {p}: {exc.strerror}") from None
        return cls.parse(text, p.name)

    def _check_params(self, e, what):
        if self.params is None:
            return
        used = {s.name for s in E.parameters(e)}
        missing = sorted(used - set(self.params))
        if missing:
            raise ProblemError(f"{self.name}: undeclared parameters in {what}: {', '.join(missing)}")

    def recurrence(self) -> Recurrence:
        if self.forward is None:
            raise ProblemError(f"{self.name}: no 'forward:' or 'equation:' entry")
        r = make_recurrence(self.forward, self.k, self.backward, self.params or ())
        if self.autonomous is not None and self.autonomous != r.autonomous:
            raise ProblemError(f"{self.name}: autonomous={self.autonomous} but the law says otherwise")
        return r

    def density(self) -> LagrangianDensity:
        if self.lagrangian is None:
            raise ProblemError(f"{self.name}: no 'lagrangian:' entry")
        d = parse(self.lagrangian)
        self._check_params(d, "lagrangian")
        return LagrangianDensity(d, self.k)

    def config(self, **cli) -> InvertConfig:
        """Invert settings: file overrides first, then non-None CLI values."""
        cfg = InvertConfig(sparsity=self.sparsity)
        vals = dict(self.overrides)
        vals.update({k: v for k, v in cli.items() if v is not None})
        return replace(cfg, **vals)


# --------------------------------------------------------------------------
# expected-outcome sidecars

_EXPECT_HEADER = {"outcome", "checks"}
_EXPECT_BODY = {"equivalent", "condition", "el"}


@dataclass(frozen=True)
class Expectation:
    """What a corpus entry must produce.

    ``checks`` lists the stages to run: ``invert`` (outcome, and scale
    equivalence to ``equivalent`` if given), ``el`` (the file's Lagrangian
    solves the law; if ``el`` is given its EL expression must equal it) and
    ``conditions`` (row space equals the ``condition`` lines).
    """

    checks: tuple[str, ...]
    outcome: str | None = None
    equivalent: str | None = None
    el: str | None = None
    conditions: tuple[str, ...] = ()

    @classmethod
    def parse(cls, text: str, name: str = "<expect>") -> "Expectation":
        conds = []
        other = []
        for line in text.splitlines():
            if line.strip().startswith("condition:"):
                conds.append(line.split(":", 1)[1].strip())
            else:
                other.append(line)
        header, body = _split_entries("\n".join(other), _EXPECT_HEADER, _EXPECT_BODY, name)
        checks = tuple(c.strip() for c in header.get("checks", "invert").split(",") if c.strip())
        bad = set(checks) - {"invert", "el", "conditions"}
        if bad:
            raise ProblemError(f"{name}: unknown checks {sorted(bad)}")
        outcome = header.get("outcome")
        if "invert" in checks and outcome not in ("Lagrangian", "NonExistence", "Inconclusive"):
            raise ProblemError(f"{name}: invert check needs outcome=Lagrangian|NonExistence|Inconclusive")
        return cls(checks, outcome, body.get("equivalent"), body.get("el"), tuple(conds))

    @classmethod
    def read(cls, path) -> "Expectation":
        p = Path(path)
        try:
            return cls.parse(p.read_text(), p.name)
        except OSError as exc:
            raise ProblemError(f"cannot read {p}: {exc.strerror}") from None



