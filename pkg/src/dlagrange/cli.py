"""Command-line front end.

Exit status: 0 Lagrangian / verified / all entries pass, 2 NonExistence,
3 Inconclusive, 1 any error, failed verification or failed corpus entry.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import expr as E
from .annihilate import (
    BWD,
    FWD,
    MIXED,
    condition_system,
    mixed_system,
    parse_conditions,
    same_row_space,
)
from .grammar import parse, render
from .problem import Expectation, ProblemError, ProblemFile
from .solve import SolveOutcome, invert, residual
from .variational import equivalence_scale, euler_apply, is_normal

EXIT_ERROR = 1


def residual_hash(e) -> str:
    return hashlib.sha256(render(e).encode()).hexdigest()[:16]


def outcome_report(out: SolveOutcome) -> dict:
    rep = {
        "outcome": out.variant,
        "exit": out.exit_code,
        "trace": {k: out.trace[k] for k in sorted(out.trace)},
        "timings": {k: round(v, 4) for k, v in sorted(out.timings.items())},
        "ansatz": out.ansatz,
    }
    if out.density is not None:
        rep["k"] = out.density.k
        rep["density"] = render(out.density.density)
    if out.variant == "Lagrangian":
        rep["residual_hash"] = residual_hash(0)
    if out.certificate is not None:
        cert = out.certificate
        rep["certificate"] = {
            "target": render(cert.target),
            "steps": [
                {"multiplier": render(m), "source": p, "equation": render(e)}
                for m, e, p in zip(cert.multipliers, cert.equations, cert.provenance)
                if m != 0
            ],
        }
    if out.reason:
        rep["reason"] = out.reason
    if out.residual:
        rep["residual"] = [render(e) for e in out.residual]
    return rep


def _write_report(path, data):
    if path:
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _parse_sparsity(s):
    if s is None:
        return None
    try:
        return tuple(int(t) for t in s.replace(",", " ").split())
    except ValueError:
        raise click.BadParameter(f"not a list of integers: {s!r}") from None


@click.group()
def cli():
    """Discrete Lagrangians for even-order scalar recurrences."""


@cli.command("el")
@click.argument("problem", type=click.Path(dir_okay=False))
@click.option("--report", type=click.Path(dir_okay=False), help="write a JSON report here")
def cmd_el(problem, report):
    """Euler-Lagrange expression of the file's Lagrangian."""
    pf = ProblemFile.read(problem)
    L = pf.density()
    el = euler_apply(L)
    click.echo(f"el: {render(el.expression)}")
    rep = {"el": render(el.expression)}
    if pf.forward is not None:
        r = pf.recurrence()
        res = residual(L, r)
        ok = E.is_zero(res)
        verdict = "verified" if ok else "failed"
        click.echo(f"residual: {render(res)}")
        click.echo(f"verdict: {verdict}")
        rep.update(residual=render(res), verdict=verdict, residual_hash=residual_hash(res))
        _write_report(report, rep)
        sys.exit(0 if ok else EXIT_ERROR)
    _write_report(report, rep)


@cli.command("conditions")
@click.argument("problem", type=click.Path(dir_okay=False))
@click.option("--direction", type=click.Choice([FWD, BWD, MIXED]), default=FWD, show_default=True)
@click.option("--sparsity", help="density offsets, e.g. '0,1,2,3'")
@click.option("--report", type=click.Path(dir_okay=False))
def cmd_conditions(problem, direction, sparsity, report):
    """Serialized condition system for the density."""
    pf = ProblemFile.read(problem)
    r = pf.recurrence()
    sp_ = _parse_sparsity(sparsity) or pf.sparsity
    if direction == MIXED:
        cs = mixed_system(r, sp_)
    else:
        cs = condition_system(r, direction, sp_)
    text = cs.serialize()
    click.echo(text, nl=False)
    _write_report(report, {"direction": direction, "k": r.k, "conditions": text.splitlines()})


@cli.command("invert")
@click.argument("problem", type=click.Path(dir_okay=False))
@click.option("--direction", type=click.Choice([FWD, BWD, MIXED]), default=None)
@click.option("--degree", type=int, default=None, help="degree bound per stencil variable")
@click.option("--atoms", default=None, help="';'-separated atoms for the undetermined part")
@click.option("--sparsity", default=None, help="density offsets, e.g. '0,1,2,3'")
@click.option("--seed", type=int, default=None, help="seed for random evaluation points")
@click.option("--report", type=click.Path(dir_okay=False))
def cmd_invert(problem, direction, degree, atoms, sparsity, seed, report):
    """Construct a Lagrangian or certify that none exists."""
    pf = ProblemFile.read(problem)
    r = pf.recurrence()
    cli_atoms = None
    if atoms is not None:
        cli_atoms = tuple(a.strip() for a in atoms.split(";") if a.strip())
    cfg = pf.config(
        direction=direction,
        degree=degree,
        atoms=cli_atoms,
        sparsity=_parse_sparsity(sparsity),
        seed=seed,
    )
    out = invert(r, cfg)
    click.echo(out.render(), nl=False)
    _write_report(report, outcome_report(out))
    sys.exit(out.exit_code)


# --------------------------------------------------------------------------
# corpus


def run_entry(path: str) -> tuple[str, bool, str, float]:
    """Run one corpus entry; never raises.  Returns (name, ok, detail, seconds)."""
    p = Path(path)
    t0 = time.perf_counter()
    try:
        ok, detail = _check_entry(p)
    except Exception as exc:  # isolate every entry
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return p.stem, ok, detail, time.perf_counter() - t0


def _check_entry(p: Path) -> tuple[bool, str]:
    pf = ProblemFile.read(p)
    exp = Expectation.read(p.with_suffix(".expect"))
    notes = []
    r = pf.recurrence()
    if "conditions" in exp.checks:
        cfg = pf.config()
        d = cfg.direction
        cs = mixed_system(r, cfg.sparsity) if d == MIXED else condition_system(r, d, cfg.sparsity)
        golden = [e for line in exp.conditions for e in parse_conditions(line)]
        if not same_row_space(cs.exprs(), golden):
            return False, "condition system differs from golden"
        notes.append("conditions ok")
    if "el" in exp.checks:
        L = pf.density()
        if not E.is_zero(residual(L, r)):
            return False, "lagrangian does not solve the law"
        if exp.el is not None:
            if not E.is_zero(euler_apply(L).expression - parse(exp.el)):
                return False, "EL expression differs from expected"
        notes.append("el ok")
    if "invert" in exp.checks:
        out = invert(r, pf.config())
        if out.variant != exp.outcome:
            why = f" ({out.reason})" if out.reason else ""
            return False, f"expected {exp.outcome}, got {out.variant}{why}"
        if out.variant == "Lagrangian":
            if not (E.is_zero(residual(out.density, r)) and is_normal(out.density)):
                return False, "returned density failed verification"
            if exp.equivalent is not None:
                c = equivalence_scale(out.density, parse(exp.equivalent))
                if c is None:
                    return False, "density not equivalent to the expected one"
                notes.append(f"scale {c}")
        if out.variant == "NonExistence" and not out.certificate.replay():
            return False, "certificate does not replay"
        notes.append(f"invert {out.variant}")
    return True, ", ".join(notes)


def run_corpus(directory, jobs: int = 1) -> list[tuple[str, bool, str, float]]:
    d = Path(directory)
    if not d.is_dir():
        raise ProblemError(f"cannot read corpus directory {d}")
    entries = sorted(str(p) for p in d.glob("*.problem"))
    if jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_entry, entries))
    else:
        results = [run_entry(e) for e in entries]
    return sorted(results, key=lambda t: t[0])


@cli.command("corpus")
@click.argument("directory", type=click.Path(file_okay=False))
@click.option("--jobs", type=int, default=1, show_default=True, help="worker processes")
@click.option("--report", type=click.Path(dir_okay=False))
@click.option("--times/--no-times", default=False, help="show per-entry runtimes")
def cmd_corpus(directory, jobs, report, times):
    """Run every ``*.problem`` file against its ``.expect`` sidecar."""
    results = run_corpus(directory, jobs)
    width = max([len(n) for n, *_ in results] + [5])
    for name, ok, detail, secs in results:
        t = f" [{secs:.1f}s]" if times else ""
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}{t}")
    passed = sum(ok for _, ok, _, _ in results)
    click.echo(f"total: {len(results)}  passed: {passed}  failed: {len(results) - passed}")
    _write_report(
        report,
        {"entries": [{"name": n, "pass": ok, "detail": d} for n, ok, d, _ in results]},
    )
    sys.exit(0 if passed == len(results) else EXIT_ERROR)


def main(argv=None) -> int:
    """Entry point; maps usage and runtime errors to exit status 1."""
    try:
        cli.main(args=argv, prog_name="dlagrange", standalone_mode=False)
    except SystemExit as exc:
        return int(exc.code or 0)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_ERROR
    except click.ClickException as exc:
        exc.show()
        return EXIT_ERROR
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
