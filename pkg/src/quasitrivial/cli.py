"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a mathematical check fails,
2 on malformed input.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .jetring import JetError, ZERO, JetExpr, format_expr, total_derivative, u, variational_derivative
from .multivec import NotAntisymmetricError, ThetaDensity, are_compatible, is_poisson
from .parse import ParseError, parse_expr
from .fileformats import (
    format_pencil,
    format_transform,
    parse_bracket_file,
    parse_transform_file,
)
from .quasitriv import (
    HydroPencil,
    InvariantViolation,
    NotExact,
    OrderReport,
    PreconditionError,
    lemma3_lhs,
    lemma4_lhs,
    proposition1_solve,
    residual,
    trivialize,
)
from .series import TruncationError
from .transform import pushforward

EXACT_ZERO = "EXACT-ZERO"
COMMANDS = ("check-jacobi", "check-pair", "pushforward", "trivialize",
            "verify-identities", "euler", "dx")


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: list[str]
    order: int | None = None
    seed: int = 0
    out: str | None = None
    report: str = "text"
    timing: bool = True

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.order is not None and self.order < 0:
            raise ValueError("order must be non-negative")


@dataclass
class Record:
    name: str
    verdict: bool
    residual_terms: int
    elapsed: float
    detail: str = ""


@dataclass
class Report:
    records: list[Record] = field(default_factory=list)
    output: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.verdict for r in self.records)

    def render(self, fmt: str, timing: bool) -> str:
        if fmt == "machine":
            lines = [json.dumps({
                "name": r.name,
                "verdict": "pass" if r.verdict else "fail",
                "residual-term-count": r.residual_terms,
                "elapsed": round(r.elapsed, 6) if timing else None,
            }, sort_keys=True) for r in self.records]
        else:
            lines = []
            for r in self.records:
                res = EXACT_ZERO if r.residual_terms == 0 else f"{r.residual_terms} terms"
                t = f"  {r.elapsed:.3f}s" if timing else ""
                lines.append(f"{'PASS' if r.verdict else 'FAIL'}  {r.name}  residual {res}{t}")
                if r.detail:
                    lines.append(f"    {r.detail}")
        return "\n".join(self.output + lines) + "\n"


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _expr_arg(arg: str) -> JetExpr:
    p = Path(arg)
    text = p.read_text() if p.is_file() else arg
    return parse_expr(text.strip())


def _terms(res: ThetaDensity) -> int:
    return sum(len(c.terms) for c in res.terms.values())


def _order(cfg: RunConfig, file_order: int | None) -> int:
    if cfg.order is not None:
        return cfg.order
    return file_order if file_order is not None else 0


def _timed(name: str, fn) -> Record:
    t0 = time.perf_counter()
    ok, count, detail = fn()
    return Record(name, ok, count, time.perf_counter() - t0, detail)


def _poisson_record(name: str, B, E: int) -> Record:
    def run():
        try:
            ok, res = is_poisson(B, E)
        except NotAntisymmetricError as exc:
            defect = sum(len(c.terms) for c in B.antisymmetry_defect().coeffs)
            return False, defect, f"not antisymmetric: {exc}"
        return ok, _terms(res), "" if ok else f"residual: {res}"
    return _timed(name, run)


def cmd_check_jacobi(cfg: RunConfig, rep: Report):
    f = parse_bracket_file(_read(cfg.inputs[0]))
    E = _order(cfg, f.eps_order)
    for name, B in f.brackets:
        rep.records.append(_poisson_record(f"jacobi {name}", B.truncate_eps(E), E))


def cmd_check_pair(cfg: RunConfig, rep: Report):
    f = parse_bracket_file(_read(cfg.inputs[0]))
    if len(f.brackets) != 2:
        raise InputError("check-pair needs a file with two bracket blocks")
    E = _order(cfg, f.eps_order)
    (n1, B1), (n2, B2) = f.brackets
    B1, B2 = B1.truncate_eps(E), B2.truncate_eps(E)
    rep.records.append(_poisson_record(f"jacobi {n1}", B1, E))
    rep.records.append(_poisson_record(f"jacobi {n2}", B2, E))

    def run():
        ok, res = are_compatible(B1, B2, E)
        return ok, _terms(res), "" if ok else f"residual: {res}"
    rep.records.append(_timed(f"compatibility {n1} {n2}", run))


def cmd_pushforward(cfg: RunConfig, rep: Report):
    if len(cfg.inputs) != 2:
        raise InputError("pushforward needs a pencil file and a transform file")
    f = parse_bracket_file(_read(cfg.inputs[0]))
    T = parse_transform_file(_read(cfg.inputs[1]))
    E = _order(cfg, f.eps_order if f.eps_order is not None else T.order)
    t0 = time.perf_counter()
    out = pushforward(f.pencil(E), T, E)
    rep.records.append(Record("pushforward", True, 0, time.perf_counter() - t0))
    text = format_pencil(out, f.phi, E, tuple(n for n, _ in f.brackets))
    _emit(cfg, rep, text)


def cmd_trivialize(cfg: RunConfig, rep: Report):
    f = parse_bracket_file(_read(cfg.inputs[0]))
    E = _order(cfg, f.eps_order)
    pencil = f.pencil(E)
    orders: list[OrderReport] = []
    t0 = time.perf_counter()
    try:
        T = trivialize(pencil, E, report=orders)
    except (NotExact, InvariantViolation) as exc:
        for o in orders:
            rep.records.append(Record(f"order {o.order}", True, o.residual_terms, o.elapsed))
        rep.records.append(Record(f"order {len(orders) + 1}", False, -1,
                                  time.perf_counter() - t0, str(exc)))
        return
    for o in orders:
        rep.records.append(Record(f"order {o.order}", o.residual_terms == 0,
                                  o.residual_terms, o.elapsed))

    def run():
        r1, r2 = residual(pencil, T, E, pencil[0][0][1])
        count = sum(len(c.terms) for S in (r1, r2) for B in S.coeffs.values() for c in B.coeffs)
        return count == 0, count, ""
    rep.records.append(_timed(f"residual mod eps^{E + 1}", run))
    _emit(cfg, rep, format_transform(T))


def _emit(cfg: RunConfig, rep: Report, text: str):
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        rep.output.append(text.rstrip("\n"))


def _random_poly(rng: random.Random, maxjet: int, nterms: int = 3) -> JetExpr:
    from .jetring import phi

    e = ZERO
    for _ in range(nterms):
        t = JetExpr.const(rng.randint(-3, 3))
        for k in range(maxjet + 1):
            p = rng.randint(0, 2)
            if p:
                t = t * u(k) ** p
        if rng.random() < 0.3:
            t = t * phi(rng.randint(0, 2))
        e = e + t
    return e


def cmd_verify_identities(cfg: RunConfig, rep: Report):
    from gmpy2 import mpq

    from .jetring import binomial, binomial_poly, partial_jet, phi

    rng = random.Random(cfg.seed)
    ctx = HydroPencil()
    trials = 20

    def binom():
        bad = 0
        for N in range(0, 9):
            for m in range(0, N + 1):
                for s in range(0, 7):
                    for t in range(0, s + 1):
                        lhs = sum((-1) ** p * binomial(N - p, m - p) * binomial(s, p) * binomial(s - p, t)
                                  for p in range(0, m + 1))
                        bad += lhs != binomial(s, t) * binomial_poly(N - s + t, m)
        return bad == 0, bad, ""
    rep.records.append(_timed("binomial identity", binom))

    def odd_identity():
        bad = 0
        for i in range(trials):
            N, m = (3, 1) if i % 3 == 0 else ((5, 1) if i % 3 == 1 else (5, 2))
            F, G, Q, R = (_random_poly(rng, N - 1) for _ in range(4))
            X, Y = (u(0) * G + F) * u(N) + Q, G * u(N) + R
            bad += lemma3_lhs(X, Y, N, m, ctx) != phi(0) * partial_jet(F, N - m)
        return bad == 0, bad, ""
    rep.records.append(_timed("odd-order identity", odd_identity))

    def g_identity():
        bad = 0
        for i in range(trials):
            N, m = (3, 1) if i % 3 == 0 else ((5, 1) if i % 3 == 1 else (5, 2))
            G, Q, R = _random_poly(rng, N - m), _random_poly(rng, N - 1), _random_poly(rng, N - 1)
            X, Y = u(0) * G * u(N) + Q, G * u(N) + R
            rhs = (phi(0) * u(1) * partial_jet(G, N - m)).scale((-1) ** (N + 1) * mpq(2 * (N - m) + 1, 2))
            bad += lemma4_lhs(X, Y, N, m, ctx) != rhs
        return bad == 0, bad, ""
    rep.records.append(_timed("G identity", g_identity))

    def preimage():
        bad = 0
        for _ in range(trials):
            d = rng.randint(0, 3)
            I0, J0 = _random_density(rng, d), _random_density(rng, d)
            X = ctx.d_functional(1, I0) - ctx.d_functional(2, J0)
            Y = ctx.d_functional(1, J0)
            I, J = proposition1_solve(X, Y, ctx)
            bad += X != ctx.d_functional(1, I.density) - ctx.d_functional(2, J.density)
        return bad == 0, bad, ""
    rep.records.append(_timed("preimage round trip", preimage))


def _random_density(rng: random.Random, d: int) -> JetExpr:
    """A random homogeneous density of degree ``d`` (0..3)."""
    monos = {0: [JetExpr.const(1)], 1: [u(1)], 2: [u(1) ** 2, u(2)], 3: [u(1) ** 3, u(1) * u(2), u(3)]}[d]
    e = ZERO
    for mono in monos:
        c = rng.randint(-2, 2)
        if c:
            e = e + mono * u(0) ** rng.randint(0, 3) * JetExpr.const(c)
    return e


def cmd_euler(cfg: RunConfig, rep: Report):
    e = _expr_arg(cfg.inputs[0])
    rep.output.append(format_expr(variational_derivative(e)))


def cmd_dx(cfg: RunConfig, rep: Report):
    e = _expr_arg(cfg.inputs[0])
    rep.output.append(format_expr(total_derivative(e)))


HANDLERS = {
    "check-jacobi": cmd_check_jacobi,
    "check-pair": cmd_check_pair,
    "pushforward": cmd_pushforward,
    "trivialize": cmd_trivialize,
    "verify-identities": cmd_verify_identities,
    "euler": cmd_euler,
    "dx": cmd_dx,
}


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute one command; returns the exit code and the rendered report."""
    rep = Report()
    try:
        HANDLERS[cfg.command](cfg, rep)
    except (ParseError, InputError, JetError, TruncationError) as exc:
        return 2, f"error: {exc}\n"
    except PreconditionError as exc:
        return 1, f"precondition failed: {exc}\n"
    except (NotExact, InvariantViolation, NotAntisymmetricError) as exc:
        return 1, f"failed: {exc}\n"
    except ValueError as exc:
        return 2, f"error: {exc}\n"
    return (0 if rep.passed else 1), rep.render(cfg.report, cfg.timing)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="quasitriv",
        description="Check bihamiltonian pencils and trivialize their deformations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("inputs", nargs="*", help="input files (an expression for euler/dx)")
    p.add_argument("--order", type=int, help="eps truncation order E")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the produced pencil/transform here")
    p.add_argument("--report", choices=("text", "machine"), default="text")
    p.add_argument("--no-timing", action="store_true",
                   help="omit elapsed times (byte-identical reports across runs)")
    return p


_ARITY = {"verify-identities": 0, "pushforward": 2}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    need = _ARITY.get(args.command, 1)
    if len(args.inputs) != need:
        sys.stderr.write(f"error: {args.command} takes {need} positional argument(s)\n")
        return 2
    if args.order is not None and args.order < 0:
        sys.stderr.write("error: --order must be non-negative\n")
        return 2
    cfg = RunConfig(args.command, args.inputs, args.order, args.seed, args.out,
                    args.report, not args.no_timing)
    code, text = run(cfg)
    (sys.stderr if code == 2 else sys.stdout).write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
