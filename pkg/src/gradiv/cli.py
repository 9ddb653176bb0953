"""Command-line front end: element and complex checks, convergence and superconvergence studies.

Exit status: 0 when every check passes, 1 on a failed check, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .analysis import NORM_LABELS, RateTable

COMMANDS = ("element-check", "complex-check", "convergence", "superconvergence")
FORMATS = ("csv", "md", "dat")
COMMUTING_TOL = 1e-10
COMPOSITION_TOL = 1e-12
# discrete norm -> the continuous norm it is compared with
SUPER_PAIRS = {"V_e": "e", "U_div_e": "div_e", "W_graddiv_e": "graddiv_e"}


class UsageError(Exception):
    pass


# -- parsing ------------------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None
    return vals


def _h_list(text: str) -> list[int]:
    """Mesh sizes such as '1/8,1/16' or '0.25' converted to subdivisions N = 1/h."""
    out = []
    for t in (t.strip() for t in text.split(",")):
        if not t:
            continue
        try:
            h = Fraction(t)
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"bad mesh size {t!r}") from None
        if h <= 0 or (1 / h).denominator != 1:
            raise argparse.ArgumentTypeError(f"mesh size {t} is not 1/N for an integer N")
        out.append(int(1 / h))
    return out


def _families(text: str) -> list[int]:
    if text == "all":
        return [-1, 0, 1]
    try:
        f = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("family must be -1, 0, +1 or all") from None
    if f not in (-1, 0, 1):
        raise argparse.ArgumentTypeError("family must be -1, 0, +1 or all")
    return [f]


def _formats(text: str) -> list[str]:
    out = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in out if t not in FORMATS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"formats must be drawn from {','.join(FORMATS)}")
    return out


def _tol(text: str) -> float:
    try:
        t = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance {text!r}") from None
    if not 0 < t <= 1e-6:
        raise argparse.ArgumentTypeError("tolerance must lie in (0, 1e-6]")
    return t


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; command-line flags take precedence")
    common.add_argument("--cell", choices=("tet", "hex"), default="tet")
    common.add_argument("--k", type=int, default=2, help="order k >= 2")
    common.add_argument("--family", type=_families, default=None, metavar="{-1,0,+1,all}",
                        help="r - k (default: all)")
    meshes = common.add_mutually_exclusive_group()
    meshes.add_argument("--N", type=_int_list, help="comma-separated subdivisions per axis")
    meshes.add_argument("--h", type=_h_list, help="comma-separated mesh sizes 1/N (cuboids)")
    common.add_argument("--solver", choices=("direct", "cg"), default="direct")
    common.add_argument("--tol", type=_tol, default=1e-12)
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--format", type=_formats, default=["csv", "md"], help="subset of csv,md,dat")
    common.add_argument("--seed", type=int, default=0, help="first seed of the random fields")
    common.add_argument("--fields", type=int, default=1, help="number of random fields per case")
    common.add_argument("--degree", type=int, default=6, help="degree of the random fields")

    parser = argparse.ArgumentParser(prog="gradiv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("element-check", parents=[common], help="unisolvence, inclusion and local exactness")
    sub.add_parser("complex-check", parents=[common], help="exactness ladder and commuting diagram")
    sub.add_parser("convergence", parents=[common], help="manufactured-solution error tables")
    sub.add_parser("superconvergence", parents=[common], help="discrete norms on cuboid meshes")
    return parser


def read_config(path: str) -> list[str]:
    """Translate key=value lines into flags placed before the explicit ones."""
    args: list[str] = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key = key.strip()
        if key in ("config", "command") or not key:
            raise UsageError(f"{path}:{lineno}: key {key!r} is not allowed in a config file")
        args.append(f"--{key}={value.strip()}")
    return args


def parse(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    argv = list(argv)
    ns = parser.parse_args(argv)
    if ns.config:
        pos = argv.index(ns.command) + 1
        ns = parser.parse_args(argv[:pos] + read_config(ns.config) + argv[pos:])
    _validate(parser, ns)
    return ns


def _validate(parser: argparse.ArgumentParser, ns: argparse.Namespace) -> None:
    if ns.k < 2:
        parser.error("--k must be at least 2")
    if ns.family is None:
        ns.family = [-1, 0, 1]
    ns.Ns = ns.N if ns.N is not None else ns.h
    if ns.h is not None and ns.cell != "hex":
        parser.error("--h applies to cuboid meshes; use --N for tetrahedra")
    if ns.command in ("convergence", "superconvergence"):
        if not ns.Ns:
            parser.error("a non-empty --N (or --h) list is required")
        if ns.Ns != sorted(set(ns.Ns)):
            parser.error("mesh sizes must be distinct and listed from coarse to fine")
    if ns.command == "complex-check" and not ns.Ns:
        ns.Ns = [1, 2]
    if ns.Ns is not None and min(ns.Ns) < 1:
        parser.error("mesh subdivisions must be positive")
    if ns.command == "superconvergence" and ns.cell != "hex":
        parser.error("superconvergence norms are defined on cuboid meshes (--cell hex)")
    if ns.fields < 1 or ns.degree < 0:
        parser.error("--fields must be positive and --degree non-negative")


# -- output -------------------------------------------------------------------------------------

def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_table(table: RateTable, out: str, stem: str, formats: Sequence[str]) -> list[Path]:
    render = {"csv": table.to_csv, "md": table.to_markdown, "dat": table.to_dat}
    paths = []
    for fmt in formats:
        path = Path(out) / f"{stem}.{fmt}"
        _write_atomic(path, render[fmt]())
        paths.append(path)
    return paths


# -- commands -----------------------------------------------------------------------------------

def _cases(ns) -> list[tuple[int, int]]:
    return [(ns.k + f, ns.k) for f in ns.family if ns.k + f >= 1]


def cmd_element_check(ns) -> int:
    from .refelem import element_report

    ok = True
    for r, k in _cases(ns):
        rep = element_report(ns.cell, r, k)
        ok &= rep.passed
        print(f"{'PASS' if rep.passed else 'FAIL'} {ns.cell} r={r} k={k}: dim {rep.dim} (expected {rep.expected_dim}), "
              f"unisolvent={rep.unisolvent}, contains P_{r - 1}={rep.contains_P}, "
              f"direct sum={rep.direct_sum}, div onto Sigma+={rep.div_onto}")
    return 0 if ok else 1


def cmd_complex_check(ns) -> int:
    from .derham import commuting_check, complex_report, random_fields
    from .mesh import build_mesh

    ok = True
    print("| cell | N | r | k | dims | alt. sum | |curl grad| | |div curl| | rank grad | ker curl | rank div "
          "| grad res | curl res | div res | status |")
    print("|" + "---|" * 15)
    for N in ns.Ns:
        mesh = build_mesh(ns.cell, N)
        for r, k in _cases(ns):
            rep = complex_report(mesh, r, k)
            res = {"grad": 0.0, "curl": 0.0, "div": 0.0}
            for seed in range(ns.seed, ns.seed + ns.fields):
                one = commuting_check(mesh, r, k, *random_fields(seed, ns.degree))
                res = {key: max(res[key], one[key]) for key in res}
            passed = rep.passed(COMPOSITION_TOL) and max(res.values()) <= COMMUTING_TOL
            ok &= passed
            print(f"| {ns.cell} | {N} | {r} | {k} | {'/'.join(map(str, rep.dims))} | {rep.alternating_sum} "
                  f"| {rep.curl_grad:.1e} | {rep.div_curl:.1e} | {rep.rank_grad} | {rep.ker_curl} | {rep.rank_div} "
                  f"| {res['grad']:.1e} | {res['curl']:.1e} | {res['div']:.1e} | {'PASS' if passed else 'FAIL'} |")
    return 0 if ok else 1


def _run_studies(ns, command: str) -> tuple[list, bool]:
    from .study import run_study

    studies, ok = [], True
    for r, k in _cases(ns):
        study = run_study(ns.cell, r, k, ns.Ns, ns.solver, ns.tol)
        for row in study.rows:
            if row.ok:
                s = row.solve
                print(f"N={row.N}: {row.unknowns} unknowns, {s.method} iterations {s.iterations}, "
                      f"residual {s.residual:.2e} (rounding floor {s.floor:.2e})")
            else:
                ok = False
                print(f"N={row.N}: FAILED ({row.error})")
        good = [row for row in study.rows if row.ok]
        if good:
            table = study.table()
            print(table.to_markdown())
            stem = f"{command}_{ns.cell}_k{k}_r{r}"
            for path in write_table(table, ns.out, stem, ns.format):
                print(f"wrote {path}")
        studies.append(study)
    return studies, ok


def cmd_convergence(ns) -> int:
    _, ok = _run_studies(ns, "convergence")
    return 0 if ok else 1


def cmd_superconvergence(ns) -> int:
    studies, ok = _run_studies(ns, "superconvergence")
    for study in studies:
        good = [row for row in study.rows if row.ok]
        if len(good) < 2:
            print(f"r={study.r}: superconvergence needs two solved meshes")
            ok = False
            continue
        table = study.table()
        for disc, cont in SUPER_PAIRS.items():
            a, b = table.final_rate(disc), table.final_rate(cont)
            passed = a > b
            ok &= passed
            print(f"{'PASS' if passed else 'FAIL'} r={study.r} k={study.k}: rate {NORM_LABELS[disc]} {a:.3f} "
                  f"vs {NORM_LABELS[cont]} {b:.3f}")
    return 0 if ok else 1


HANDLERS = {"element-check": cmd_element_check, "complex-check": cmd_complex_check,
            "convergence": cmd_convergence, "superconvergence": cmd_superconvergence}


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = parse(argv)
    except UsageError as exc:
        print(f"gradiv: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code or 0)
    try:
        return HANDLERS[ns.command](ns)
    except ValueError as exc:
        print(f"gradiv: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
