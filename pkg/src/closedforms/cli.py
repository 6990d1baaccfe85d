"""Command line entry points.

Exit codes: 0 success, 1 negative verdict, 2 input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from importlib import resources

from . import pipeline
from .expr import ExpressionSyntaxError
from .geomech import SystemDefinition, SystemError_
from .mesh import Cochain, MeshError, SimplicialComplex, coordinate_form, flat_torus, klein_bottle, octahedron
from .report import digest, dumps
from .torus import LatticeSearch


class InputError(Exception):
    pass


def data_path(*parts) -> str:
    return str(resources.files("closedforms").joinpath("data", *parts))


def _read_json(path, stdin_ok=True):
    try:
        if path in (None, "-"):
            if not stdin_ok or sys.stdin.isatty():
                raise InputError("no input given and standard input is a terminal")
            raw = sys.stdin.buffer.read()
        else:
            with open(path, "rb") as fh:
                raw = fh.read()
        return json.loads(raw), raw
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path or 'stdin'}: {exc}") from None


def _load_mesh(path):
    doc, raw = _read_json(path)
    try:
        return SimplicialComplex.from_dict(doc), digest(raw)
    except (MeshError, TypeError, ValueError) as exc:
        raise InputError(f"invalid mesh: {exc}") from None


def _load_forms(K, paths):
    forms, digests = [], {}
    for p in paths:
        doc, raw = _read_json(p, stdin_ok=False)
        try:
            c = Cochain.from_dict(K, doc)
        except (MeshError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise InputError(f"invalid cochain {p}: {exc}") from None
        if c.degree != 1:
            raise InputError(f"{p} is a {c.degree}-cochain; forms must have degree 1")
        forms.append(c)
        digests[os.path.basename(p)] = digest(raw)
    return forms, digests


def resolve_system(name_or_path: str) -> str:
    if os.path.exists(name_or_path):
        return name_or_path
    bundled = data_path("systems", f"{name_or_path}.json")
    if os.path.exists(bundled):
        return bundled
    raise InputError(f"no system file or bundled system named {name_or_path!r}")


def _load_system(name_or_path):
    path = resolve_system(name_or_path)
    doc, raw = _read_json(path, stdin_ok=False)
    try:
        name = doc.get("name") or os.path.splitext(os.path.basename(path))[0]
        return SystemDefinition.from_dict(doc, name), digest(raw)
    except (SystemError_, ExpressionSyntaxError, TypeError, ValueError) as exc:
        raise InputError(f"invalid system {name_or_path}: {exc}") from None


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"{what} must be comma-separated numbers, got {text!r}") from None


# --- output ---------------------------------------------------------------------

def _table(report):
    """Main tabular section of a report for --format csv."""
    cmd = report["command"]
    if cmd == "cohomology":
        return report.get("coefficients") or report.get("basis_periods") or []
    if cmd == "fibrate":
        return report.get("integer_coefficients", [])
    if cmd == "detect-torus":
        return report.get("lattice", {}).get("basis", [])
    keys = ["jacobi_residual", "involution_residual", "regular_fraction", "poisson_rank", "verdict"]
    return [keys, [report.get(k, "") for k in keys]]


def _emit(report, out, fmt):
    if fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(_table(report))
        text = buf.getvalue()
    else:
        text = dumps(report)
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)
        print(report.get("summary", report.get("verdict", "")), file=sys.stderr)


# --- subcommands -----------------------------------------------------------------

def cmd_gen_mesh(args):
    if args.kind == "torus":
        K = flat_torus(args.res)
    elif args.kind == "klein":
        K = klein_bottle(args.res)
    else:
        K = octahedron()
    text = json.dumps(K.to_dict()) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    if args.forms_dir:
        if args.kind != "torus":
            raise InputError("--forms-dir is only available for the flat torus")
        os.makedirs(args.forms_dir, exist_ok=True)
        for axis, name in enumerate(("dx", "dy")):
            with open(os.path.join(args.forms_dir, f"{name}.json"), "w") as fh:
                json.dump(coordinate_form(K, axis).to_dict(), fh)
                fh.write("\n")
    return 0


def cmd_cohomology(args):
    K, d = _load_mesh(args.mesh)
    forms, fd = _load_forms(K, args.forms or [])
    rep, code = pipeline.run_cohomology(K, forms, {"mesh": d, **fd})
    _emit(rep, args.out, args.format)
    return code


def cmd_fibrate(args):
    K, d = _load_mesh(args.mesh)
    forms, fd = _load_forms(K, args.forms)
    if not forms:
        raise InputError("at least one form is required")
    rep, code = pipeline.run_fibrate(K, forms, args.eps, args.bins, {"mesh": d, **fd})
    _emit(rep, args.out, args.format)
    if code == 1:
        print(rep["verdict"], file=sys.stderr)
    return code


def cmd_check_system(args):
    system, d = _load_system(args.system)
    rep, code = pipeline.run_check_system(system, args.samples, args.seed, {"system": d})
    _emit(rep, args.out, args.format)
    return code


def cmd_detect_torus(args):
    system, d = _load_system(args.system)
    level = _floats(args.level, "--level")
    if len(level) != system.s:
        raise InputError(f"--level needs {system.s} values")
    guesses = [_floats(g, "--guess") for g in (args.guess or [])]
    if not guesses:
        guesses = [list(system.box.mean(axis=1) + 0.25 * (system.box[:, 1] - system.box[:, 0]))]
    for g in guesses:
        if len(g) != system.dimension:
            raise InputError(f"--guess needs {system.dimension} values")
    search = LatticeSearch(t_max=args.tmax, grid=args.grid, return_tol=args.return_tol)
    rep, code = pipeline.run_detect_torus(system, level, guesses, search, args.samples, args.seed,
                                          {"system": d})
    _emit(rep, args.out, args.format)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="closedforms", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def out_opts(sp):
        sp.add_argument("--out", default="-", help="report file, '-' for stdout")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    g = sub.add_parser("gen-mesh", help="write a built-in mesh")
    g.add_argument("kind", choices=("torus", "klein", "octahedron"))
    g.add_argument("--res", type=int, default=8)
    g.add_argument("--out", default="-")
    g.add_argument("--forms-dir", help="also write dx.json / dy.json (torus only)")
    g.set_defaults(func=cmd_gen_mesh)

    c = sub.add_parser("cohomology", help="Betti number, H^1 basis, periods")
    c.add_argument("--mesh", default="-")
    c.add_argument("--forms", nargs="*")
    out_opts(c)
    c.set_defaults(func=cmd_cohomology)

    f = sub.add_parser("fibrate", help="fibration over T^k from closed forms")
    f.add_argument("--mesh", default="-")
    f.add_argument("--forms", nargs="+", required=True)
    f.add_argument("--eps", type=float, default=1e-4)
    f.add_argument("--bins", type=int, default=16)
    out_opts(f)
    f.set_defaults(func=cmd_fibrate)

    s = sub.add_parser("check-system", help="Jacobi identity, involution, classification")
    s.add_argument("--system", required=True, help="system file or bundled name")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    out_opts(s)
    s.set_defaults(func=cmd_check_system)

    t = sub.add_parser("detect-torus", help="certify a regular fiber as a torus")
    t.add_argument("--system", required=True, help="system file or bundled name")
    t.add_argument("--level", required=True, help="comma-separated level values")
    t.add_argument("--guess", action="append", help="comma-separated starting point (repeatable)")
    t.add_argument("--tmax", type=float, default=20.0)
    t.add_argument("--grid", type=int, default=64)
    t.add_argument("--return-tol", type=float, default=1e-8)
    t.add_argument("--samples", type=int, default=1000)
    t.add_argument("--seed", type=int, default=0)
    out_opts(t)
    t.set_defaults(func=cmd_detect_torus)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
