"""Command-line interface: ``mtwist <command> ...``.

Exit codes: 0 success, 2 validation or input failure, 3 residual above the
threshold under ``--assert``, 64 bad flags, 74 report could not be written.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import einstein as ein
from . import finsler as fin
from .chart import ProductSpec, sample_grid, validate_spec
from .discrepancy import known_discrepancies, structured_vs_oracle
from .errors import MtwistError
from .geodesics import (geodesic_integrate, index_form, read_curve_csv, read_variation_csv,
                        second_variation_fd, static_index_form)
from .killing import killing_residual
from .library import random_points, random_spec
from .oracle import metric_field
from .report import FORMATS, ReportWriteError, emit_report, to_json
from .semisym import ss_curvature_tensor, ss_ricci_tensor, ss_scalar
from .twisted import lc_curvature_tensor, lc_ricci_tensor, lc_scalar

__all__ = ["main", "run", "build_parser", "UsageError"]

VERSION = "0.1.0"
EXIT_OK, EXIT_INVALID, EXIT_ASSERT, EXIT_USAGE, EXIT_IO = 0, 2, 3, 64, 74


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pair(text: str) -> tuple[float, float]:
    v = _floats(text)
    if len(v) != 2:
        raise argparse.ArgumentTypeError(f"expected two numbers 'a,b', got {text!r}")
    return v[0], v[1]


def _load(path: str):
    with open(path) as fh:
        data = json.load(fh)
    digest = hashlib.sha256(to_json(data).encode()).hexdigest()
    if data.get("finsler"):
        return fin.load_finsler(data), digest
    return ProductSpec.from_dict(data), digest


def _need_product(spec):
    if not isinstance(spec, ProductSpec):
        raise UsageError("this command needs a pseudo-Riemannian product spec, not a Finsler spec\n")
    return spec


def _points(args, spec: ProductSpec) -> np.ndarray:
    if args.at:
        pts = np.array(args.at, float)
        if pts.shape[1] != spec.dim:
            raise UsageError(f"--at needs {spec.dim} coordinates per point\n")
        return pts
    if args.sweep:
        return sample_grid(spec.domain_box, args.sweep)
    if args.random:
        return random_points(spec, args.random, args.seed)
    return spec.box_center()[None, :]


def _echo(argv: list[str]) -> list[str]:
    # the destination is not an input, so reports written to different paths stay identical
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
        elif a in ("--output", "-o"):
            skip = True
        elif not a.startswith("--output="):
            out.append(a)
    return out


def _report(args, digest=None, **parts) -> dict:
    rep = {"command": _echo(args.argv), "spec_digest": digest, "results": [], "summary": {},
           "discrepancies": []}
    rep.update(parts)
    return rep


def _discrepancies(topic: str) -> list[dict]:
    return [d.to_dict() for d in known_discrepancies([topic])]


def _coord_cols(spec, prefix="x") -> list[str]:
    return [f"{prefix}{i}" for i in range(spec.dim)]


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args):
    spec, digest = _load(args.spec)
    if isinstance(spec, fin.ProductFinslerSpec):
        summary = {"ok": True, "finsler": True, "dims": spec.dims}
        return _report(args, digest, summary=summary), EXIT_OK
    rep = validate_spec(spec, per_axis=args.per_axis)
    d = rep.to_dict()
    rows = [[f"F{i + 1}", c, m] for i, (c, m) in enumerate(zip(d["classification"], d["max_fiber_derivative"]))]
    out = _report(args, digest, results=d["findings"], summary=d,
                  table={"columns": ["fiber", "classification", "max_fiber_derivative"], "rows": rows})
    return out, EXIT_OK if rep.ok else EXIT_INVALID


_TENSOR = {
    "curvature": {"lc": lc_curvature_tensor, "ss": ss_curvature_tensor},
    "ricci": {"lc": lc_ricci_tensor, "ss": ss_ricci_tensor},
    "scalar": {"lc": lc_scalar, "ss": ss_scalar},
}


def cmd_tensor(args):
    spec, digest = _load(args.spec)
    spec = _need_product(spec)
    pts = _points(args, spec)
    fn = _TENSOR[args.command][args.connection]
    cols = _coord_cols(spec)
    idx_names = {"curvature": ["l", "i", "j", "k"], "ricci": ["a", "b"], "scalar": []}[args.command]
    results, rows = [], []
    for p in pts:
        val = np.asarray(fn(spec, p), float)
        results.append({"point": p.tolist(), "value": val.tolist()})
        for idx in np.ndindex(val.shape):
            rows.append([*p.tolist(), *idx, float(val[idx])])
    check = structured_vs_oracle(spec, pts, args.connection, tol=args.tol)
    worst = check["max"]["scalar" if args.command == "scalar" else args.command]
    summary = {"connection": args.connection, "points": len(pts), "oracle_max_relative_diff": worst,
               "tolerance": args.tol}
    rep = _report(args, digest, results=results, summary=summary,
                  discrepancies=_discrepancies("curvature"),
                  table={"columns": cols + idx_names + ["value"], "rows": rows})
    return rep, EXIT_ASSERT if args.assert_ and worst > args.tol else EXIT_OK


def cmd_geodesic(args):
    spec, digest = _load(args.spec)
    spec = _need_product(spec)
    if len(args.p0) != spec.dim or len(args.v0) != spec.dim:
        raise UsageError(f"--p0 and --v0 need {spec.dim} components\n")
    curve = geodesic_integrate(spec, args.p0, args.v0, args.span, args.step, method=args.method)
    q = np.einsum("...ab,...a,...b->...", metric_field(spec).value(curve.points), curve.velocity,
                  curve.velocity)
    drift = float(np.abs(q - q[0]).max())
    tol = args.tol if args.tol is not None else 1e-8
    rows = [[float(t), *x.tolist(), *v.tolist()] for t, x, v in zip(curve.t, curve.points, curve.velocity)]
    summary = {"samples": len(curve.t), "initial_norm": float(q[0]), "norm_drift": drift,
               "tolerance": tol, "final_point": curve.points[-1].tolist(),
               "final_velocity": curve.velocity[-1].tolist(), "method": args.method}
    rep = _report(args, digest, summary=summary, discrepancies=_discrepancies("geodesic"),
                  table={"columns": ["t"] + _coord_cols(spec) + _coord_cols(spec, "v"), "rows": rows})
    return rep, EXIT_ASSERT if args.assert_ and drift > tol else EXIT_OK


def cmd_index_form(args):
    spec, digest = _load(args.spec)
    spec = _need_product(spec)
    curve = read_curve_csv(args.curve)
    V = read_variation_csv(args.field)
    I = index_form(spec, curve, V)
    fd = second_variation_fd(spec, curve, V, h=args.h)
    summary = {"index_form": I, "second_variation_fd": fd, "difference": abs(I - fd),
               "threshold": max(1e-4, 1e-2 * abs(I))}
    try:
        summary["static_index_form"] = static_index_form(spec, curve, V)
    except MtwistError:
        summary["static_index_form"] = None
    rep = _report(args, digest, summary=summary, discrepancies=_discrepancies("geodesic"))
    bad = summary["difference"] > summary["threshold"]
    return rep, EXIT_ASSERT if args.assert_ and bad else EXIT_OK


def cmd_killing(args):
    spec, digest = _load(args.spec)
    spec = _need_product(spec)
    if args.field not in spec.fields:
        raise UsageError(f"unknown field {args.field!r}; spec defines {sorted(spec.fields)}\n")
    res = killing_residual(spec, args.field, per_axis=args.per_axis)
    tol = args.tol if args.tol is not None else 1e-6
    summary = {"field": args.field, "max_abs": res["max_abs"], "worst_point": res["worst_point"],
               "tolerance": tol, "killing": res["max_abs"] < tol}
    rep = _report(args, digest, summary=summary, discrepancies=_discrepancies("killing"))
    return rep, EXIT_ASSERT if args.assert_ and not summary["killing"] else EXIT_OK


def _family_table(fams) -> dict:
    cols = ["family_id", "branch", "warp", "lambda", "verified", "max_residual", "note"]
    rows = [[d[c] for c in cols] for d in (f.to_dict() for f in fams)]
    return {"columns": cols, "rows": rows}


def cmd_einstein(args):
    if args.family == "grw":
        if args.fiber_dim == 1:
            fams = [ein.grw_einstein_family(args.lam, args.c1, args.c2)]
        else:
            fams = [ein.grw_einstein_highdim(args.fiber_dim, args.c1, args.c2)]
    elif args.family == "kasner2":
        fams = ein.kasner_einstein_families("II", args.p, args.c0)
    else:
        if args.p is None:
            raise UsageError("--family kasner3 needs --p with three exponents\n")
        fams = ein.kasner_einstein_families("III", args.p, args.c0)
    ok = all(f.verified for f in fams)
    summary = {"families": len(fams), "all_verified": ok,
               "max_residual": max(f.max_residual for f in fams), "tolerance": ein.EINSTEIN_TOL}
    rep = _report(args, results=[f.to_dict() for f in fams], summary=summary, table=_family_table(fams))
    return rep, EXIT_ASSERT if args.assert_ and not ok else EXIT_OK


def cmd_scalar_solve(args):
    if args.family == "grw":
        fam = ein.grw_scalar_family(args.fiber_dim, args.scalar, args.fiber_scalar, args.c1, args.c2,
                                    args.span)
    else:
        if args.p is None or len(args.p) != 3:
            raise UsageError("--family kasner needs --p with three exponents\n")
        fam = ein.kasner_scalar_family(args.p, args.scalar, args.c0, args.c1, args.c2, args.sign,
                                       args.span)
    summary = {"verified": fam.verified, "max_residual": fam.max_residual, "tolerance": ein.SCALAR_TOL}
    rep = _report(args, results=[fam.to_dict()], summary=summary, table=_family_table([fam]))
    return rep, EXIT_ASSERT if args.assert_ and not fam.verified else EXIT_OK


def _rel(a, b) -> float:
    return float(np.abs(a - b).max() / max(float(np.abs(b).max()), 1e-12))


def cmd_finsler(args):
    spec, digest = _load(args.spec)
    if not isinstance(spec, fin.ProductFinslerSpec):
        raise UsageError("finsler needs a spec with \"finsler\": true\n")
    samples = fin.sample_points(spec, args.samples, args.seed)
    xc = [f"x{i}" for i in range(spec.dim)]
    yc = [f"y{i}" for i in range(spec.dim)]
    results, rows, worst = [], [], 0.0
    if args.op == "predicates":
        res = fin.structure_predicates(spec, n=args.samples, seed=args.seed)
        eq = res["equivalences"]
        rows = [[k, v.get("product"), v.get("conditions"), v.get("consistent")] for k, v in sorted(eq.items())]
        rep = _report(args, digest, results=res,
                      summary={"all_consistent": all(v.get("consistent", True) for v in eq.values())},
                      table={"columns": ["property", "product", "conditions", "consistent"], "rows": rows})
        bad = not rep["summary"]["all_consistent"]
        return rep, EXIT_ASSERT if args.assert_ and bad else EXIT_OK
    tol = args.tol
    for x, y in samples:
        if args.op == "spray":
            a, b = fin.spray_structured(spec, x, y), fin.spray_generic(spec, x, y)
            d = _rel(a, b)
            results.append({"x": x, "y": y, "structured": a, "generic": b, "relative_diff": d})
            rows.append([*x, *y, *a.tolist(), d])
        elif args.op == "berwald":
            bw = fin.berwald_tensors(spec, x, y)
            d = float(np.abs(bw["B"]).max())
            results.append({"x": x, "y": y, "B_max_abs": d, "E": bw["E"]})
            rows.append([*x, *y, d, float(np.abs(bw["E"]).max())])
        else:
            cb = fin.cartan_blocks(spec, x, y)
            C = fin.cartan_tensor(spec, x, y)
            cy = float(np.abs(np.einsum("ijk,k->ij", C, y)).max())
            d = float(cb["max_difference"])
            results.append({"x": x, "y": y, "block_difference": d, "max_mixed_block": cb["max_mixed_block"],
                            "contraction_with_y": cy})
            rows.append([*x, *y, d, float(cb["max_mixed_block"]), cy])
        worst = max(worst, d)
    extra = {"spray": [f"G{i}" for i in range(spec.dim)] + ["relative_diff"],
             "berwald": ["B_max_abs", "E_max_abs"],
             "cartan": ["block_difference", "max_mixed_block", "contraction_with_y"]}[args.op]
    summary = {"op": args.op, "samples": len(samples), "max": worst, "tolerance": tol}
    rep = _report(args, digest, results=results, summary=summary,
                  table={"columns": xc + yc + extra, "rows": rows})
    return rep, EXIT_ASSERT if args.assert_ and worst > tol else EXIT_OK


def cmd_oracle_diff(args):
    if args.spec:
        spec, digest = _load(args.spec)
        spec = _need_product(spec)
    else:
        spec = random_spec(args.seed, torsion=args.torsion)
        digest = hashlib.sha256(to_json(spec.to_dict()).encode()).hexdigest()
    connection = args.connection or ("ss" if spec.torsion.location != "none" else "lc")
    pts = random_points(spec, args.points, args.seed)
    res = structured_vs_oracle(spec, pts, connection, tol=args.tol)
    rows = [[*r["point"], r["curvature"], r["ricci"], r["scalar"]] for r in res["points"]]
    summary = {"connection": connection, "tolerance": args.tol, "max": res["max"], "ok": res["ok"],
               "flagged": res["discrepancies"], "spec": spec.to_dict(), "seed": args.seed}
    rep = _report(args, digest, results=res["points"], summary=summary,
                  discrepancies=_discrepancies("curvature"),
                  table={"columns": _coord_cols(spec) + ["curvature", "ricci", "scalar"], "rows": rows})
    return rep, EXIT_ASSERT if args.assert_ and not res["ok"] else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default="text")
    common.add_argument("--output", "-o", default=None, help="report path (default stdout)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized sweeps")
    common.add_argument("--assert", dest="assert_", action="store_true",
                        help="exit 3 when a residual exceeds its threshold")

    p = _Parser(prog="mtwist", description="Curvature and structure checks on twisted products.")
    p.add_argument("--version", action="version", version=f"mtwist {VERSION}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", parents=[common], help="check a spec and classify its warps")
    s.add_argument("spec")
    s.add_argument("--per-axis", type=int, default=5)
    s.set_defaults(func=cmd_validate)

    for name in ("curvature", "ricci", "scalar"):
        s = sub.add_parser(name, parents=[common], help=f"{name} of the chosen connection")
        s.add_argument("spec")
        s.add_argument("--connection", choices=("lc", "ss"), default="lc")
        s.add_argument("--at", type=_floats, action="append", help="point 'x0,x1,...' (repeatable)")
        s.add_argument("--sweep", type=int, default=0, help="grid points per axis over the domain box")
        s.add_argument("--random", type=int, default=0, help="random points in the box (uses --seed)")
        s.add_argument("--tol", type=float, default=1e-6, help="oracle agreement threshold")
        s.set_defaults(func=cmd_tensor)

    s = sub.add_parser("geodesic", parents=[common], help="integrate a geodesic")
    s.add_argument("spec")
    s.add_argument("--p0", type=_floats, required=True)
    s.add_argument("--v0", type=_floats, required=True)
    s.add_argument("--span", type=_pair, default=(0.0, 1.0))
    s.add_argument("--step", type=float, default=1e-3)
    s.add_argument("--method", choices=("structured", "oracle"), default="structured")
    s.add_argument("--tol", type=float, default=None, help="allowed drift of g(v, v) (default 1e-8)")
    s.set_defaults(func=cmd_geodesic)

    s = sub.add_parser("index-form", parents=[common], help="index form against the second variation")
    s.add_argument("spec")
    s.add_argument("--curve", required=True, help="geodesic CSV: t, x0..., v0...")
    s.add_argument("--field", required=True, help="variation CSV: t, V0...")
    s.add_argument("--h", type=float, default=1e-3, help="finite-difference step")
    s.set_defaults(func=cmd_index_form)

    s = sub.add_parser("killing-check", parents=[common], help="Killing residual of a named field")
    s.add_argument("spec")
    s.add_argument("--field", required=True)
    s.add_argument("--per-axis", type=int, default=5)
    s.add_argument("--tol", type=float, default=None, help="threshold on max |L_K g| (default 1e-6)")
    s.set_defaults(func=cmd_killing)

    s = sub.add_parser("einstein-solve", parents=[common], help="Einstein warp families")
    s.add_argument("--family", choices=("grw", "kasner2", "kasner3"), required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=0.0)
    s.add_argument("--fiber-dim", type=int, default=1)
    s.add_argument("--c0", type=float, default=1.0)
    s.add_argument("--c1", type=float, default=1.0)
    s.add_argument("--c2", type=float, default=1.0)
    s.add_argument("--p", type=_floats, default=None, help="Kasner exponents")
    s.set_defaults(func=cmd_einstein)

    s = sub.add_parser("scalar-solve", parents=[common], help="constant scalar curvature warps")
    s.add_argument("--family", choices=("grw", "kasner"), required=True)
    s.add_argument("--scalar", type=float, required=True, help="target scalar curvature")
    s.add_argument("--fiber-dim", type=int, default=3)
    s.add_argument("--fiber-scalar", type=float, default=0.0)
    s.add_argument("--c0", type=float, default=1.0)
    s.add_argument("--c1", type=float, default=1.0)
    s.add_argument("--c2", type=float, default=1.0)
    s.add_argument("--p", type=_floats, default=None)
    s.add_argument("--sign", type=int, choices=(-1, 1), default=1)
    s.add_argument("--span", type=_pair, default=(0.0, 1.0))
    s.set_defaults(func=cmd_scalar_solve)

    s = sub.add_parser("finsler", parents=[common], help="Finsler product quantities")
    s.add_argument("spec")
    s.add_argument("--op", choices=("spray", "berwald", "cartan", "predicates"), required=True)
    s.add_argument("--samples", type=int, default=10)
    s.add_argument("--tol", type=float, default=1e-6)
    s.set_defaults(func=cmd_finsler)

    s = sub.add_parser("oracle-diff", parents=[common], help="structured formulas against the oracle")
    s.add_argument("spec", nargs="?", default=None, help="spec file (default: random spec from --seed)")
    s.add_argument("--points", type=int, default=20)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--connection", choices=("lc", "ss"), default=None)
    s.add_argument("--torsion", choices=("none", "base", "fiber"), default="none",
                   help="torsion placement for the random spec")
    s.set_defaults(func=cmd_oracle_diff)
    return p


def run(argv=None) -> tuple[int, dict | None]:
    """Parse and execute; returns the exit code and the report (None on failure)."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        args.argv = argv
        report, code = args.func(args)
    except UsageError as exc:
        msg = str(exc)
        sys.stderr.write(msg if msg.startswith("usage") else f"mtwist: error: {msg}")
        return EXIT_USAGE, None
    except (MtwistError, OSError, ValueError) as exc:
        sys.stderr.write(f"mtwist: error: {exc}\n")
        return EXIT_INVALID, None
    try:
        emit_report(report, args.format, args.output, banner=f"mtwist {VERSION}")
    except ReportWriteError as exc:
        sys.stderr.write(f"mtwist: error: {exc}\n")
        return EXIT_IO, report
    return code, report


def main(argv=None) -> int:
    try:
        return run(argv)[0]
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except BrokenPipeError:
        # reader closed early (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
