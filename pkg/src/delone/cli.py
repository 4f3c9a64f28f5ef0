"""Command-line interface.

Exit codes: 0 success, 1 a verification check failed (report still
written), 2 usage or input error.  All commands are deterministic for a
fixed --seed.
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import atlas as atlas_mod
from . import derivation, generators, io, metric, repetitivity, verify, voronoi
from .core import build_windowed_set, canonical_class, extract_patch, norms
from .errors import DeloneError, PeriodicInput, UsageError


def _out_path(args, name: str) -> str:
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        return os.path.join(args.out_dir, name)
    return name


def _print(obj):
    print(json.dumps(io.report_to_dict(obj), cls=io._NumpyEncoder,
                     indent=1, sort_keys=True))


def cmd_generate(args) -> int:
    model = args.model
    W = args.window
    if model == "lattice":
        basis = np.asarray(json.loads(args.basis), dtype=float)
        X = generators.generate_lattice(basis, W)
    elif model == "fibonacci":
        X = generators.generate_substitution_1d(generators.fibonacci_rule(), W)
    elif model == "silver":
        X = generators.generate_substitution_1d(generators.silver_mean_rule(), W)
    elif model == "periodic":
        X = generators.generate_substitution_1d(generators.periodic_rule(), W)
    elif model == "ammann-beenker":
        X = generators.generate_cut_and_project(
            generators.ammann_beenker_scheme(), W)
    elif model == "fibonacci-cp":
        X = generators.generate_cut_and_project(
            generators.fibonacci_scheme(), W)
    else:
        with open(args.scheme) as fh:
            scheme = generators.scheme_from_dict(json.load(fh))
        X = generators.generate_cut_and_project(scheme, W)
    out = args.out or _out_path(args, f"{model}-{W:g}.{args.format}")
    io.save_point_set(X, out)
    print(f"wrote {X.n} points (dim {X.dim}, window {X.window_radius:g}) "
          f"to {out}")
    return 0


def cmd_atlas(args) -> int:
    X = io.load_point_set(args.input)
    A = atlas_mod.r_atlas(X, args.radius, tol=args.tol)
    report = {
        "R": A.radius,
        "classes": [
            {"key": list(c.quantized_key), "offsets": c.representative.offsets,
             "labels": c.representative.labels, "multiplicity": c.multiplicity}
            for c in A.classes
        ],
    }
    if args.gap:
        try:
            gap, worst = atlas_mod.min_return_gap(X, args.radius, tol=args.tol)
            report["min_return_gap"] = gap
            report["worst_class_size"] = worst.size
        except PeriodicInput as exc:
            report["min_return_gap"] = None
            report["periodic"] = str(exc)
    if args.format == "csv":
        out = args.out or _out_path(args, "atlas.csv")
        with open(out, "w") as fh:
            fh.write("R,class_count,min_return_gap\n")
            fh.write(f"{A.radius:.17g},{A.class_count},"
                     f"{report.get('min_return_gap', '')}\n")
    else:
        out = args.out or _out_path(args, "atlas.json")
        io.dump_json(report, out)
    print(f"{A.class_count} classes at R={A.radius:g}; wrote {out}")
    return 0


def cmd_voronoi(args) -> int:
    X = io.load_point_set(args.input)
    if args.patch_radius is not None:
        i0 = int(np.argmin(norms(X.points)))
        Xs = X.translate(X.points[i0])
        P = canonical_class(
            extract_patch(Xs, np.zeros(X.dim), args.patch_radius), args.tol)
        pv = voronoi.voronoi_cells_of_patch(Xs, P, tol=args.tol)
        cells, sites = pv.cells, pv.sites
    else:
        cutoff = voronoi.default_cutoff(X)
        cells, sites = [], []
        for i in X.interior_indices(cutoff):
            sites.append(X.points[i])
            cells.append(voronoi.voronoi_cell(X, X.points[i], cutoff,
                                              tol=args.tol))
        sites = np.asarray(sites)
    dump = [{"site": c.site, "vertices": c.vertices, "diameter": c.diameter()}
            for c in cells if c is not None]
    out = args.out or _out_path(args, "voronoi.json")
    io.dump_json({"cells": dump}, out)
    if args.svg:
        if X.dim != 2:
            raise UsageError("svg output needs a 2-dimensional input")
        voronoi.write_svg(args.svg, list(cells), np.asarray(sites))
        print(f"wrote {args.svg}")
    print(f"{len(dump)} cells; wrote {out}")
    return 0


def cmd_repetitivity(args) -> int:
    X = io.load_point_set(args.input)
    grid = list(np.arange(args.grid_step, args.rmax + args.grid_step / 2,
                          args.grid_step))
    est = repetitivity.lr_constant(X, grid)
    if args.format == "csv":
        out = args.out or _out_path(args, "repetitivity.csv")
        with open(out, "w") as fh:
            fh.write("R,class_count,M_hat,M_hat_over_R\n")
            for R, M in zip(est.R_grid, est.M_of_R):
                n_cls = len([r for r in est.per_class if r["R"] == R])
                fh.write(f"{R:.17g},{n_cls},{M:.17g},{M / R:.17g}\n")
    else:
        out = args.out or _out_path(args, "repetitivity.json")
        io.save_report(est, out)
    print(f"L_hat = {est.L_hat:.6g}, threshold radius = "
          f"{est.threshold_radius}; wrote {out}")
    return 0


def cmd_metric(args) -> int:
    X = io.load_point_set(args.a)
    Y = io.load_point_set(args.b)
    cfg = metric.MetricConfig(tolerance=args.tol)
    res = metric.delone_distance(X, Y, cfg)
    out = args.out or _out_path(args, "metric.json")
    io.save_report(res, out)
    print(f"d in [{res.lower:.6g}, {res.upper:.6g}]"
          + (" (cap)" if res.cap_hit else "") + f"; wrote {out}")
    return 0


def cmd_derive(args) -> int:
    X = io.load_point_set(args.input)
    rule = io.load_rule(args.rule)
    Y = derivation.apply_rule(rule, X)
    io.save_point_set(Y, args.out)
    print(f"wrote {Y.n} points (window {Y.window_radius:g}) to {args.out}")
    return 0


def cmd_fibers(args) -> int:
    X = io.load_point_set(args.input)
    rule = io.load_rule(args.rule)
    L = args.L
    if L is None:
        grid = [args.radius / 4, args.radius / 2]
        L = repetitivity.lr_constant(X, grid).L_hat
    count, bound = derivation.fiber_class_count(rule, X, args.radius, L)
    ok = count <= bound
    report = {"rule": rule.name, "R": args.radius, "L": L,
              "fiber_class_count": count, "bound": bound, "passed": ok}
    out = args.out or _out_path(args, "fibers.json")
    io.dump_json(report, out)
    print(f"fiber count {count} vs bound {bound:.6g}: "
          f"{'pass' if ok else 'FAIL'}; wrote {out}")
    return 0 if ok else 1


def cmd_theorem_harness(args) -> int:
    X = io.load_point_set(args.input)
    rules = [io.load_rule(p) for p in args.rules]
    L = args.L
    if L is None:
        grid = [args.radius / 2, args.radius]
        L = repetitivity.lr_constant(X, grid).L_hat
    cfg = derivation.TheoremHarnessConfig(
        n=args.n, R=args.radius, L=L, override_n=args.override_n,
        rule_ids=[r.name for r in rules])
    cfg.validate()
    family = derivation.build_family_F(X, args.radius, args.n, L,
                                       tol=args.tol)
    matrices = [derivation.relation_Ri(r, family, X, cfg, tol=args.tol)
                for r in rules]
    equal_pairs = derivation.compare_relations(matrices)
    ok = len(family.classes) <= family.bound
    report = {
        "n": args.n, "R": args.radius, "L": L,
        "override_n": args.override_n,
        "family_size": len(family.classes), "family_bound": family.bound,
        "family_within_bound": ok,
        "inner_radius": matrices[0].inner_radius if matrices else None,
        "exploratory_inner_radius": matrices[0].exploratory
        if matrices else None,
        "matrices": [{"rule": m.rule_id, "entries": m.entries,
                      "reflexive": m.is_reflexive(),
                      "occurrences": m.occurrence_counts}
                     for m in matrices],
        "equal_matrix_pairs": [[matrices[i].rule_id, matrices[j].rule_id]
                               for i, j in equal_pairs],
    }
    out = args.out or _out_path(args, "theorem-harness.json")
    io.dump_json(report, out)
    print(f"family size {len(family.classes)} (bound {family.bound:.6g}); "
          f"{len(equal_pairs)} equal matrix pairs; wrote {out}")
    return 0 if ok else 1


def cmd_verify(args) -> int:
    X = io.load_point_set(args.input)
    report = verify.VerificationReport(profile=args.profile)
    if args.check:
        L = args.L
        if L is None and args.check in ("return-gap", "extension-count",
                                        "cell-geometry", "cell-class-count",
                                        "fiber-bound"):
            R = args.radius or 5.0
            try:
                L = repetitivity.lr_constant(X, [R / 2, R]).L_hat
            except DeloneError:
                L = 2.0
        R = args.radius or 5.0
        if args.check == "return-gap":
            verify.check_return_gap(X, R, L, report)
        elif args.check == "delone-params":
            verify.check_delone_params(X, report)
        elif args.check == "voronoi-localization":
            verify.check_voronoi_localization(X, report)
        elif args.check == "tiling-area":
            verify.check_tiling_area(X, report)
        elif args.check == "extension-count":
            verify.check_extension_count(X, R / 2, R, L, report)
        elif args.check == "cell-geometry":
            verify.check_cell_geometry(X, R, L, report)
        elif args.check == "cell-class-count":
            verify.check_cell_class_count(X, R, L, report)
        elif args.check == "fiber-bound":
            verify.check_fiber_bound(X, R, L, s=R / 4, report=report)
        elif args.check == "factor-lr":
            verify.check_factor_lr_bound(X, L or 2.0, [R / 2, R], report)
        else:
            raise UsageError(f"unknown check {args.check!r}")
    else:
        report = verify.verify_all(X, profile=args.profile, L=args.L)
    out = args.out or _out_path(args, "verify.json")
    io.save_report(report, out)
    for c in report.checks:
        tag = "skip" if c.get("skipped") else ("pass" if c["passed"] else "FAIL")
        print(f"[{tag}] {c['name']}: {c['detail']}")
    print(f"wrote {out}")
    return 0 if report.all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="delone",
        description="Computational toolkit for Delone sets of finite type: "
                    "atlases, Voronoi localization, repetitivity, the Delone "
                    "metric and local derivation factor maps.")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for any randomized internals (default 0)")
    p.add_argument("--tol", type=float, default=1e-9,
                   help="point identity tolerance")
    p.add_argument("--profile", choices=verify.PROFILES, default="desk",
                   help="verification scale: smoke (fast sanity), desk "
                   "(moderate radii), deep (large radii, all checks)")
    p.add_argument("--out-dir", default=None, help="directory for artifacts")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a point-set model")
    g.add_argument("--model", required=True,
                   choices=("lattice", "fibonacci", "silver", "periodic",
                            "ammann-beenker", "fibonacci-cp", "custom"))
    g.add_argument("--window", type=float, required=True)
    g.add_argument("--out", default=None)
    g.add_argument("--basis", default="[[1.0]]",
                   help="JSON matrix for --model lattice")
    g.add_argument("--scheme", default=None,
                   help="scheme JSON file for --model custom")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("atlas", help="R-patch classes and return gap")
    a.add_argument("--input", required=True)
    a.add_argument("--radius", type=float, required=True)
    a.add_argument("--gap", action="store_true")
    a.add_argument("--out", default=None)
    a.set_defaults(func=cmd_atlas)

    v = sub.add_parser("voronoi", help="Voronoi cells, optional SVG")
    v.add_argument("--input", required=True)
    v.add_argument("--patch-radius", type=float, default=None,
                   help="cells of the occurrence set of the origin patch")
    v.add_argument("--svg", default=None)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_voronoi)

    r = sub.add_parser("repetitivity", help="M-hat(R) and L-hat")
    r.add_argument("--input", required=True)
    r.add_argument("--rmax", type=float, required=True)
    r.add_argument("--grid-step", type=float, required=True)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_repetitivity)

    m = sub.add_parser("metric", help="Delone distance between two sets")
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.add_argument("--tol", type=float, default=1e-4, dest="tol")
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_metric)

    d = sub.add_parser("derive", help="apply a local derivation rule")
    d.add_argument("--input", required=True)
    d.add_argument("--rule", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_derive)

    f = sub.add_parser("fibers", help="fiber class count of a rule")
    f.add_argument("--input", required=True)
    f.add_argument("--rule", required=True)
    f.add_argument("--radius", type=float, required=True)
    f.add_argument("--L", type=float, default=None)
    f.add_argument("--out", default=None)
    f.set_defaults(func=cmd_fibers)

    t = sub.add_parser("theorem-harness",
                       help="family construction and relation matrices")
    t.add_argument("--input", required=True)
    t.add_argument("--rules", nargs="+", required=True)
    t.add_argument("--n", type=int, required=True)
    t.add_argument("--radius", type=float, required=True)
    t.add_argument("--L", type=float, default=None)
    t.add_argument("--override-n", action="store_true",
                   help="allow n below the theorem's inequality "
                   "(exploratory; inner radius falls back to R)")
    t.add_argument("--out", default=None)
    t.set_defaults(func=cmd_theorem_harness)

    ver = sub.add_parser("verify", help="structural verification checks")
    ver.add_argument("--input", required=True)
    ver.add_argument("--check", default=None,
                     help="run a single named check instead of the profile")
    ver.add_argument("--radius", type=float, default=None)
    ver.add_argument("--L", type=float, default=None)
    ver.add_argument("--out", default=None)
    ver.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DeloneError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
