"""End-to-end structural verification of a windowed point set.

Each check returns a dict row; verify_all runs a profile's worth of them
and aggregates.  Checks that cannot run on the given input (window too
small, periodic set) are reported as skipped with a reason, not as passed.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .atlas import detect_period, extension_counts, min_return_gap, r_atlas
from .core import WindowedDeloneSet, estimate_delone_params, norms
from .errors import DeloneError, InsufficientWindow, PeriodicInput
from .repetitivity import check_factor_lr, lr_constant
from .voronoi import default_cutoff, voronoi_cell, voronoi_cells_of_patch


@dataclass
class VerificationReport:
    profile: str
    checks: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks if not c.get("skipped"))

    @property
    def failures(self) -> list:
        return [c for c in self.checks
                if not c.get("skipped") and not c["passed"]]

    def add(self, name: str, passed: bool, detail: str,
            skipped: bool = False, **extra):
        row = {"name": name, "passed": bool(passed), "detail": detail,
               "skipped": skipped}
        row.update(extra)
        self.checks.append(row)


def _skip_on(report, name):
    """Context turning window or periodicity errors into skip rows."""
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is None:
                return False
            if isinstance(exc, (InsufficientWindow, PeriodicInput)):
                report.add(name, True, str(exc), skipped=True)
                return True
            if isinstance(exc, DeloneError):
                report.add(name, False, f"{type(exc).__name__}: {exc}")
                return True
            return False
    return _Ctx()


def check_delone_params(X: WindowedDeloneSet, report: VerificationReport,
                        r: float | None = None, R: float | None = None):
    """Empirical (r_hat, R_hat) against the declared (or supplied) values."""
    r = r if r is not None else X.r_declared
    R = R if R is not None else X.R_declared
    with _skip_on(report, "delone-params"):
        r_hat, R_hat = estimate_delone_params(X)
        ok = True
        notes = [f"r_hat={r_hat:.6g}", f"R_hat={R_hat:.6g}"]
        if r is not None:
            ok = ok and r_hat >= r - 1e-6
            notes.append(f"declared r={r:.6g}")
        if R is not None:
            ok = ok and R_hat <= R + max(0.05 * R, 1e-6)
            notes.append(f"declared R={R:.6g}")
        report.add("delone-params", ok, ", ".join(notes),
                   r_hat=r_hat, R_hat=R_hat)


def check_return_gap(X: WindowedDeloneSet, R: float, L: float,
                     report: VerificationReport, strict: bool = True):
    """With strict=True, periodic input fails the check (the lemma's
    hypothesis is violated); with strict=False it is skipped."""
    with _skip_on(report, "return-gap"):
        try:
            gap, worst = min_return_gap(X, R)
        except PeriodicInput as exc:
            if strict:
                report.add("return-gap", False, f"PeriodicInput: {exc}")
            else:
                report.add("return-gap", True, f"PeriodicInput: {exc}",
                           skipped=True)
            return
        bound = R / (11.0 * L)
        report.add("return-gap", gap >= bound - 1e-9,
                   f"min gap {gap:.6g} vs bound R/(11L) = {bound:.6g} "
                   f"(worst class size {worst.size})",
                   gap=gap, bound=bound)


def check_voronoi_localization(X: WindowedDeloneSet,
                               report: VerificationReport,
                               samples: int = 12):
    """Cells from the 4R_hat cutoff equal cells from twice that cutoff."""
    with _skip_on(report, "voronoi-localization"):
        cutoff = default_cutoff(X)
        idx = X.interior_indices(2 * cutoff + 1e-9)
        if len(idx) == 0:
            raise InsufficientWindow("no site admits the doubled cutoff")
        idx = idx[np.argsort(norms(X.points[idx]))][:samples]
        worst = 0.0
        for i in idx:
            c1 = voronoi_cell(X, X.points[i], cutoff)
            c2 = voronoi_cell(X, X.points[i], 2 * cutoff)
            if len(c1.vertices) != len(c2.vertices):
                worst = np.inf
                break
            v1 = c1.vertices
            v2 = c2.vertices
            if X.dim == 2:
                # align vertex rings (both are CCW, maybe rotated)
                k = int(np.argmin(norms(v2 - v1[0])))
                v2 = np.roll(v2, -k, axis=0)
            worst = max(worst, float(np.max(np.abs(v1 - v2))))
        report.add("voronoi-localization", worst <= 1e-7,
                   f"max vertex deviation {worst:.3g} over {len(idx)} sites",
                   deviation=worst)


def check_tiling_area(X: WindowedDeloneSet, report: VerificationReport,
                      region_radius: float | None = None,
                      rel_tol: float = 1e-6):
    """Voronoi cells of the sites in a disk tile it: union area matches."""
    if X.dim != 2:
        report.add("tiling-area", True, "d=1 input", skipped=True)
        return
    with _skip_on(report, "tiling-area"):
        from shapely.geometry import Point, Polygon
        from shapely.ops import unary_union

        cutoff = default_cutoff(X)
        if region_radius is None:
            region_radius = max(X.window_radius - 2 * cutoff, 0.0)
        if region_radius <= 0:
            raise InsufficientWindow("window too small for a tiling region")
        region = Point(0.0, 0.0).buffer(region_radius, quad_segs=256)
        polys = []
        for i in X.interior_indices(cutoff):
            site = X.points[i]
            if np.linalg.norm(site) > region_radius + cutoff:
                continue
            cell = voronoi_cell(X, site, cutoff)
            polys.append(Polygon(cell.vertices))
        union = unary_union(polys)
        covered = union.intersection(region).area
        target = region.area
        rel = abs(covered - target) / target
        # overlap excess would double-count: check it separately
        overlap = sum(p.area for p in polys) - union.area
        ok = rel <= rel_tol and overlap <= rel_tol * target
        report.add("tiling-area", ok,
                   f"covered {covered:.9g} of {target:.9g} "
                   f"(rel err {rel:.2e}, overlap {overlap:.2e})",
                   rel_error=rel)


def check_cell_geometry(X: WindowedDeloneSet, R: float, L: float,
                        report: VerificationReport):
    """Occurrence-set Voronoi cells: diam <= 4LR and an R/(11L) inner ball."""
    with _skip_on(report, "cell-geometry"):
        from .core import canonical_class, extract_patch

        v = detect_period(X)
        if v is not None:
            raise PeriodicInput("periodic input")
        i0 = int(np.argmin(norms(X.points)))
        Xs = X.translate(X.points[i0])
        P = canonical_class(extract_patch(Xs, np.zeros(X.dim), R))
        pv = voronoi_cells_of_patch(Xs, P)
        diam_bound = 4.0 * L * R
        ball_bound = R / (11.0 * L)
        worst_d, worst_b = 0.0, np.inf
        checked = 0
        for cell in pv.cells:
            if cell is None:
                continue
            checked += 1
            worst_d = max(worst_d, cell.diameter())
            worst_b = min(worst_b, cell.inradius())
        if checked == 0:
            raise InsufficientWindow("no certified cell in the window")
        ok = worst_d <= diam_bound + 1e-9 and worst_b >= ball_bound - 1e-9
        report.add("cell-geometry", ok,
                   f"max diam {worst_d:.6g} (bound {diam_bound:.6g}), "
                   f"min inradius {worst_b:.6g} (bound {ball_bound:.6g}) "
                   f"over {checked} cells")


def check_cell_class_count(X: WindowedDeloneSet, R: float, L: float,
                           report: VerificationReport):
    with _skip_on(report, "cell-class-count"):
        from .core import canonical_class, extract_patch
        from .voronoi import cell_patch_classes

        v = detect_period(X)
        if v is not None:
            raise PeriodicInput("periodic input")
        i0 = int(np.argmin(norms(X.points)))
        Xs = X.translate(X.points[i0])
        P = canonical_class(extract_patch(Xs, np.zeros(X.dim), R))
        classes, _ = cell_patch_classes(Xs, P)
        bound = (352.0 * L ** 3) ** X.dim
        report.add("cell-class-count", len(classes) <= bound,
                   f"{len(classes)} cell-cloud classes vs bound "
                   f"(352 L^3)^d = {bound:.6g}",
                   count=len(classes), bound=bound)


def check_extension_count(X: WindowedDeloneSet, R1: float, R2: float,
                          L: float, report: VerificationReport):
    with _skip_on(report, "extension-count"):
        mx, _ = extension_counts(X, R1, R2)
        bound = ((44.0 * L * L) ** X.dim) * (R2 / R1) ** X.dim
        report.add("extension-count", mx <= bound,
                   f"max {mx} extensions of an R1={R1} class to R2={R2} "
                   f"vs bound {bound:.6g}", count=mx, bound=bound)


def check_fiber_bound(X: WindowedDeloneSet, R: float, L: float, s: float,
                      report: VerificationReport):
    with _skip_on(report, "fiber-bound"):
        from .derivation import fiber_class_count, identity_rule

        rule = identity_rule(X, s)
        count, bound = fiber_class_count(rule, X, R, L)
        report.add("fiber-bound", count <= bound,
                   f"identity-rule fiber count {count} vs bound "
                   f"(55 L^2)^d = {bound:.6g}", count=count, bound=bound)


def check_factor_lr_bound(X: WindowedDeloneSet, L: float, R_grid,
                          report: VerificationReport):
    with _skip_on(report, "factor-lr"):
        rep = check_factor_lr(X, L, R_grid)
        n_rows = len(rep.per_class)
        if n_rows == 0:
            raise InsufficientWindow("no class fits the 5L bound region")
        report.add("factor-lr", rep.all_pass,
                   f"{n_rows} classes checked at 5 L diam, "
                   f"tau_hat={rep.tau_hat}", tau_hat=rep.tau_hat)


PROFILES = ("smoke", "desk", "deep")


def verify_all(X: WindowedDeloneSet, profile: str = "desk",
               r: float | None = None, R: float | None = None,
               L: float | None = None) -> VerificationReport:
    """Run the structural checks appropriate for the profile.

    smoke: parameters and localization only.  desk: adds return gap,
    counting bounds, cell geometry at a moderate radius.  deep: larger
    radii and the factor repetitivity check.
    """
    if profile not in PROFILES:
        raise ValueError(f"profile must be one of {PROFILES}")
    t0 = time.time()
    report = VerificationReport(profile=profile)
    check_delone_params(X, report, r=r, R=R)
    check_voronoi_localization(X, report)
    if X.dim == 2:
        check_tiling_area(X, report)
    if profile != "smoke":
        try:
            _, R_hat = estimate_delone_params(X)
        except DeloneError:
            R_hat = X.window_radius / 50
        base = max(2.0 * R_hat, 1.0)
        scale = 2.0 if profile == "desk" else 4.0
        Rv = base * scale
        if L is None:
            try:
                grid = [base, 2 * base]
                if profile == "deep":
                    grid.append(4 * base)
                est = lr_constant(X, [g for g in grid
                                      if g < X.window_radius / 4])
                L = est.L_hat
            except DeloneError as exc:
                report.add("lr-constant", True,
                           f"estimation unavailable: {exc}", skipped=True)
        if L is not None:
            check_return_gap(X, Rv, L, report, strict=False)
            check_extension_count(X, base, Rv, L, report)
            check_cell_geometry(X, base, L, report)
            check_cell_class_count(X, base, L, report)
            if profile == "deep":
                check_fiber_bound(X, Rv, L, s=base / 2.0, report=report)
                check_factor_lr_bound(X, L, [base, Rv], report)
    report.elapsed = time.time() - t0
    return report
