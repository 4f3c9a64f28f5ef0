"""Repetitivity function, linear-repetitivity constant, factor-LR check."""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .atlas import Atlas, r_atlas
from .core import WindowedDeloneSet, norms
from .errors import DegenerateDiameter, EmptySites, InsufficientWindow


def covering_radius(sites, region_radius: float,
                    resolution: float | None = None,
                    site_valid_radius: float | None = None):
    """Max distance from a point of B_rho(0) to the nearest site.

    Exact for d=1 (resolution 0); a grid estimate for d=2.  Returns
    (value, resolution); the true covering radius exceeds the estimate by
    at most resolution * sqrt(d).

    When site_valid_radius is given, the site list is understood to be a
    window onto a larger set, complete only inside that ball.  A test
    point whose nearest observed site is farther than the distance to the
    valid boundary may have an unseen closer site, so its distance is
    censored and the point is dropped rather than inflating the estimate.
    """
    sites = np.asarray(sites, dtype=float)
    if sites.ndim == 1:
        sites = sites.reshape(-1, 1)
    if len(sites) == 0:
        raise EmptySites("covering radius of an empty site set")
    rho = float(region_radius)
    if sites.shape[1] == 1:
        xs = np.sort(sites[:, 0])
        tests = [-rho, rho]
        mids = (xs[:-1] + xs[1:]) / 2.0
        tests.extend(mids[(mids >= -rho) & (mids <= rho)])
        tests = np.asarray(tests)
        pos = np.searchsorted(xs, tests)
        best = np.full(len(tests), np.inf)
        for shift in (0, -1):
            j = np.clip(pos + shift, 0, len(xs) - 1)
            best = np.minimum(best, np.abs(tests - xs[j]))
        if site_valid_radius is not None:
            keep = np.abs(tests) + best <= site_valid_radius + 1e-9
            if not np.any(keep):
                raise InsufficientWindow(
                    "every covering test point is censored by the window")
            best = best[keep]
        return float(np.max(best)), 0.0
    if resolution is None:
        resolution = max(rho / 256.0, 1e-3)
    ax = np.arange(-rho, rho + resolution / 2, resolution)
    gx, gy = np.meshgrid(ax, ax)
    test = np.column_stack([gx.ravel(), gy.ravel()])
    test = test[norms(test) <= rho]
    d, _ = cKDTree(sites).query(test)
    if site_valid_radius is not None:
        keep = norms(test) + d <= site_valid_radius + 1e-9
        if not np.any(keep):
            raise InsufficientWindow(
                "every covering test point is censored by the window")
        d = d[keep]
    return float(np.max(d)), float(resolution)


@dataclass
class RepetitivityEstimate:
    R_grid: list
    M_of_R: list
    L_hat: float
    per_class: list = field(default_factory=list)
    threshold_radius: float | None = None
    resolution: float = 0.0


def _atlas_stats(X: WindowedDeloneSet, R: float, atlas: Atlas,
                 resolution: float | None):
    """Per-class covering radii and the resulting M-hat for one radius."""
    rho = X.window_radius - 2 * R
    if rho <= 0:
        raise InsufficientWindow(f"need R < W/2 for covering statistics")
    rows = []
    M = 0.0
    res_used = 0.0
    for cls, occ in zip(atlas.classes, atlas.occurrence_map):
        cov, res = covering_radius(occ, rho, resolution,
                                   site_valid_radius=X.window_radius - R)
        res_used = max(res_used, res)
        rep = cls.representative
        # extent relative to the patch center (representatives are anchored
        # at the least offset, not at the center)
        if cls.center_rep_offset is not None:
            maxoff = float(np.max(np.sqrt(np.sum(
                (rep.offsets - cls.center_rep_offset) ** 2, axis=1))))
        else:
            maxoff = rep.max_offset_norm()
        diam = rep.diameter()
        rows.append({"R": R, "size": cls.size, "multiplicity": cls.multiplicity,
                     "covering": cov, "diam": diam, "max_offset": maxoff})
        M = max(M, cov + maxoff)
    return M, rows, res_used


def repetitivity_function(X: WindowedDeloneSet, R: float,
                          resolution: float | None = None,
                          atlas: Atlas | None = None) -> float:
    """M-hat(R): worst covering radius of a class occurrence set plus the
    class's extent; every ball of that radius contains every R-patch."""
    if R >= X.window_radius / 4:
        raise InsufficientWindow(f"need R < W/4, got {R}")
    if atlas is None:
        atlas = r_atlas(X, R)
    M, _, _ = _atlas_stats(X, R, atlas, resolution)
    return M


def lr_constant(X: WindowedDeloneSet, R_grid,
                resolution: float | None = None) -> RepetitivityEstimate:
    """Estimate the linear-repetitivity constant over a radius grid.

    L_hat = max over classes of (covering(occurrences) + diam) / diam,
    clamped below at 1; single-point patches are excluded.
    """
    R_grid = sorted(float(R) for R in R_grid)
    if R_grid[-1] >= X.window_radius / 4:
        raise InsufficientWindow("largest grid radius must be below W/4")
    M_list, rows_all = [], []
    L = 1.0
    res_used = 0.0
    any_nondegenerate = False
    for R in R_grid:
        atlas = r_atlas(X, R)
        M, rows, res = _atlas_stats(X, R, atlas, resolution)
        res_used = max(res_used, res)
        M_list.append(M)
        rows_all.extend(rows)
        for row in rows:
            if row["diam"] <= 0:
                continue
            any_nondegenerate = True
            L = max(L, (row["covering"] + row["diam"]) / row["diam"])
    if not any_nondegenerate:
        raise DegenerateDiameter("all classes are single-point patches")
    threshold = None
    for i, R in enumerate(R_grid):
        if all(M_list[j] <= (L + 1) * 2 * R_grid[j] + res_used
               for j in range(i, len(R_grid))):
            threshold = R
            break
    return RepetitivityEstimate(R_grid=R_grid, M_of_R=M_list, L_hat=float(L),
                                per_class=rows_all,
                                threshold_radius=threshold,
                                resolution=res_used)


@dataclass
class FactorLRReport:
    L: float
    per_class: list
    tau_hat: float | None
    all_pass: bool


def check_factor_lr(Y: WindowedDeloneSet, L: float, R_grid,
                    resolution: float | None = None) -> FactorLRReport:
    """Verify the factor linear-repetitivity bound at 5 L diam(P).

    For each atlas class P of Y over the grid: every ball of radius
    5 L diam(P) in the valid region must contain a translated copy of P,
    i.e. covering(occurrences) + max_offset <= 5 L diam.  tau_hat is the
    smallest diameter threshold above which every class passes.
    """
    rows = []
    res_used = 0.0
    for R in sorted(float(R) for R in R_grid):
        if R >= Y.window_radius / 4:
            raise InsufficientWindow("grid radius must be below W/4")
        atlas = r_atlas(Y, R)
        _, stats, res = _atlas_stats(Y, R, atlas, resolution)
        res_used = max(res_used, res)
        for row in stats:
            if row["diam"] <= 0:
                continue
            # the 5L-ball must fit the covering region the estimate used
            if 5 * L * row["diam"] > Y.window_radius - 2 * R:
                continue
            row = dict(row)
            row["bound"] = 5 * L * row["diam"]
            row["passed"] = (row["covering"] + row["max_offset"]
                             <= row["bound"] + res_used + 1e-9)
            rows.append(row)
    failing = [r["diam"] for r in rows if not r["passed"]]
    if not rows:
        tau = None
    elif failing:
        tau = max(failing) + 1e-9
    else:
        tau = min(r["diam"] for r in rows)
    return FactorLRReport(L=float(L), per_class=rows, tau_hat=tau,
                          all_pass=not failing)
