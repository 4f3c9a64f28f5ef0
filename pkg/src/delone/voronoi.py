"""Voronoi cells of points and of occurrence sets, via cutoff localization.

A cell computed against the neighbors in B_cutoff(x) is certified correct
when twice its circumradius is at most the cutoff: any site outside the
cutoff is then too far to cut the cell.  With cutoff = 4 R_hat this is the
guaranteed regime for Delone sets.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry
from .atlas import ReturnVectorSet, return_vectors
from .core import (
    ETA,
    CloudClassifier,
    Patch,
    PatchClass,
    WindowedDeloneSet,
    build_windowed_set,
    estimate_delone_params,
    extract_patch,
    norms,
)
from .errors import (
    InputError,
    InsufficientWindow,
    NoReturnVectorsFound,
    UnboundedCell,
)


@dataclass
class Polytope:
    """A Voronoi cell: halfspace intersection with enumerated vertices."""

    dim: int
    halfspaces: list                 # (normal, offset) pairs: {y : <n,y> <= c}
    vertices: np.ndarray             # (m, dim); interval endpoints for d=1
    site: np.ndarray

    def diameter(self) -> float:
        if self.dim == 1:
            return float(self.vertices[1, 0] - self.vertices[0, 0])
        return geometry.polygon_diameter(self.vertices)

    def circumradius(self) -> float:
        return float(np.max(norms(self.vertices - self.site)))

    def inradius(self) -> float:
        """Largest r with B_r(site) inside the cell."""
        best = np.inf
        for n, c in self.halfspaces:
            n = np.asarray(n, dtype=float)
            best = min(best, (c - float(n @ self.site)) / np.linalg.norm(n))
        return float(best)

    def area(self) -> float:
        if self.dim != 2:
            raise ValueError("area is only defined for d=2 cells")
        return geometry.polygon_area(self.vertices)

    def contains(self, p, tol: float = ETA) -> bool:
        p = np.asarray(p, dtype=float).reshape(self.dim)
        for n, c in self.halfspaces:
            if float(np.asarray(n) @ p) > c + tol * (np.linalg.norm(n) + 1):
                return False
        return True


def default_cutoff(X: WindowedDeloneSet) -> float:
    params = X.meta.get("_delone_params")
    if params is None:
        params = estimate_delone_params(X)
        X.meta["_delone_params"] = params
    return 4.0 * params[1]


def voronoi_cell(X: WindowedDeloneSet, x, cutoff: float | None = None,
                 tol: float = ETA) -> Polytope:
    """Voronoi cell of x from the bisectors against X ∩ B_cutoff(x)."""
    x = np.asarray(x, dtype=float).reshape(X.dim)
    xi = X.find_point(x, tol=1e-7)
    if xi < 0:
        raise InputError("site is not a point of the set")
    x = X.points[xi]
    if cutoff is None:
        cutoff = default_cutoff(X)
    if np.linalg.norm(x) + cutoff > X.window_radius + ETA:
        raise InsufficientWindow(
            f"site at {np.linalg.norm(x):.3f} with cutoff {cutoff} exits "
            f"the window of radius {X.window_radius}")
    idx = X.query_ball(x, cutoff, strict=False)
    idx = idx[idx != xi]
    neighbors = X.points[idx]
    if X.dim == 1:
        below = neighbors[neighbors[:, 0] < x[0] - tol]
        above = neighbors[neighbors[:, 0] > x[0] + tol]
        if len(below) == 0 or len(above) == 0:
            raise UnboundedCell("no neighbor within cutoff on one side")
        lo = float((x[0] + np.max(below[:, 0])) / 2.0)
        hi = float((x[0] + np.min(above[:, 0])) / 2.0)
        halfspaces = [(np.array([-1.0]), -lo), (np.array([1.0]), hi)]
        return Polytope(dim=1, halfspaces=halfspaces,
                        vertices=np.array([[lo], [hi]]), site=x)

    order = np.argsort(norms(neighbors - x))
    poly = geometry.square(x, 2.0 * cutoff)
    halfspaces = []
    for nb in neighbors[order]:
        n = nb - x
        c = float(n @ (x + nb)) / 2.0
        clipped = geometry.clip_halfplane(poly, n, c)
        if len(clipped) < len(poly) or _poly_changed(poly, clipped):
            halfspaces.append((n, c))
        poly = clipped
        if len(poly) == 0:
            break
    poly = geometry.dedupe_ring(poly, tol)
    if len(poly) < 3:
        raise UnboundedCell("cell degenerated; inconsistent input")
    cell = Polytope(dim=2, halfspaces=halfspaces,
                    vertices=geometry.ensure_ccw(poly), site=x)
    if 2.0 * cell.circumradius() > cutoff + 1e-7:
        raise UnboundedCell(
            f"cell circumradius {cell.circumradius():.3f} is not certified "
            f"by cutoff {cutoff}")
    return cell


def _poly_changed(before: np.ndarray, after: np.ndarray) -> bool:
    if len(before) != len(after):
        return True
    return bool(np.max(np.abs(before - after)) > 1e-12)


@dataclass
class PatchVoronoi:
    """Voronoi cells of the occurrence set X_P, in absolute coordinates."""

    patch: PatchClass
    base_center: np.ndarray
    vectors: np.ndarray              # return vectors v (relative to base)
    sites: np.ndarray                # base + v
    cells: list                      # Polytope or None (window-limited)
    site_set: WindowedDeloneSet
    cutoff: float


def voronoi_cells_of_patch(X: WindowedDeloneSet, P: PatchClass,
                           rv: ReturnVectorSet | None = None,
                           tol: float = ETA) -> PatchVoronoi:
    """Cells of the Delone set X_P + x for every window-valid site."""
    if rv is None:
        rv = return_vectors(X, P, tol=tol)
    vectors = rv.vectors.points
    sites = vectors + rv.base_center
    S = build_windowed_set(sites, X.dim,
                           rv.vectors.window_radius
                           + float(np.linalg.norm(rv.base_center)) + ETA,
                           meta={"kind": "occurrence-sites"})
    _, R_S = estimate_delone_params(S)
    cutoff = 4.0 * R_S
    cells = []
    for site in sites:
        if np.linalg.norm(site) + cutoff > S.window_radius + ETA:
            cells.append(None)
            continue
        cells.append(voronoi_cell(S, site, cutoff, tol))
    if not any(c is not None for c in cells):
        raise InsufficientWindow(
            "no occurrence site admits a full cutoff neighborhood")
    return PatchVoronoi(patch=P, base_center=rv.base_center, vectors=vectors,
                        sites=sites, cells=cells, site_set=S, cutoff=cutoff)


def cell_cloud(X: WindowedDeloneSet, cell: Polytope,
               tol: float = ETA) -> np.ndarray:
    """Points of X inside the (closed) cell, as offsets from the site."""
    rad = cell.circumradius() + tol
    if np.linalg.norm(cell.site) + rad > X.window_radius + ETA:
        raise InsufficientWindow("cell is not fully inside the window")
    idx = X.query_ball(cell.site, rad, strict=False)
    pts = X.points[idx]
    keep = [cell.contains(p, tol) for p in pts]
    return pts[np.asarray(keep, dtype=bool)] - cell.site


def cell_patch_classes(X: WindowedDeloneSet, P: PatchClass,
                       pv: PatchVoronoi | None = None, tol: float = ETA):
    """Classes of the clouds X ∩ V_{P,v} up to translation.

    Returns (classes, per-cell class index or -1 for window-limited cells).
    Clouds carry a fixed dummy radius: class identity is by translation
    match of the clouds only.
    """
    if pv is None:
        pv = voronoi_cells_of_patch(X, P, tol=tol)
    cc = CloudClassifier(tol=tol)
    assignment = []
    for site, cell in zip(pv.sites, pv.cells):
        if cell is None:
            assignment.append(-1)
            continue
        try:
            cloud = cell_cloud(X, cell, tol)
        except InsufficientWindow:
            assignment.append(-1)
            continue
        order = np.lexsort(tuple(cloud[:, k]
                                 for k in reversed(range(cloud.shape[1]))))
        patch = Patch(center=site, radius=1.0, offsets=cloud[order])
        assignment.append(cc.add(patch, center=site))
    return cc.classes, assignment


def cell_return_vectors(X: WindowedDeloneSet, cell: Polytope,
                        max_norm: float, tol: float = ETA) -> np.ndarray:
    """All w with (X - w) ∩ V = X ∩ V found in the window, 0 included.

    Candidates are searched over X - c for a fixed cell point c (an (X - X)
    difference); the search space choice is recorded by callers.
    """
    C = cell_cloud(X, cell, tol) + cell.site      # absolute coordinates
    if len(C) == 0:
        return np.zeros((0, X.dim))
    c0 = C[0]
    rad = cell.circumradius()
    found = []
    for xp in X.points:
        w = xp - c0
        if np.linalg.norm(w) > max_norm + ETA:
            continue
        if np.linalg.norm(cell.site + w) + rad > X.window_radius:
            continue
        shifted = C + w
        ok = all(X.find_point(p, tol) >= 0 for p in shifted)
        if not ok:
            continue
        # no extra points of X may fall in the shifted cell
        idx = X.query_ball(cell.site + w, rad + tol, strict=False)
        extra = 0
        for p in X.points[idx]:
            if cell.contains(p - w, tol):
                extra += 1
        if extra == len(C):
            found.append(w)
    if not found:
        return np.zeros((0, X.dim))
    found = np.asarray(found)
    return found[np.argsort(norms(found))]


def cell_return_patches(X: WindowedDeloneSet, P: PatchClass, v_index: int,
                        n: int, L: float,
                        pv: PatchVoronoi | None = None, tol: float = ETA,
                        max_w: float | None = None):
    """Distinct classes of the patches at centers site + w of radius L^n R,
    where w ranges over the return vectors of the cell's cloud.

    Returns (classes, ws).  Linear repetitivity with constant L bounds the
    count by (968 L^{n+3})^d.
    """
    if pv is None:
        pv = voronoi_cells_of_patch(X, P, tol=tol)
    cell = pv.cells[v_index]
    if cell is None:
        raise InsufficientWindow("selected cell is window-limited")
    R = P.radius
    big = (L ** n) * R
    site = pv.sites[v_index]
    if max_w is None:
        max_w = X.window_radius - big - float(np.linalg.norm(site))
    if max_w <= 0:
        raise InsufficientWindow(
            f"window {X.window_radius} cannot host patches of radius {big}")
    ws = cell_return_vectors(X, cell, max_norm=max_w, tol=tol)
    ok = [w for w in ws
          if np.linalg.norm(site + w) + big <= X.window_radius + ETA]
    if not ok:
        raise NoReturnVectorsFound("no cell return vector fits the window")
    cc = CloudClassifier(tol=tol)
    for w in ok:
        patch = extract_patch(X, site + w, big)
        cc.add(patch, center=site + w)
    return cc.classes, np.asarray(ok)


def write_svg(path: str, cells: list, sites: np.ndarray,
              viewport: float | None = None) -> None:
    """Static SVG figure: d=2 cells as polygons, sites as dots."""
    cells = [c for c in cells if c is not None]
    if viewport is None:
        viewport = max(float(np.max(np.abs(c.vertices))) for c in cells) * 1.05
    size = 800
    scale = size / (2 * viewport)

    def sx(x):
        return (x + viewport) * scale

    def sy(y):
        return (viewport - y) * scale

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for c in cells:
        pts = " ".join(f"{sx(v[0]):.2f},{sy(v[1]):.2f}" for v in c.vertices)
        lines.append(f'<polygon points="{pts}" fill="#dce9f5" '
                     f'stroke="#38618c" stroke-width="0.8"/>')
    for s in sites:
        if abs(s[0]) <= viewport and abs(s[1]) <= viewport:
            lines.append(f'<circle cx="{sx(s[0]):.2f}" cy="{sy(s[1]):.2f}" '
                         f'r="2" fill="#222"/>')
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
