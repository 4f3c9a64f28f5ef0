"""Constructors for concrete windowed Delone sets.

Lattices, one-dimensional substitution point sets (two-sided fixed points),
cut-and-project model sets, and patch-class decorations.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from . import geometry
from .core import (
    ETA,
    CloudClassifier,
    Patch,
    PatchClass,
    WindowedDeloneSet,
    build_windowed_set,
    extract_patch,
    norms,
)
from .errors import (
    EmptyAcceptanceWindow,
    InfeasibleEnumeration,
    NonPrimitiveRule,
    SingularBasis,
    UnknownPatchClass,
)

PHI = (1.0 + np.sqrt(5.0)) / 2.0
SILVER = 1.0 + np.sqrt(2.0)


# ---------------------------------------------------------------------------
# 1-D substitutions


@dataclass
class SubstitutionRule1D:
    alphabet: list
    rule: dict                      # symbol -> word (list of symbols)
    tile_lengths: dict              # symbol -> positive length
    seed_symbol: str

    def matrix(self) -> np.ndarray:
        """Abelianization M[i, j] = count of alphabet[i] in rule[alphabet[j]]."""
        k = len(self.alphabet)
        index = {s: i for i, s in enumerate(self.alphabet)}
        M = np.zeros((k, k), dtype=np.int64)
        for j, s in enumerate(self.alphabet):
            for t in self.rule[s]:
                M[index[t], j] += 1
        return M

    def is_primitive(self) -> bool:
        M = self.matrix()
        P = np.eye(len(self.alphabet), dtype=np.int64)
        for _ in range(2 * len(self.alphabet) ** 2 + 2):
            P = np.minimum(P @ M, 10 ** 9)
            if np.all(P > 0):
                return True
        return False


def fibonacci_rule() -> SubstitutionRule1D:
    return SubstitutionRule1D(alphabet=["a", "b"],
                              rule={"a": ["a", "b"], "b": ["a"]},
                              tile_lengths={"a": PHI, "b": 1.0},
                              seed_symbol="a")


def silver_mean_rule() -> SubstitutionRule1D:
    return SubstitutionRule1D(alphabet=["a", "b"],
                              rule={"a": ["a", "a", "b"], "b": ["a"]},
                              tile_lengths={"a": SILVER, "b": 1.0},
                              seed_symbol="a")


def periodic_rule() -> SubstitutionRule1D:
    """Period-2 control case: the integers with alternating labels."""
    return SubstitutionRule1D(alphabet=["a", "b"],
                              rule={"a": ["a", "b"], "b": ["a", "b"]},
                              tile_lengths={"a": 1.0, "b": 1.0},
                              seed_symbol="a")


def _expand(rule: SubstitutionRule1D, word, times: int = 1):
    for _ in range(times):
        word = [t for s in word for t in rule.rule[s]]
    return word


def _legal_pairs(rule: SubstitutionRule1D):
    word = [rule.seed_symbol]
    while len(word) < 4000:
        nxt = _expand(rule, word)
        if len(nxt) == len(word):
            break
        word = nxt
    return {(word[i], word[i + 1]) for i in range(len(word) - 1)}


def _two_sided_seed(rule: SubstitutionRule1D):
    """Smallest power p and legal pair (α, β) with σ^p(α) ending in α and
    σ^p(β) starting with β; seeds the bi-infinite fixed point α.β."""
    pairs = sorted(_legal_pairs(rule))
    for p in range(1, 10):
        for a, b in pairs:
            wa = _expand(rule, [a], p)
            wb = _expand(rule, [b], p)
            if len(wa) > 1 and wa[-1] == a and len(wb) > 1 and wb[0] == b:
                return p, (a, b)
    raise NonPrimitiveRule("no two-sided fixed-point seed found")


def generate_substitution_1d(rule: SubstitutionRule1D,
                             window_radius: float) -> WindowedDeloneSet:
    """Tile endpoints of a two-sided substitution fixed point on [-W, W].

    The origin is a tile endpoint; each point is labeled by the symbol of
    the tile to its right (the expansion extends past the window, so every
    kept point has a known right tile).
    """
    if not rule.is_primitive():
        raise NonPrimitiveRule("substitution matrix is not primitive")
    W = float(window_radius)
    p, (a, b) = _two_sided_seed(rule)
    lmin = min(rule.tile_lengths.values())
    lmax = max(rule.tile_lengths.values())
    need = W + 2.0 * lmax

    index = {s: i for i, s in enumerate(rule.alphabet)}
    lengths = np.array([rule.tile_lengths[s] for s in rule.alphabet])

    def total_len(word):
        return sum(rule.tile_lengths[s] for s in word)

    left, right = [a], [b]
    while total_len(right) < need:
        right = _expand(rule, right, p)
    while total_len(left) < need:
        left = _expand(rule, left, p)

    # Right endpoints: 0, |w0|, |w0|+|w1|, ...  Positions are computed from
    # integer tile counts so equal patches coincide to machine precision.
    rsym = np.array([index[s] for s in right], dtype=np.int64)
    rcounts = np.zeros((len(rsym) + 1, len(rule.alphabet)), dtype=np.int64)
    for j in range(len(rule.alphabet)):
        np.cumsum(rsym == j, out=rcounts[1:, j])
    rpos = rcounts @ lengths
    lsym = np.array([index[s] for s in reversed(left)], dtype=np.int64)
    lcounts = np.zeros((len(lsym) + 1, len(rule.alphabet)), dtype=np.int64)
    for j in range(len(rule.alphabet)):
        np.cumsum(lsym == j, out=lcounts[1:, j])
    lpos = -(lcounts @ lengths)

    pts, labels, counts = [], [], []
    for i, x in enumerate(rpos):
        if x <= W + ETA and i < len(rsym):
            pts.append(x)
            labels.append(int(rsym[i]))
            counts.append(rcounts[i])
    for i in range(1, len(lpos)):
        x = lpos[i]
        if x >= -W - ETA:
            pts.append(x)
            labels.append(int(lsym[i - 1]))
            counts.append(-lcounts[i])

    meta = {"model": "substitution", "alphabet": list(rule.alphabet),
            "tile_lengths": {s: float(rule.tile_lengths[s])
                             for s in rule.alphabet},
            "seed_power": p, "seed_pair": [a, b],
            "tile_counts": [list(map(int, c)) for c in counts]}
    return build_windowed_set(pts, 1, W, labels=labels,
                              r_declared=lmin / 2.0, R_declared=lmax / 2.0,
                              meta=meta)


# ---------------------------------------------------------------------------
# Cut-and-project schemes


@dataclass
class AcceptanceWindow:
    """Bounded acceptance domain in internal space (interval or polygon)."""

    dim: int
    interval: tuple | None = None          # (lo, hi) for dim 1
    polygon: np.ndarray | None = None      # CCW ring for dim 2

    def bound(self) -> float:
        if self.dim == 1:
            return max(abs(self.interval[0]), abs(self.interval[1]))
        return float(np.max(norms(self.polygon)))

    def is_empty(self) -> bool:
        if self.dim == 1:
            return self.interval[1] - self.interval[0] <= ETA
        return geometry.polygon_area(self.polygon) <= ETA

    def classify(self, pts: np.ndarray, tol: float = ETA):
        """(inside, near_boundary) boolean masks for internal coordinates."""
        if self.dim == 1:
            x = pts[:, 0]
            lo, hi = self.interval
            inside = (x > lo + tol) & (x < hi - tol)
            near = (np.abs(x - lo) <= tol) | (np.abs(x - hi) <= tol)
            return inside, near
        inside = np.zeros(len(pts), dtype=bool)
        near = np.zeros(len(pts), dtype=bool)
        poly = self.polygon
        m = len(poly)
        dists = np.full(len(pts), np.inf)
        for i in range(m):
            a, b2 = poly[i], poly[(i + 1) % m]
            edge = b2 - a
            nrm = np.linalg.norm(edge)
            signed = ((pts[:, 0] - a[0]) * edge[1]
                      - (pts[:, 1] - a[1]) * edge[0]) / nrm
            dists = np.minimum(dists, -signed)  # inward distance to this edge
        inside = dists > tol
        near = np.abs(dists) <= tol
        return inside, near


@dataclass
class CutAndProjectScheme:
    total_dim: int
    physical_dim: int
    lattice_basis: np.ndarray          # (N, N)
    physical_projection: np.ndarray    # (d, N)
    internal_projection: np.ndarray    # (N-d, N)
    acceptance_window: AcceptanceWindow
    internal_offset: np.ndarray | None = None   # generic shift, avoids boundary hits
    name: str = "custom"

    def validate(self):
        N, d = self.total_dim, self.physical_dim
        if self.lattice_basis.shape != (N, N):
            raise SingularBasis("lattice basis must be N x N")
        if abs(np.linalg.det(self.lattice_basis)) < 1e-12:
            raise SingularBasis("lattice basis is singular")
        stacked = np.vstack([self.physical_projection, self.internal_projection])
        if np.linalg.matrix_rank(stacked) != N:
            raise SingularBasis("projections are not complementary")
        if self.acceptance_window.is_empty():
            raise EmptyAcceptanceWindow("acceptance window has empty interior")


def fibonacci_scheme() -> CutAndProjectScheme:
    """ℤ² cut-and-project onto the line of slope 1/φ.

    Physical coordinate of (n, m) is nφ + m; internal is nφ' + m with the
    Galois conjugate φ' = 1 - φ.  The acceptance interval reproduces the
    tile endpoints of the Fibonacci substitution up to a global translation.
    """
    phi_c = 1.0 - PHI
    window = AcceptanceWindow(dim=1, interval=(-PHI / 2.0, PHI / 2.0))
    return CutAndProjectScheme(
        total_dim=2, physical_dim=1,
        lattice_basis=np.eye(2),
        physical_projection=np.array([[PHI, 1.0]]),
        internal_projection=np.array([[phi_c, 1.0]]),
        acceptance_window=window,
        internal_offset=np.array([1e-3]),
        name="fibonacci")


def ammann_beenker_scheme() -> CutAndProjectScheme:
    """ℤ⁴ scheme producing the octagonal Ammann–Beenker vertex set."""
    ks = np.arange(4)
    phys = np.vstack([np.cos(ks * np.pi / 4), np.sin(ks * np.pi / 4)])
    internal = np.vstack([np.cos(3 * ks * np.pi / 4),
                          np.sin(3 * ks * np.pi / 4)])
    corners = np.array(np.meshgrid(*[[-0.5, 0.5]] * 4)).reshape(4, -1).T
    proj = corners @ internal.T
    hull = ConvexHull(proj)
    poly = geometry.ensure_ccw(proj[hull.vertices])
    window = AcceptanceWindow(dim=2, polygon=poly)
    return CutAndProjectScheme(
        total_dim=4, physical_dim=2,
        lattice_basis=np.eye(4),
        physical_projection=phys,
        internal_projection=internal,
        acceptance_window=window,
        internal_offset=np.array([0.01234567, 0.00654321]),
        name="ammann-beenker")


def generate_cut_and_project(scheme: CutAndProjectScheme,
                             window_radius: float,
                             max_lattice_points: float = 2.5e8
                             ) -> WindowedDeloneSet:
    """Project accepted lattice points into the physical window B_W(0).

    Lattice points whose internal image falls within ETA of the acceptance
    boundary are rejected and counted in the output metadata.
    """
    scheme.validate()
    W = float(window_radius)
    N, d = scheme.total_dim, scheme.physical_dim
    P = scheme.physical_projection @ scheme.lattice_basis
    Q = scheme.internal_projection @ scheme.lattice_basis
    T = np.vstack([P, Q])
    Tinv = np.linalg.inv(T)
    wb = scheme.acceptance_window.bound() + 1.0
    off = scheme.internal_offset
    if off is not None:
        wb += float(np.linalg.norm(off))
    target = np.concatenate([np.full(d, W + 1.0), np.full(N - d, wb)])
    bounds = np.ceil(np.abs(Tinv) @ target).astype(np.int64)
    if np.prod(bounds.astype(float) * 2 + 1) > max_lattice_points:
        raise InfeasibleEnumeration(
            f"lattice box {2 * bounds + 1} exceeds the enumeration budget")

    ranges = [np.arange(-b, b + 1) for b in bounds]
    accepted = []
    rejected_boundary = 0
    # Chunk over the leading coordinates to keep memory bounded.
    if N <= 2:
        grids = np.meshgrid(*ranges, indexing="ij")
        Z = np.column_stack([g.ravel() for g in grids]).astype(float)
        chunks = [Z]
    else:
        tail = np.meshgrid(*ranges[1:], indexing="ij")
        tail = np.column_stack([g.ravel() for g in tail]).astype(float)
        chunks = (np.column_stack([np.full(len(tail), float(z0)), tail])
                  for z0 in ranges[0])
    for Z in chunks:
        phys = Z @ P.T
        keep = norms(phys) <= W + ETA
        Z, phys = Z[keep], phys[keep]
        if not len(Z):
            continue
        internal = Z @ Q.T
        if off is not None:
            internal = internal + off
        inside, near = scheme.acceptance_window.classify(internal, ETA)
        rejected_boundary += int(np.count_nonzero(near))
        accepted.append(phys[inside])
    if not accepted or not sum(len(a) for a in accepted):
        raise EmptyAcceptanceWindow("no lattice point accepted")
    pts = np.vstack(accepted)
    meta = {"model": "cut-and-project", "scheme": scheme.name,
            "boundary_rejections": rejected_boundary}
    return build_windowed_set(pts, d, W, meta=meta)


def scheme_to_dict(scheme: CutAndProjectScheme) -> dict:
    win = scheme.acceptance_window
    wdata = {"dim": win.dim}
    if win.dim == 1:
        wdata["interval"] = [float(win.interval[0]), float(win.interval[1])]
    else:
        wdata["polygon"] = win.polygon.tolist()
    return {
        "name": scheme.name,
        "total_dim": scheme.total_dim,
        "physical_dim": scheme.physical_dim,
        "lattice_basis": scheme.lattice_basis.tolist(),
        "physical_projection": scheme.physical_projection.tolist(),
        "internal_projection": scheme.internal_projection.tolist(),
        "acceptance_window": wdata,
        "internal_offset": scheme.internal_offset.tolist()
        if scheme.internal_offset is not None else None,
    }


def scheme_from_dict(data: dict) -> CutAndProjectScheme:
    wdata = data["acceptance_window"]
    if int(wdata["dim"]) == 1:
        win = AcceptanceWindow(dim=1, interval=tuple(wdata["interval"]))
    else:
        win = AcceptanceWindow(
            dim=2,
            polygon=geometry.ensure_ccw(
                np.asarray(wdata["polygon"], dtype=float)))
    off = data.get("internal_offset")
    scheme = CutAndProjectScheme(
        total_dim=int(data["total_dim"]),
        physical_dim=int(data["physical_dim"]),
        lattice_basis=np.asarray(data["lattice_basis"], dtype=float),
        physical_projection=np.asarray(data["physical_projection"],
                                       dtype=float),
        internal_projection=np.asarray(data["internal_projection"],
                                       dtype=float),
        acceptance_window=win,
        internal_offset=np.asarray(off, dtype=float)
        if off is not None else None,
        name=data.get("name", "custom"))
    scheme.validate()
    return scheme


# ---------------------------------------------------------------------------
# Lattices


def _lattice_r_R(basis: np.ndarray):
    d = basis.shape[0]
    if d == 1:
        b = abs(float(basis[0, 0]))
        return b / 2.0, b / 2.0
    combos = [(i, j) for i in range(-3, 4) for j in range(-3, 4)
              if (i, j) != (0, 0)]
    vecs = np.array([i * basis[:, 0] + j * basis[:, 1] for i, j in combos])
    shortest = float(np.min(norms(vecs)))
    # Covering radius: farthest vertex of the origin's Voronoi cell.
    cell = geometry.square((0.0, 0.0), 4.0 * float(np.max(norms(vecs))))
    for v in vecs[np.argsort(norms(vecs))]:
        cell = geometry.clip_halfplane(cell, v, float(v @ v) / 2.0)
    cell = geometry.dedupe_ring(cell, 1e-9)
    covering = float(np.max(norms(cell)))
    return shortest / 2.0, covering


def generate_lattice(basis, window_radius: float) -> WindowedDeloneSet:
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 0:
        basis = basis.reshape(1, 1)
    if basis.ndim == 1:
        basis = np.diag(basis)
    d = basis.shape[0]
    if abs(np.linalg.det(basis)) < 1e-12:
        raise SingularBasis("lattice basis is singular")
    W = float(window_radius)
    inv = np.linalg.inv(basis)
    bound = int(np.ceil(np.max(np.sum(np.abs(inv), axis=1)) * (W + 1)))
    axes = [np.arange(-bound, bound + 1)] * d
    grids = np.meshgrid(*axes, indexing="ij")
    Z = np.column_stack([g.ravel() for g in grids]).astype(float)
    pts = Z @ basis.T
    pts = pts[norms(pts) <= W + ETA]
    r, R = _lattice_r_R(basis)
    meta = {"model": "lattice", "basis": basis.tolist()}
    return build_windowed_set(pts, d, W, r_declared=r, R_declared=R, meta=meta)


# ---------------------------------------------------------------------------
# Decorations


@dataclass
class DecorationRule:
    """Radius-s lookup from patch classes to labels."""

    radius: float
    classes: list
    labels: list
    name: str = "decoration"
    _lookup: CloudClassifier | None = field(default=None, repr=False)

    def classifier(self) -> CloudClassifier:
        if self._lookup is None:
            cc = CloudClassifier(tol=ETA)
            for cls in self.classes:
                cc.add(cls.representative)
            self._lookup = cc
        return self._lookup

    def label_of(self, patch: Patch) -> int:
        ci = self.classifier().lookup(patch)
        if ci < 0:
            raise UnknownPatchClass(
                f"patch with {patch.size} offsets not in the rule domain "
                f"(radius {self.radius})")
        return self.labels[ci]


def decorate(X: WindowedDeloneSet, rule: DecorationRule) -> WindowedDeloneSet:
    """Assign labels by s-patch class; window shrinks to W - s."""
    s = rule.radius
    idx = X.interior_indices(s)
    labels = np.empty(len(idx), dtype=np.int64)
    for k, i in enumerate(idx):
        patch = extract_patch(X, X.points[i], s)
        labels[k] = rule.label_of(patch)
    return build_windowed_set(
        X.points[idx], X.dim, X.window_radius - s, labels=labels,
        meta={**X.meta, "decorated_by": rule.name, "decoration_radius": s})


def decoration_from_atlas(X: WindowedDeloneSet, s: float, labeler=None,
                          name: str = "class-index") -> DecorationRule:
    """Build a total decoration rule from the s-atlas of X.

    `labeler(index, cls)` maps each class to a label; defaults to the
    class index itself.
    """
    from .atlas import r_atlas  # local import, no cycle at module load

    atlas = r_atlas(X, s)
    labels = []
    for i, cls in enumerate(atlas.classes):
        labels.append(labeler(i, cls) if labeler else i)
    return DecorationRule(radius=s, classes=list(atlas.classes),
                          labels=labels, name=name)


def nn_gap_labeler(X: WindowedDeloneSet, s: float) -> DecorationRule:
    """d=1 decoration: label by the quantized gap to the right neighbor."""
    from .atlas import r_atlas

    atlas = r_atlas(X, s)
    gaps = []
    for cls in atlas.classes:
        offs = cls.representative.offsets[:, 0]
        center = float(cls.center_rep_offset[0])
        rights = np.sort(offs[offs > center + ETA])
        gaps.append(round(float(rights[0] - center), 6) if len(rights) else -1.0)
    distinct = sorted(set(gaps))
    labels = [distinct.index(g) for g in gaps]
    return DecorationRule(radius=s, classes=list(atlas.classes),
                          labels=labels, name="nn-gap")
