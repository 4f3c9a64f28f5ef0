"""Local-derivation factor maps, fiber counting, and the factor-family
relation harness.

A LocalDerivationRule realizes exact sliding-block behavior: the derived
set near x is a finite-table function of the s-patch class at x, so the
image inside B_R(0) is fully determined by the source inside B_{R+s0}(0)
with s0 = s + offset_bound and no residual translation.
"""

from dataclasses import dataclass, field

import numpy as np

from .atlas import r_atlas, return_vectors
from .core import (
    ETA,
    CloudClassifier,
    Patch,
    PatchClass,
    WindowedDeloneSet,
    build_windowed_set,
    clouds_equal,
    extract_patch,
    lex_sort_order,
    norms,
)
from .errors import (
    FamilyMismatch,
    InsufficientWindow,
    NoOccurrence,
    OutputNotDelone,
    PeriodicInput,
    UnknownPatchClass,
    UsageError,
)
from .voronoi import cell_return_patches, cell_patch_classes, voronoi_cells_of_patch


@dataclass
class LocalDerivationRule:
    """Radius-s lookup from patch classes to finite labeled offset sets."""

    radius: float
    classes: list                     # list of PatchClass (domain)
    image_offsets: list               # per class: (m, d) array of offsets
    image_labels: list | None = None  # per class: (m,) int labels or None
    name: str = "rule"
    _lookup: CloudClassifier | None = field(default=None, repr=False)

    @property
    def offset_bound(self) -> float:
        best = 0.0
        for offs in self.image_offsets:
            offs = np.asarray(offs, dtype=float)
            if offs.size:
                best = max(best, float(np.max(norms(offs))))
        return best

    @property
    def s0(self) -> float:
        return self.radius + self.offset_bound

    def classifier(self) -> CloudClassifier:
        if self._lookup is None:
            cc = CloudClassifier(tol=ETA)
            for cls in self.classes:
                cc.add(cls.representative)
            self._lookup = cc
        return self._lookup

    def index_of(self, patch: Patch) -> int:
        ci = self.classifier().lookup(patch)
        if ci < 0:
            raise UnknownPatchClass(
                f"{self.name}: {patch.size}-point patch of radius "
                f"{patch.radius} not in the rule table")
        return ci


def class_center_label(cls: PatchClass):
    """Label of the patch center inside a labeled class representative."""
    rep = cls.representative
    if rep.labels is None or cls.center_rep_offset is None:
        return None
    d = norms(rep.offsets - cls.center_rep_offset)
    i = int(np.argmin(d))
    if d[i] > 1e-7:
        return None
    return int(rep.labels[i])


def identity_rule(X: WindowedDeloneSet, s: float,
                  name: str = "identity") -> LocalDerivationRule:
    """Every s-patch class maps to the center offset {0} (labels kept)."""
    return translation_rule(X, s, np.zeros(X.dim), name=name)


def translation_rule(X: WindowedDeloneSet, s: float, t,
                     name: str = "translated-identity") -> LocalDerivationRule:
    t = np.asarray(t, dtype=float).reshape(1, X.dim)
    atlas = r_atlas(X, s)
    labels = None
    if X.labels is not None:
        labels = [np.array([class_center_label(c)]) for c in atlas.classes]
    return LocalDerivationRule(
        radius=s, classes=list(atlas.classes),
        image_offsets=[t.copy() for _ in atlas.classes],
        image_labels=labels, name=name)


def label_forgetting_rule(X: WindowedDeloneSet, s: float,
                          name: str = "label-forgetting") -> LocalDerivationRule:
    """Same points, labels dropped."""
    atlas = r_atlas(X, s)
    zero = np.zeros((1, X.dim))
    return LocalDerivationRule(
        radius=s, classes=list(atlas.classes),
        image_offsets=[zero.copy() for _ in atlas.classes],
        image_labels=None, name=name)


def apply_rule(rule: LocalDerivationRule,
               X: WindowedDeloneSet) -> WindowedDeloneSet:
    """Derived set: union over interior x of x + table[class of s-patch].

    The output window shrinks to W - s - offset_bound; coincident emitted
    points are merged (conflicting labels are an error).
    """
    s = rule.radius
    new_w = X.window_radius - rule.s0
    if new_w <= 0:
        raise InsufficientWindow("window too small for the rule radius")
    labeled = rule.image_labels is not None
    pts, labels = [], []
    for i in X.interior_indices(s):
        x = X.points[i]
        patch = extract_patch(X, x, s)
        ci = rule.index_of(patch)
        offs = np.asarray(rule.image_offsets[ci], dtype=float)
        if offs.size == 0:
            continue
        pts.append(x + offs)
        if labeled:
            labels.append(np.asarray(rule.image_labels[ci], dtype=np.int64))
    if not pts:
        raise OutputNotDelone("rule produced no points")
    pts = np.vstack(pts)
    labels = np.concatenate(labels) if labeled else None
    keep = norms(pts) <= new_w + ETA
    pts = pts[keep]
    labels = labels[keep] if labeled else None
    pts, labels = _merge_coincident(pts, labels, rule.name)
    if len(pts) < 2:
        raise OutputNotDelone("derived set has fewer than 2 points")
    Y = build_windowed_set(pts, X.dim, new_w, labels=labels,
                           meta={"derived_from": X.meta.get("model"),
                                 "rule": rule.name, "s0": rule.s0})
    return Y


def _merge_coincident(pts: np.ndarray, labels, rule_name: str):
    order = lex_sort_order(pts)
    pts = pts[order]
    labels = labels[order] if labels is not None else None
    from scipy.spatial import cKDTree

    pairs = cKDTree(pts).query_pairs(ETA, output_type="ndarray")
    if len(pairs) == 0:
        return pts, labels
    drop = np.zeros(len(pts), dtype=bool)
    for i, j in pairs:
        if labels is not None and labels[i] != labels[j]:
            raise OutputNotDelone(
                f"{rule_name}: coincident output points with conflicting labels")
        drop[max(i, j)] = True
    keep = ~drop
    return pts[keep], labels[keep] if labels is not None else None


def fiber_class_count(rule: LocalDerivationRule, X: WindowedDeloneSet,
                      R: float, L: float | None = None,
                      Y: WindowedDeloneSet | None = None, tol: float = ETA):
    """Finite-window proxy for the fiber cardinality of the factor map.

    For each image R-patch class Q (at source centers), count the distinct
    labeled source classes of radius R - s0 seen under it; the max over Q
    can only undercount true extensions but upper-bounds genuine fiber
    multiplicity, and is bounded by (55 L^2)^d.

    Returns (count, bound) with bound None when L is not given.
    """
    s0 = rule.s0
    if R <= s0:
        raise InsufficientWindow(f"need R > s0 = {s0}")
    if Y is None:
        Y = apply_rule(rule, X)
    # group by exact window equality: the image window is a marked
    # configuration around its center, not a translation class
    gQ = _ExactGrouper(tol)
    gD = _ExactGrouper(tol)
    seen: dict[int, set] = {}
    reach = Y.window_radius - R
    for i in X.interior_indices(X.window_radius - reach):
        x = X.points[i]
        Qp = extract_patch(Y, x, R)
        Dp = extract_patch(X, x, R - s0)
        if Qp.size == 0 or Dp.size == 0:
            continue
        qi = gQ.add(Qp.offsets, Qp.labels)
        di = gD.add(Dp.offsets, Dp.labels)
        seen.setdefault(qi, set()).add(di)
    if not seen:
        raise NoOccurrence("no interior center available for fiber counting")
    count = max(len(v) for v in seen.values())
    bound = (55.0 * L * L) ** X.dim if L is not None else None
    return count, bound


class _ExactGrouper:
    """Group clouds by exact pointwise equality (quantized-key fast path,
    exact scan fallback)."""

    def __init__(self, tol: float = ETA):
        self.tol = tol
        self.members: list = []      # (offsets, labels)
        self._by_key: dict = {}

    @staticmethod
    def _key(offsets, labels):
        key = tuple(int(round(float(c) / 1e-6)) for c in offsets.ravel())
        if labels is not None:
            key = key + tuple(int(x) for x in labels)
        return key

    def add(self, offsets, labels=None) -> int:
        key = self._key(offsets, labels)
        ci = self._by_key.get(key)
        if ci is not None and clouds_equal(self.members[ci][0], offsets,
                                           self.tol, self.members[ci][1],
                                           labels):
            return ci
        for i, (o, l) in enumerate(self.members):
            if clouds_equal(o, offsets, self.tol, l, labels):
                self._by_key[key] = i
                return i
        self.members.append((offsets, labels))
        self._by_key[key] = len(self.members) - 1
        return len(self.members) - 1


@dataclass
class TheoremHarnessConfig:
    n: int
    R: float
    L: float
    epsilon: float = 0.0
    override_n: bool = False
    rule_ids: list = field(default_factory=list)

    def n_inequality_holds(self) -> bool:
        L = self.L
        return L ** self.n - 1.0 - 12.0 * L - 176.0 * L * L > 1.0

    def validate(self):
        if not self.override_n and not self.n_inequality_holds():
            raise UsageError(
                f"n={self.n} violates L^n - 1 - 12L - 176L^2 > 1 for "
                f"L={self.L}; pass override_n=True for an exploratory run")

    def inner_radius(self):
        """Comparison radius R' = (L^n - 1)R - eps - 4LR; falls back to R
        (flagged exploratory) when the honest value is not positive."""
        rp = (self.L ** self.n - 1.0) * self.R - self.epsilon \
            - 4.0 * self.L * self.R
        if rp > 0:
            return rp, False
        if not self.override_n:
            raise UsageError(
                "comparison radius R' is not positive; this n, R, L "
                "combination needs override_n=True")
        return self.R, True


@dataclass
class FamilyF:
    """The patches P_{w_{j,l}}: big-radius patches at cell return vectors of
    the central patch's occurrence-set Voronoi cells."""

    classes: list                    # deduplicated PatchClass list
    members: list                    # (j, l, class index) triples
    base_shift: np.ndarray           # translation applied so 0 in X
    patch: PatchClass                # the central R-patch class
    sites: np.ndarray
    N: int                           # number of cell-cloud classes
    m_j: list                        # return-patch counts per cell class
    radius: float                    # L^n R
    bound: float                     # c(L) * c(n, L)


def build_family_F(X: WindowedDeloneSet, R: float, n: int, L: float,
                   tol: float = ETA, allow_periodic: bool = False) -> FamilyF:
    """Compute the family ℱ for the finiteness-of-factors harness."""
    from .atlas import detect_period

    if not allow_periodic:
        v = detect_period(X, tol)
        if v is not None:
            raise PeriodicInput(f"translation {v.tolist()} preserves the window")
    big = (L ** n) * R
    if big + 4 * L * R >= X.window_radius:
        raise InsufficientWindow(
            f"window {X.window_radius} too small for L^n R = {big}")
    x0 = X.points[int(np.argmin(norms(X.points)))]
    Xs = X.translate(x0)
    from .core import canonical_class

    P = canonical_class(extract_patch(Xs, np.zeros(X.dim), R), tol)
    rv = return_vectors(Xs, P, tol=tol)
    pv = voronoi_cells_of_patch(Xs, P, rv=rv, tol=tol)
    cell_classes, assignment = cell_patch_classes(Xs, P, pv=pv, tol=tol)
    reps = []
    for ci in range(len(cell_classes)):
        idxs = [k for k, a in enumerate(assignment) if a == ci]
        if not idxs:
            continue
        # representative site nearest the origin, for maximal window room
        best = min(idxs, key=lambda k: float(np.linalg.norm(pv.sites[k])))
        reps.append(best)
    dedupe = CloudClassifier(tol=tol)
    members = []
    m_j = []
    for j, v_index in enumerate(reps):
        classes_j, _ = cell_return_patches(Xs, P, v_index, n, L, pv=pv,
                                           tol=tol)
        m_j.append(len(classes_j))
        for l, cls in enumerate(classes_j):
            gi = dedupe.add(cls.representative)
            members.append((j, l, gi))
    d = X.dim
    bound = ((352.0 * L ** 3) ** d) * ((968.0 * L ** (n + 3)) ** d)
    return FamilyF(classes=dedupe.classes, members=members, base_shift=x0,
                   patch=P, sites=pv.sites, N=len(reps), m_j=m_j,
                   radius=big, bound=bound)


@dataclass
class RelationMatrix:
    rule_id: str
    family_size: int
    entries: np.ndarray              # (k, k) bool
    inner_radius: float
    shift_bound: float
    exploratory: bool
    occurrence_counts: list

    def is_reflexive(self) -> bool:
        return bool(np.all(np.diag(self.entries)))


def relation_Ri(rule: LocalDerivationRule, family: FamilyF,
                X: WindowedDeloneSet, cfg: TheoremHarnessConfig,
                Y: WindowedDeloneSet | None = None,
                tol: float = ETA) -> RelationMatrix:
    """entries[a][b] iff the derived windows at occurrences of family
    members a and b agree on B_{R'}(0) up to a shift w in B_{4LR}(0).

    The hull quantifier is realized over all occurrences in the window;
    exact rules make all occurrences of one class give identical derived
    windows, which is verified, so the pairwise check reduces to the
    representatives.
    """
    cfg.validate()
    Xs = X.translate(family.base_shift)
    if Y is None:
        Y = apply_rule(rule, Xs)
    rp, exploratory = cfg.inner_radius()
    wmax = 4.0 * cfg.L * cfg.R
    big = family.radius
    if rp + rule.s0 > big + ETA:
        raise UsageError(
            f"R' + s0 = {rp + rule.s0} exceeds the family radius {big}; "
            "derived windows would not be determined by family members")
    # the shifted comparison window must also stay inside the region the
    # family member determines, or entries would depend on the occurrence
    determined = big - rp - rule.s0
    if wmax > determined:
        wmax = determined
        exploratory = True
    if wmax <= 0:
        raise UsageError("no admissible shift keeps the comparison window "
                         "inside the family radius")
    k = len(family.classes)
    lookup = CloudClassifier(tol=tol)
    for cls in family.classes:
        lookup.add(cls.representative)
    reach = min(Xs.window_radius - big, Y.window_radius - (rp + wmax))
    if reach <= 0:
        raise InsufficientWindow("window cannot host occurrence search")
    occ: list[list[np.ndarray]] = [[] for _ in range(k)]
    for i in Xs.interior_indices(Xs.window_radius - reach):
        x = Xs.points[i]
        patch = extract_patch(Xs, x, big)
        fi = lookup.lookup(patch)
        if fi >= 0:
            occ[fi].append(x)
    counts = [len(o) for o in occ]
    if any(c == 0 for c in counts):
        raise NoOccurrence("some family member has no occurrence in reach")

    def window_cloud(y, radius):
        p = extract_patch(Y, y, radius)
        return p.offsets, p.labels

    clouds, exts, ext_labels, cloud_labels = [], [], [], []
    for fi in range(k):
        base_ext, base_el = window_cloud(occ[fi][0], rp + wmax)
        for y in occ[fi][1:]:
            c2, l2 = window_cloud(y, rp + wmax)
            if not clouds_equal(base_ext, c2, tol, base_el, l2):
                raise UsageError(
                    "occurrences of one family member disagree on the "
                    "derived window; rule is not exact at this radius")
        keep = norms(base_ext) < rp - ETA
        clouds.append(base_ext[keep])
        cloud_labels.append(base_el[keep] if base_el is not None else None)
        exts.append(base_ext)
        ext_labels.append(base_el)

    entries = np.zeros((k, k), dtype=bool)
    for a in range(k):
        A, la = clouds[a], cloud_labels[a]
        for b in range(k):
            B, lb = exts[b], ext_labels[b]
            entries[a, b] = _shift_match(A, la, B, lb, rp, wmax, tol)
    return RelationMatrix(rule_id=rule.name, family_size=k, entries=entries,
                          inner_radius=rp, shift_bound=wmax,
                          exploratory=exploratory, occurrence_counts=counts)


def _shift_match(A, la, B, lb, radius, wmax, tol) -> bool:
    """Is A = (B + w) ∩ B_radius(0) for some ||w|| <= wmax?"""
    if len(A) == 0:
        keep = norms(B) < radius - ETA
        return not np.any(keep)
    if len(B) == 0:
        return False
    # candidate shifts: anchor the first A point on some B point
    diffs = A[0] - B
    cand = np.flatnonzero(norms(diffs) <= wmax + ETA)
    for j in cand:
        w = diffs[j]
        shifted = B + w
        keep = norms(shifted) < radius - ETA
        S = shifted[keep]
        ls = lb[keep] if lb is not None else None
        if clouds_equal(A, S, tol, la, ls):
            return True
    return False


def compare_relations(matrices: list) -> list:
    """Pairs (i, j), i < j, of rules with identical relation matrices."""
    if not matrices:
        return []
    size = matrices[0].family_size
    for m in matrices:
        if m.family_size != size:
            raise FamilyMismatch("relation matrices over different families")
    out = []
    for i in range(len(matrices)):
        for j in range(i + 1, len(matrices)):
            if np.array_equal(matrices[i].entries, matrices[j].entries):
                out.append((i, j))
    return out
