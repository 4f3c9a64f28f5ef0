"""R-atlases, occurrences, return vectors and the return-gap check."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import (
    ETA,
    CloudClassifier,
    Patch,
    PatchClass,
    WindowedDeloneSet,
    estimate_delone_params,
    extract_patch,
    norms,
    patch_translation_match,
)
from .errors import (
    InsufficientWindow,
    NoOccurrenceNearOrigin,
    PeriodicInput,
)


@dataclass
class Atlas:
    """All R-patch classes centered at points of X, with their occurrences."""

    radius: float
    classes: list                      # list of PatchClass
    occurrence_map: list               # class index -> (m, d) array of centers
    valid_region_radius: float

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def lookup(self, P: Patch, tol: float = ETA) -> int:
        for i, cls in enumerate(self.classes):
            if cls.matches(P, tol):
                return i
        return -1


def r_atlas(X: WindowedDeloneSet, R: float, tol: float = ETA) -> Atlas:
    """Classify the R-patch of every point of X in B_{W-R}(0)."""
    if R >= X.window_radius:
        raise InsufficientWindow(f"R={R} >= window radius {X.window_radius}")
    cc = CloudClassifier(tol=tol)
    for i in X.interior_indices(R):
        patch = extract_patch(X, X.points[i], R)
        cc.add(patch, center=X.points[i])
    order = sorted(range(len(cc.classes)),
                   key=lambda k: cc.classes[k].quantized_key)
    classes = [cc.classes[k] for k in order]
    occ = [np.asarray(cc.occurrences[k]).reshape(-1, X.dim) for k in order]
    return Atlas(radius=float(R), classes=classes, occurrence_map=occ,
                 valid_region_radius=X.window_radius - R)


def occurrences(X: WindowedDeloneSet, P: PatchClass,
                tol: float = ETA) -> np.ndarray:
    """Centers x in X ∩ B_{W-R}(0) whose R-patch matches P."""
    R = P.radius
    if R >= X.window_radius:
        raise InsufficientWindow(f"patch radius {R} >= window radius")
    hits = []
    for i in X.interior_indices(R):
        patch = extract_patch(X, X.points[i], R)
        if patch.size == P.size and P.matches(patch, tol):
            hits.append(X.points[i])
    return np.asarray(hits).reshape(-1, X.dim)


@dataclass
class ReturnVectorSet:
    """Window view of X_P = {v : P + v is a patch of X}, relative to the
    occurrence nearest the origin."""

    patch: PatchClass
    vectors: WindowedDeloneSet
    base_center: np.ndarray


def return_vectors(X: WindowedDeloneSet, P: PatchClass,
                   occ: np.ndarray | None = None,
                   tol: float = ETA) -> ReturnVectorSet:
    from .core import build_windowed_set

    if occ is None:
        occ = occurrences(X, P, tol)
    if len(occ) == 0:
        raise NoOccurrenceNearOrigin("patch has no occurrence in the window")
    base = occ[int(np.argmin(norms(occ)))]
    vecs = occ - base
    valid = X.window_radius - P.radius - float(np.linalg.norm(base))
    if valid <= 0:
        raise NoOccurrenceNearOrigin(
            "nearest occurrence too far from the origin for a valid window")
    vecs = vecs[norms(vecs) <= valid + ETA]
    V = build_windowed_set(vecs, X.dim, valid,
                           meta={"kind": "return-vectors",
                                 "patch_size": P.size,
                                 "patch_radius": P.radius})
    return ReturnVectorSet(patch=P, vectors=V, base_center=base)


def is_subpatch(Q: Patch, P: Patch, tol: float = ETA):
    """Vector u with Q + u ⊆ P (offsets and ball), or None."""
    if Q.radius > P.radius + tol or Q.size == 0 or Q.size > P.size:
        return None
    treeP = cKDTree(P.offsets)
    for i in range(P.size):
        u = P.offsets[i] - Q.offsets[0]
        if np.linalg.norm(u) + Q.radius > P.radius + tol:
            continue
        d, idx = treeP.query(Q.offsets + u)
        if np.max(d) > tol or len(np.unique(idx)) != Q.size:
            continue
        if Q.labels is not None and P.labels is not None and not np.array_equal(
                np.asarray(Q.labels), np.asarray(P.labels)[idx]):
            continue
        return u
    return None


def detect_period(X: WindowedDeloneSet, tol: float = ETA):
    """A nonzero v with X - v = X on the interior, or None.

    Candidates are the difference vectors (X - X) ∩ B_{2R_hat}(0) \\ {0}.
    """
    _, R_hat = estimate_delone_params(X)
    # labels can stretch the minimal period beyond the unlabeled bound
    k = len(np.unique(X.labels)) if X.labels is not None else 1
    radius = 2.0 * R_hat * max(1, k) + ETA
    pairs = X.tree.query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return None
    diffs = X.points[pairs[:, 1]] - X.points[pairs[:, 0]]
    diffs = np.vstack([diffs, -diffs])
    keys = np.round(diffs / 1e-6).astype(np.int64)
    _, uniq = np.unique(keys, axis=0, return_index=True)
    cands = diffs[uniq]
    cands = cands[norms(cands) > tol]
    cands = cands[np.argsort(norms(cands))]
    for v in cands:
        margin = float(np.linalg.norm(v)) + ETA
        idx = X.interior_indices(margin)
        shifted = X.points[idx] + v
        d, j = X.tree.query(shifted)
        if np.max(d) > tol:
            continue
        if X.labels is not None and not np.array_equal(
                X.labels[idx], X.labels[j]):
            continue
        return v
    return None


def min_return_gap(X: WindowedDeloneSet, R: float, tol: float = ETA,
                   atlas: Atlas | None = None):
    """Minimum nonzero return-vector norm over all R-atlas classes.

    Window lower-estimate of the true infimum; errors on periodic input
    (the return-gap lemma assumes non-periodicity).
    """
    if R >= X.window_radius / 4:
        raise InsufficientWindow(f"need R < W/4, got R={R}, W={X.window_radius}")
    v = detect_period(X, tol)
    if v is not None:
        raise PeriodicInput(f"translation {v.tolist()} preserves the window")
    if atlas is None:
        atlas = r_atlas(X, R, tol)
    best = np.inf
    worst = None
    for cls, occ in zip(atlas.classes, atlas.occurrence_map):
        if len(occ) < 2:
            continue
        if X.dim == 1:
            gap = float(np.min(np.diff(np.sort(occ[:, 0]))))
        else:
            tree = cKDTree(occ)
            d, _ = tree.query(occ, k=2)
            gap = float(np.min(d[:, 1]))
        if gap < best:
            best = gap
            worst = cls
    if worst is None:
        raise NoOccurrenceNearOrigin("no class occurs twice in the window")
    return best, worst


def extension_counts(X: WindowedDeloneSet, R1: float, R2: float,
                     tol: float = ETA, atlas2: Atlas | None = None):
    """For each R1-class, how many R2-classes restrict to it.

    Returns (max_count, counts per R1-class index).  For a linearly
    repetitive set the maximum is at most (44 L^2)^d (R2/R1)^d.
    """
    if not 0 < R1 < R2:
        raise ValueError("need 0 < R1 < R2")
    if atlas2 is None:
        atlas2 = r_atlas(X, R2, tol)
    cc = CloudClassifier(tol=tol)
    counts: dict[int, int] = {}
    for cls, occ in zip(atlas2.classes, atlas2.occurrence_map):
        center = occ[0]
        p1 = extract_patch(X, center, R1)
        ci = cc.add(p1)
        counts[ci] = counts.get(ci, 0) + 1
    per = [counts[i] for i in sorted(counts)]
    return (max(per) if per else 0), per
