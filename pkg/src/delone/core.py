"""Geometric primitives: windowed point sets, patches, translation classes.

All coordinates are plain Euclidean floats.  Identity of points is decided
at the absolute tolerance ETA; hashes and quantized keys are filters only,
never the decider.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DuplicatePoints,
    EmptyPatch,
    InsufficientWindow,
    PointOutsideWindow,
    UnsupportedDimension,
    WindowTooSmall,
)

# Identity tolerance for point coincidence.  Generator coordinates are kept
# at unit scale, so an absolute tolerance is adequate.
ETA = 1e-9

# Coarse resolution used for hash-bucket filters (always verified exactly).
_KEY_RES = 1e-6


def as_point_array(points, dim: int) -> np.ndarray:
    """Coerce input to a float (n, dim) array."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, dim)
    if arr.ndim == 1:
        if dim == 1:
            arr = arr.reshape(-1, 1)
        else:
            arr = arr.reshape(1, -1)
    if arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


def lex_sort_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting rows lexicographically (first coord, then second...)."""
    return np.lexsort(tuple(points[:, k] for k in reversed(range(points.shape[1]))))


def norms(points: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(points * points, axis=1))


@dataclass
class WindowedDeloneSet:
    """A finite window X ∩ B_W(0) of an implicitly infinite point set.

    Treated as immutable after construction; all operations on it are pure.
    """

    dim: int
    window_radius: float
    points: np.ndarray               # (n, dim), lexicographically sorted
    labels: np.ndarray | None = None  # (n,) small ints, optional decorations
    r_declared: float | None = None
    R_declared: float | None = None
    meta: dict = field(default_factory=dict)

    _tree: cKDTree | None = field(default=None, repr=False, compare=False)
    _pointmap: dict | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    def query_ball(self, center, radius: float, strict: bool = True) -> np.ndarray:
        """Indices of points with ||p - center|| < radius - ETA (open ball).

        With strict=False the ball is closed (<= radius + ETA).
        """
        center = np.asarray(center, dtype=float).reshape(self.dim)
        if self.dim == 1:
            c = center[0]
            xs = self.points[:, 0]
            lo = np.searchsorted(xs, c - radius - ETA)
            hi = np.searchsorted(xs, c + radius + ETA)
            idx = np.arange(lo, hi)
        else:
            idx = np.asarray(self.tree.query_ball_point(center, radius + ETA),
                             dtype=int)
        if idx.size == 0:
            return idx
        d = norms(self.points[idx] - center)
        if strict:
            keep = d < radius - ETA
        else:
            keep = d <= radius + ETA
        idx = idx[keep]
        return idx[np.argsort(idx)]

    def _point_keys(self):
        if self._pointmap is None:
            pm = {}
            keys = np.round(self.points / _KEY_RES).astype(np.int64)
            for i, k in enumerate(map(tuple, keys)):
                pm.setdefault(k, []).append(i)
            self._pointmap = pm
        return self._pointmap

    def find_point(self, p, tol: float = ETA) -> int:
        """Index of the point coinciding with p within tol, or -1."""
        p = np.asarray(p, dtype=float).reshape(self.dim)
        pm = self._point_keys()
        base = np.round(p / _KEY_RES).astype(np.int64)
        offsets = [0, -1, 1]
        if self.dim == 1:
            cand_keys = [(base[0] + a,) for a in offsets]
        else:
            cand_keys = [(base[0] + a, base[1] + b) for a in offsets for b in offsets]
        for k in cand_keys:
            for i in pm.get(k, ()):
                if np.linalg.norm(self.points[i] - p) <= tol:
                    return i
        return -1

    def contains_points(self, pts: np.ndarray, tol: float = ETA) -> np.ndarray:
        return np.array([self.find_point(p, tol) >= 0 for p in pts], dtype=bool)

    def interior_indices(self, margin: float) -> np.ndarray:
        return np.flatnonzero(norms(self.points) <= self.window_radius - margin + ETA)

    def min_gap(self) -> float:
        if self.n < 2:
            return float("inf")
        if self.dim == 1:
            return float(np.min(np.diff(self.points[:, 0])))
        d, _ = self.tree.query(self.points, k=2)
        return float(np.min(d[:, 1]))

    def translate(self, v) -> "WindowedDeloneSet":
        """The windowed view of X - v; the valid window shrinks by ||v||."""
        v = np.asarray(v, dtype=float).reshape(self.dim)
        new_w = self.window_radius - float(np.linalg.norm(v))
        pts = self.points - v
        keep = norms(pts) <= new_w + ETA
        labels = self.labels[keep] if self.labels is not None else None
        return build_windowed_set(
            pts[keep], self.dim, new_w, labels=labels,
            meta={**self.meta, "translated_by": [float(x) for x in v]},
        )


def build_windowed_set(points, dim, window_radius, labels=None,
                       r_declared=None, R_declared=None, meta=None,
                       tol: float = ETA) -> WindowedDeloneSet:
    """Validate, sort and wrap a point list as a WindowedDeloneSet."""
    if dim not in (1, 2):
        raise UnsupportedDimension(f"dim must be 1 or 2, got {dim}")
    if window_radius <= 0:
        raise WindowTooSmall("window_radius must be positive")
    pts = as_point_array(points, dim)
    if not np.all(np.isfinite(pts)):
        raise PointOutsideWindow("non-finite coordinates")
    if pts.shape[0] and np.max(norms(pts)) > window_radius + tol:
        raise PointOutsideWindow(
            f"point outside window of radius {window_radius}")
    order = lex_sort_order(pts)
    pts = pts[order]
    if labels is not None:
        labels = np.asarray(labels)[order]
        if len(labels) != len(pts):
            raise ValueError("labels length mismatch")
    X = WindowedDeloneSet(dim=dim, window_radius=float(window_radius),
                          points=pts, labels=labels,
                          r_declared=r_declared, R_declared=R_declared,
                          meta=dict(meta or {}))
    gap = X.min_gap()
    if gap < tol:
        raise DuplicatePoints(f"minimum pairwise distance {gap} below {tol}")
    if r_declared is not None and gap < 2 * r_declared - 1e-6:
        raise DuplicatePoints(
            f"min gap {gap} violates declared uniform discreteness r={r_declared}")
    if R_declared is not None and X.n:
        _check_relative_density(X, R_declared)
    return X


def _check_relative_density(X: WindowedDeloneSet, R: float) -> None:
    rho = X.window_radius - R
    if rho <= 0:
        return
    step = max(R / 4.0, rho / 256.0)
    if X.dim == 1:
        test = np.arange(-rho, rho + step / 2, step).reshape(-1, 1)
    else:
        ax = np.arange(-rho, rho + step / 2, step)
        gx, gy = np.meshgrid(ax, ax)
        test = np.column_stack([gx.ravel(), gy.ravel()])
        test = test[norms(test) <= rho]
    d, _ = X.tree.query(test)
    worst = float(np.max(d)) if len(d) else 0.0
    if worst > R + step + 1e-6:
        raise PointOutsideWindow(
            f"relative density violated: empty ball of radius {worst} "
            f"found inside the window (declared R={R})")


def estimate_delone_params(X: WindowedDeloneSet,
                           resolution: float | None = None):
    """Estimate (r_hat, R_hat) on the interior of the window.

    r_hat is half the minimum pairwise distance; R_hat the covering radius
    of the interior region.  For d=1 the covering radius is exact; for d=2
    it is a grid estimate (resolution recorded in the return value is the
    caller's responsibility via `resolution`).
    """
    half = X.interior_indices(X.window_radius / 2)
    if X.n < 2 or len(half) < 2:
        raise WindowTooSmall("need at least 2 points inside B_{W/2}(0)")
    gap = X.min_gap()
    r_hat = gap / 2.0
    # First-pass density scale to trim the boundary region.
    d_nn, _ = X.tree.query(X.points, k=2)
    R0 = float(np.max(d_nn[:, 1]))
    margin = min(2 * R0, X.window_radius / 4)
    rho = X.window_radius - margin
    if X.dim == 1:
        xs = X.points[:, 0]
        xs = xs[(xs >= -rho - R0) & (xs <= rho + R0)]
        if len(xs) < 2:
            raise WindowTooSmall("interior region contains fewer than 2 points")
        cands = [float(np.max(np.diff(xs)) / 2.0)]
        cands.append(abs(-rho - xs[0]) if xs[0] > -rho else 0.0)
        cands.append(abs(rho - xs[-1]) if xs[-1] < rho else 0.0)
        R_hat = max(cands)
    else:
        step = resolution if resolution is not None else max(r_hat / 4, rho / 400.0)
        ax = np.arange(-rho, rho + step / 2, step)
        gx, gy = np.meshgrid(ax, ax)
        test = np.column_stack([gx.ravel(), gy.ravel()])
        test = test[norms(test) <= rho]
        d, _ = X.tree.query(test)
        R_hat = float(np.max(d))
    return r_hat, R_hat


@dataclass
class Patch:
    """The open-ball intersection (X - center) ∩ B_R(0), as offsets."""

    center: np.ndarray
    radius: float
    offsets: np.ndarray              # (k, dim), lexicographically sorted
    labels: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.offsets.shape[1]

    @property
    def size(self) -> int:
        return len(self.offsets)

    def diameter(self) -> float:
        if self.size < 2:
            return 0.0
        diff = self.offsets[:, None, :] - self.offsets[None, :, :]
        return float(np.max(np.sqrt(np.sum(diff * diff, axis=-1))))

    def max_offset_norm(self) -> float:
        if self.size == 0:
            return 0.0
        return float(np.max(norms(self.offsets)))


def extract_patch(X: WindowedDeloneSet, center, R: float) -> Patch:
    """The R-patch of X at `center`; errors if the ball exits the window."""
    center = np.asarray(center, dtype=float).reshape(X.dim)
    if np.linalg.norm(center) + R > X.window_radius + ETA:
        raise InsufficientWindow(
            f"ball B_{R}({center.tolist()}) exits the window of radius "
            f"{X.window_radius}")
    idx = X.query_ball(center, R, strict=True)
    offs = X.points[idx] - center
    order = lex_sort_order(offs) if len(offs) else np.arange(0)
    labels = None
    if X.labels is not None:
        labels = X.labels[idx][order]
    return Patch(center=center, radius=float(R), offsets=offs[order],
                 labels=labels)


def match_clouds(A: np.ndarray, B: np.ndarray, tol: float,
                 labels_a=None, labels_b=None):
    """Translation v with A - v = B pointwise within tol, or None.

    Anchor candidates are taken near the clouds' centroids so that tiny
    coordinate jitter cannot change which points get aligned.
    """
    if len(A) != len(B):
        return None
    if (labels_a is None) != (labels_b is None):
        return None
    k = len(A)
    if k == 0:
        return np.zeros(A.shape[1] if A.ndim == 2 else 1)
    dim = A.shape[1]
    ca = A.mean(axis=0)
    cb = B.mean(axis=0)
    # B's point nearest its centroid is the anchor on the B side.
    j0 = int(np.argmin(norms(B - cb)))
    rb = B[j0] - cb
    ra = A - ca
    cand = np.flatnonzero(norms(ra - rb) <= 1e-6 + 4 * k * tol)
    if cand.size == 0:
        return None
    treeB = cKDTree(B)
    for i in cand:
        v = A[i] - B[j0]
        d, idx = treeB.query(A - v)
        if np.max(d) > tol:
            continue
        if len(np.unique(idx)) != k:
            continue
        if labels_a is not None and not np.array_equal(
                np.asarray(labels_a), np.asarray(labels_b)[idx]):
            continue
        return v
    return None


def clouds_equal(A: np.ndarray, B: np.ndarray, tol: float,
                 labels_a=None, labels_b=None) -> bool:
    """Pointwise equality of two clouds within tol (no translation)."""
    if len(A) != len(B):
        return False
    if (labels_a is None) != (labels_b is None):
        return False
    if len(A) == 0:
        return True
    d, idx = cKDTree(B).query(A)
    if np.max(d) > tol or len(np.unique(idx)) != len(A):
        return False
    if labels_a is not None and not np.array_equal(
            np.asarray(labels_a), np.asarray(labels_b)[idx]):
        return False
    return True


def patch_translation_match(P: Patch, Q: Patch, tol: float = ETA):
    """Vector v with P - v = Q as offset clouds, or None.

    Labels are compared when both patches carry them; a patch with labels
    never matches one without.
    """
    if abs(P.radius - Q.radius) > tol:
        return None
    return match_clouds(P.offsets, Q.offsets, tol, P.labels, Q.labels)


@dataclass
class PatchClass:
    """Canonical translation-equivalence class of a patch."""

    representative: Patch
    quantized_key: tuple
    multiplicity: int = 1
    # Position of the original patch center in representative coordinates
    # (representatives are anchored at the least offset, not at the center).
    center_rep_offset: np.ndarray | None = None

    @property
    def radius(self) -> float:
        return self.representative.radius

    @property
    def size(self) -> int:
        return self.representative.size

    def matches(self, P: Patch, tol: float = ETA) -> bool:
        return patch_translation_match(self.representative, P, tol) is not None


def canonical_class(P: Patch, tol: float = ETA) -> PatchClass:
    """Anchor P at its lexicographically least offset and key it."""
    if P.size == 0:
        raise EmptyPatch("cannot canonicalize an empty patch")
    rep_offs = P.offsets - P.offsets[0]
    rep = Patch(center=np.zeros(P.dim), radius=P.radius, offsets=rep_offs,
                labels=P.labels)
    key = quantized_key(rep_offs, tol)
    if rep.labels is not None:
        key = key + tuple(int(x) for x in rep.labels)
    return PatchClass(representative=rep, quantized_key=key, multiplicity=1,
                      center_rep_offset=-P.offsets[0])


def quantized_key(offsets: np.ndarray, tol: float = ETA) -> tuple:
    return tuple(np.round(offsets.ravel() / tol).astype(np.int64).tolist())


class CloudClassifier:
    """Incrementally classify point clouds up to translation.

    A coarse quantized key gives an O(1) fast path; misses fall back to an
    exact translation-match scan over classes with the same cardinality, so
    key collisions or straddles can never split or merge classes.
    """

    def __init__(self, tol: float = ETA):
        self.tol = tol
        self.classes: list[PatchClass] = []
        self.occurrences: list[list[np.ndarray]] = []
        self._by_key: dict = {}
        self._buckets: dict = {}     # size -> (index array, invariant matrix)

    @staticmethod
    def _coarse_key(P: Patch) -> bytes:
        rep = P.offsets - P.offsets[0]
        key = np.round(rep.ravel() / _KEY_RES).astype(np.int64).tobytes()
        if P.labels is not None:
            key += b"|" + np.asarray(P.labels, dtype=np.int64).tobytes()
        return key

    @staticmethod
    def _invariant(P: Patch) -> np.ndarray:
        """Sorted centroid-relative norms: translation-invariant, and equal
        within ~k*ETA for translation-equivalent clouds."""
        return np.sort(norms(P.offsets - P.offsets.mean(axis=0)))

    def _bucket_candidates(self, size: int, inv: np.ndarray) -> list:
        bucket = self._buckets.get(size)
        if bucket is None:
            return []
        idx, mat, used = bucket
        if used == 0:
            return []
        close = np.max(np.abs(mat[:used] - inv), axis=1) <= 1e-6
        return [int(i) for i in idx[:used][close]]

    def _bucket_insert(self, size: int, ci: int, inv: np.ndarray):
        bucket = self._buckets.get(size)
        if bucket is None:
            cap = 16
            idx = np.empty(cap, dtype=np.int64)
            mat = np.empty((cap, size))
            bucket = [idx, mat, 0]
            self._buckets[size] = bucket
        idx, mat, used = bucket
        if used == len(idx):
            idx = np.concatenate([idx, np.empty(len(idx), dtype=np.int64)])
            mat = np.vstack([mat, np.empty_like(mat)])
            bucket[0], bucket[1] = idx, mat
        idx[used] = ci
        mat[used] = inv
        bucket[2] = used + 1

    def add(self, P: Patch, center=None) -> int:
        """Classify P, creating a new class if needed; returns class index."""
        if P.size == 0:
            raise EmptyPatch("cannot classify an empty patch")
        key = self._coarse_key(P)
        ci = self._by_key.get(key)
        if ci is not None and not self.classes[ci].matches(P, self.tol):
            ci = None
        inv = None
        if ci is None:
            # certified cheap reject (invariant filter), then exact match
            inv = self._invariant(P)
            for cj in self._bucket_candidates(P.size, inv):
                if self.classes[cj].matches(P, self.tol):
                    ci = cj
                    break
        if ci is None:
            cls = canonical_class(P, self.tol)
            ci = len(self.classes)
            self.classes.append(cls)
            self.occurrences.append([])
            self._bucket_insert(P.size, ci, inv)
        else:
            self.classes[ci].multiplicity += 1
        self._by_key[key] = ci
        if center is not None:
            self.occurrences[ci].append(np.asarray(center, dtype=float))
        return ci

    def lookup(self, P: Patch) -> int:
        """Class index of P among existing classes, or -1 (no insertion)."""
        if P.size == 0:
            return -1
        key = self._coarse_key(P)
        ci = self._by_key.get(key)
        if ci is not None and self.classes[ci].matches(P, self.tol):
            return ci
        inv = self._invariant(P)
        for cj in self._bucket_candidates(P.size, inv):
            if self.classes[cj].matches(P, self.tol):
                return cj
        return -1
