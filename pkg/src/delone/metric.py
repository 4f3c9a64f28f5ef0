"""The Delone metric on point sets, bracketed on finite windows.

d(X, X') is the infimum of the eps in (0, 1/sqrt 2) admitting translations
v, v' in B_eps(0) with (X - v) and (X' - v') equal on B_{1/eps}(0); the
value is capped at 1/sqrt 2 when no eps qualifies.  Feasibility is upward
closed in eps, so bisection yields a certified bracket.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import ETA, WindowedDeloneSet, norms
from .errors import InsufficientWindow

CAP = 1.0 / np.sqrt(2.0)


@dataclass
class MetricConfig:
    tolerance: float = 1e-4          # bracket width target
    eps_min: float | None = None     # smallest tested eps (window permitting)
    match_tol: float = ETA


@dataclass
class MetricResult:
    lower: float
    upper: float
    cap_hit: bool = False
    witness: tuple | None = None     # (eps, v, v') achieving the upper bound

    @property
    def value(self) -> float:
        return (self.lower + self.upper) / 2.0 if not self.cap_hit else CAP


def _window_points(X: WindowedDeloneSet, center, radius, tol):
    idx = X.query_ball(center, radius, strict=True)
    pts = X.points[idx] - center
    order = np.lexsort(tuple(pts[:, k] for k in reversed(range(pts.shape[1]))))
    return pts[order]


def windows_equal(X: WindowedDeloneSet, Y: WindowedDeloneSet,
                  v, vp, radius: float, tol: float = ETA) -> bool:
    """(X - v) ∩ B_radius(0) = (Y - v') ∩ B_radius(0) within tol."""
    A = _window_points(X, np.asarray(v, dtype=float), radius, tol)
    B = _window_points(Y, np.asarray(vp, dtype=float), radius, tol)
    if len(A) != len(B):
        return False
    if len(A) == 0:
        return True
    return bool(np.max(np.abs(A - B)) <= tol)


def candidate_shifts(X: WindowedDeloneSet, Y: WindowedDeloneSet,
                     eps: float) -> np.ndarray:
    """Differences x - y of near-coincident points inside the 1/eps window;
    every feasible (v, v') has v - v' among these (or the sets are locally
    empty)."""
    reach = 1.0 / eps + eps
    xi = X.query_ball(np.zeros(X.dim), reach, strict=False)
    yi = Y.query_ball(np.zeros(Y.dim), reach, strict=False)
    A, B = X.points[xi], Y.points[yi]
    if len(A) == 0 and len(B) == 0:
        return np.zeros((1, X.dim))
    if len(A) == 0 or len(B) == 0:
        return np.zeros((0, X.dim))
    pairs = cKDTree(A).query_ball_tree(cKDTree(B), 2.0 * eps)
    deltas = [A[i] - B[j] for i, js in enumerate(pairs) for j in js]
    if not deltas:
        return np.zeros((0, X.dim))
    deltas = np.asarray(deltas)
    keys = np.round(deltas / 1e-12).astype(np.int64)
    _, uniq = np.unique(keys, axis=0, return_index=True)
    return deltas[uniq]


def feasible(X: WindowedDeloneSet, Y: WindowedDeloneSet, eps: float,
             tol: float = ETA):
    """A witness (v, v') for eps, or None."""
    if 1.0 / eps + eps > min(X.window_radius, Y.window_radius) + ETA:
        raise InsufficientWindow(
            f"eps={eps} needs windows of radius {1.0 / eps + eps:.3f}")
    radius = 1.0 / eps
    for delta in candidate_shifts(X, Y, eps):
        if np.linalg.norm(delta) >= 2.0 * eps:
            continue
        v = delta / 2.0
        vp = -delta / 2.0
        if windows_equal(X, Y, v, vp, radius, tol):
            return v, vp
    return None


def delone_distance(X: WindowedDeloneSet, Y: WindowedDeloneSet,
                    cfg: MetricConfig | None = None) -> MetricResult:
    """Certified bracket on d(X, Y) by bisection over eps."""
    cfg = cfg or MetricConfig()
    wmin = min(X.window_radius, Y.window_radius)
    if wmin <= np.sqrt(2.0) + 1.0:
        raise InsufficientWindow("windows too small for any eps below the cap")
    eps_min = cfg.eps_min
    if eps_min is None:
        # largest solution margin of 1/eps + eps <= wmin
        eps_min = 1.0 / (wmin - 1.0)
    hi = CAP - 1e-9
    wit_hi = feasible(X, Y, hi, cfg.match_tol)
    if wit_hi is None:
        return MetricResult(lower=CAP, upper=CAP, cap_hit=True)
    wit_lo = feasible(X, Y, eps_min, cfg.match_tol)
    if wit_lo is not None:
        v, vp = wit_lo
        return MetricResult(lower=0.0, upper=eps_min, cap_hit=False,
                            witness=(eps_min, v, vp))
    lo = eps_min
    witness = wit_hi
    while hi - lo > cfg.tolerance:
        mid = (lo + hi) / 2.0
        wit = feasible(X, Y, mid, cfg.match_tol)
        if wit is None:
            lo = mid
        else:
            hi = mid
            witness = wit
    v, vp = witness
    return MetricResult(lower=lo, upper=hi, cap_hit=False,
                        witness=(hi, v, vp))
