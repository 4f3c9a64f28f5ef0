"""Small convex-polygon utilities shared by the lattice and Voronoi code."""

import numpy as np

_EPS = 1e-12


def square(center, half_side: float) -> np.ndarray:
    cx, cy = float(center[0]), float(center[1])
    h = float(half_side)
    return np.array([
        [cx - h, cy - h],
        [cx + h, cy - h],
        [cx + h, cy + h],
        [cx - h, cy + h],
    ])


def clip_halfplane(poly: np.ndarray, normal, offset: float) -> np.ndarray:
    """Clip a convex polygon (CCW ring) by {y : <normal, y> <= offset}."""
    if len(poly) == 0:
        return poly
    n = np.asarray(normal, dtype=float)
    vals = poly @ n - offset
    out = []
    m = len(poly)
    for i in range(m):
        j = (i + 1) % m
        vi, vj = vals[i], vals[j]
        if vi <= _EPS:
            out.append(poly[i])
        if (vi < -_EPS and vj > _EPS) or (vi > _EPS and vj < -_EPS):
            t = vi / (vi - vj)
            out.append(poly[i] + t * (poly[j] - poly[i]))
    if not out:
        return np.zeros((0, 2))
    return np.asarray(out)


def dedupe_ring(poly: np.ndarray, tol: float) -> np.ndarray:
    """Merge consecutive ring vertices closer than tol."""
    if len(poly) < 2:
        return poly
    keep = []
    for p in poly:
        if not keep or np.linalg.norm(p - keep[-1]) > tol:
            keep.append(p)
    if len(keep) > 1 and np.linalg.norm(keep[0] - keep[-1]) <= tol:
        keep.pop()
    return np.asarray(keep)


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def polygon_diameter(poly: np.ndarray) -> float:
    if len(poly) < 2:
        return 0.0
    diff = poly[:, None, :] - poly[None, :, :]
    return float(np.max(np.sqrt(np.sum(diff * diff, axis=-1))))


def point_in_convex(poly: np.ndarray, p, tol: float = 1e-9) -> bool:
    """Membership in a CCW convex ring, boundary inclusive within tol."""
    m = len(poly)
    if m < 3:
        return False
    p = np.asarray(p, dtype=float)
    for i in range(m):
        a, b = poly[i], poly[(i + 1) % m]
        edge = b - a
        if np.cross(edge, p - a) < -tol * (np.linalg.norm(edge) + 1.0):
            return False
    return True


def ensure_ccw(poly: np.ndarray) -> np.ndarray:
    if len(poly) < 3:
        return poly
    x, y = poly[:, 0], poly[:, 1]
    signed = np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))
    return poly if signed >= 0 else poly[::-1]
