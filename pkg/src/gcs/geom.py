"""Small planar-geometry helpers used across modules."""
from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def cross2(u, v):
    """z-component of the 2-D cross product; broadcasts over leading axes."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def perp(u):
    """Rotate by +90 degrees: (x, y) -> (-y, x)."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    out[..., 0] = -u[..., 1]
    out[..., 1] = u[..., 0]
    return out


def wrap_angle(t):
    """Reduce to [0, 2*pi)."""
    return np.mod(t, TWO_PI)


def torus_dist(a, b):
    """Distance on the circle R/2piZ, in [0, pi]."""
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b) + np.pi, TWO_PI) - np.pi)
    return d


def torus_dist2(p, q):
    """Distance on the (s, t) torus between parameter pairs."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    ds = torus_dist(p[..., 0], q[..., 0])
    dt = torus_dist(p[..., 1], q[..., 1])
    return np.hypot(ds, dt)


def directed_hausdorff(a, b):
    """max over points of a of the distance to the finite set b."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.size == 0:
        return 0.0
    if b.size == 0:
        return np.inf
    # chunk to keep the pairwise matrix small
    out = 0.0
    step = max(1, int(4e6) // max(b.shape[0], 1))
    for i in range(0, a.shape[0], step):
        d = np.linalg.norm(a[i : i + step, None, :] - b[None, :, :], axis=-1)
        out = max(out, float(d.min(axis=1).max()))
    return out


def hausdorff(a, b):
    """Symmetric Hausdorff distance between finite point sets."""
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def dedup_points(points, radius, extra=None):
    """Greedy dedup of points closer than radius; keeps first occurrences.

    Returns (kept_points, kept_indices). `extra` rows, if given, must also
    match within `radius` for two entries to merge (used for parameter pairs).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    kept = []
    idx = []
    for i, p in enumerate(pts):
        dup = False
        for j in idx:
            if np.linalg.norm(p - pts[j]) < radius:
                if extra is None or np.linalg.norm(extra[i] - extra[j]) < radius:
                    dup = True
                    break
        if not dup:
            kept.append(p)
            idx.append(i)
    return np.asarray(kept), idx


def polyline_point_distance(point, polyline):
    """Distance from a point to a polyline (segment-accurate)."""
    p = np.asarray(point, dtype=float)
    q = np.asarray(polyline, dtype=float)
    if q.shape[0] == 1:
        return float(np.linalg.norm(p - q[0]))
    a, b = q[:-1], q[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.linalg.norm(p - proj, axis=1).min())


def segment_intersections(pts, exclude_param_gap=2, closed=True):
    """All transversal self-intersections of a polyline.

    Returns list of (i, j, alpha_i, alpha_j, point): segment i hit segment j.
    Adjacent segments (index gap <= exclude_param_gap, cyclically) are skipped.
    """
    p = np.asarray(pts, dtype=float)
    n = p.shape[0]
    if closed:
        a = p
        b = np.roll(p, -1, axis=0)
        m = n
    else:
        a = p[:-1]
        b = p[1:]
        m = n - 1
    d = b - a
    ii, jj = np.triu_indices(m, k=1)
    gap = jj - ii
    if closed:
        gap = np.minimum(gap, m - gap)
    keep = gap > exclude_param_gap
    ii, jj = ii[keep], jj[keep]
    if ii.size == 0:
        return []
    # solve a_i + u d_i = a_j + v d_j
    det = cross2(d[ii], d[jj])
    rhs = a[jj] - a[ii]
    ok = np.abs(det) > 1e-15
    u = np.where(ok, cross2(rhs, d[jj]) / np.where(ok, det, 1.0), -1.0)
    v = np.where(ok, cross2(rhs, d[ii]) / np.where(ok, det, 1.0), -1.0)
    hit = ok & (u >= 0.0) & (u < 1.0) & (v >= 0.0) & (v < 1.0)
    out = []
    for i, j, ui, vj in zip(ii[hit], jj[hit], u[hit], v[hit]):
        out.append((int(i), int(j), float(ui), float(vj), a[i] + ui * d[i]))
    return out
