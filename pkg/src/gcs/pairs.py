"""Parallel-pair detection on the (s, t) torus, branches, chords, bitangents.

The pair set is the zero level of g(s, t) = cross(X'(s), X'(t)) away from the
diagonal band.  Zero crossings on grid edges are bisected, Newton-polished,
and linked into branches by torus nearest-neighbour continuation; the
(s, t) <-> (t, s) mirror is deduplicated at branch level.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .curves import PlaneCurve
from .errors import BranchLinkFailure, DegenerateContact, NotBitangent
from .geom import TWO_PI, cross2, torus_dist, torus_dist2, wrap_angle

PAIR_TOL_FACTOR = 1e-10  # pair_tol = factor * max|X'|^2
BISECT_ITERS = 60
NEWTON_ITERS = 30


@dataclass(frozen=True)
class ParallelPair:
    s: float
    t: float
    gap: float  # 0.0 or pi
    chord_direction: np.ndarray

    def swapped(self) -> "ParallelPair":
        return ParallelPair(self.t, self.s, self.gap, -self.chord_direction)


@dataclass
class ParallelBranch:
    S: np.ndarray
    T: np.ndarray
    closed: bool
    branch_id: int = 0

    def __len__(self):
        return self.S.size

    def pair(self, curve: PlaneCurve, i: int) -> ParallelPair:
        return make_pair(curve, float(self.S[i]), float(self.T[i]))

    def points(self, curve: PlaneCurve):
        return curve.point(self.S), curve.point(self.T)


@dataclass(frozen=True)
class Chord:
    a_plus: np.ndarray
    a_minus: np.ndarray

    def lambda_point(self, lam: float):
        return lambda_point(self.a_plus, self.a_minus, lam)


def lambda_point(a_plus, a_minus, lam):
    a_plus = np.asarray(a_plus, dtype=float)
    a_minus = np.asarray(a_minus, dtype=float)
    return lam * a_plus + (1.0 - lam) * a_minus


def make_pair(curve: PlaneCurve, s: float, t: float) -> ParallelPair:
    d1s = curve.tangent(s)
    d1t = curve.tangent(t)
    gap = 0.0 if float(np.dot(d1s, d1t)) > 0.0 else np.pi
    chord = curve.point(t) - curve.point(s)
    norm = np.linalg.norm(chord)
    direction = chord / norm if norm > 0 else chord
    return ParallelPair(wrap_angle(s), wrap_angle(t), gap, direction)


def pair_tol(curve: PlaneCurve) -> float:
    return PAIR_TOL_FACTOR * curve.max_speed**2


def parallel_residual(curve: PlaneCurve, s, t):
    """g(s, t) = cross(X'(s), X'(t))."""
    return cross2(curve.tangent(s), curve.tangent(t))


def parallel_residual_grad(curve: PlaneCurve, s, t):
    gs = cross2(curve.deriv(s, 2), curve.tangent(t))
    gt = cross2(curve.tangent(s), curve.deriv(t, 2))
    return gs, gt


def bitangent_residual(curve: PlaneCurve, s, t):
    """b(s, t) = cross(X(t) - X(s), X'(s)); zero iff the chord is the tangent."""
    return cross2(curve.point(t) - curve.point(s), curve.tangent(s))


def _bisect_edges(f, lo, hi):
    """Vectorized bisection of f on bracketing intervals [lo, hi]."""
    flo = f(lo)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        left = flo * fm <= 0.0
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
        flo = np.where(left, flo, fm)
    return 0.5 * (lo + hi)


def find_parallel_points(curve: PlaneCurve, grid_n: int = 256):
    """Refined zero points of g on the torus grid, diagonal band excluded."""
    if grid_n < 64:
        raise ValueError("grid_n must be >= 64")
    ts = np.linspace(0.0, TWO_PI, grid_n, endpoint=False)
    tang = curve.tangent(ts)
    G = np.multiply.outer(tang[:, 0], tang[:, 1]) - np.multiply.outer(tang[:, 1], tang[:, 0])
    sep = TWO_PI / grid_n

    dist = torus_dist(ts[:, None], ts[None, :])
    banned = dist < sep

    pts = []
    # edges along s (rows index s, cols index t)
    Gn = np.roll(G, -1, axis=0)
    mask = (G * Gn < 0.0) & ~banned & ~np.roll(banned, -1, axis=0)
    si, tj = np.nonzero(mask)
    if si.size:
        t_fix = ts[tj]
        s_root = _bisect_edges(
            lambda s: parallel_residual(curve, s, t_fix), ts[si], ts[si] + sep
        )
        pts.append(np.stack([s_root, t_fix], axis=1))
    # edges along t
    Gn = np.roll(G, -1, axis=1)
    mask = (G * Gn < 0.0) & ~banned & ~np.roll(banned, -1, axis=1)
    si, tj = np.nonzero(mask)
    if si.size:
        s_fix = ts[si]
        t_root = _bisect_edges(
            lambda t: parallel_residual(curve, s_fix, t), ts[tj], ts[tj] + sep
        )
        pts.append(np.stack([s_fix, t_root], axis=1))

    if not pts:
        return np.zeros((0, 2))
    out = wrap_angle(np.concatenate(pts, axis=0))
    keep = torus_dist(out[:, 0], out[:, 1]) >= sep
    out = out[keep]
    # drop points whose residual failed to refine (should not happen)
    res = np.abs(parallel_residual(curve, out[:, 0], out[:, 1]))
    return out[res < pair_tol(curve) * 1e3]


def _torus_embed(pts):
    s, t = pts[:, 0], pts[:, 1]
    return np.stack([np.cos(s), np.sin(s), np.cos(t), np.sin(t)], axis=1)


def _link_chains(pts, step_bound):
    """Greedy nearest-neighbour chaining on the torus; deterministic."""
    n = pts.shape[0]
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    tree = cKDTree(_torus_embed(pts))
    # chord length of the embedding for a torus step d is ~ d for small d
    r = 2.0 * np.sin(min(step_bound, np.pi) / 2.0) * np.sqrt(2.0)
    used = np.zeros(n, dtype=bool)
    chains = []
    emb = _torus_embed(pts)

    def nearest_unused(i):
        for k in (8, 32, 128):
            dd, jj = tree.query(emb[i], k=min(k, n))
            for d, j in zip(np.atleast_1d(dd), np.atleast_1d(jj)):
                if j < n and not used[j] and j != i and d <= r:
                    if torus_dist2(pts[i], pts[j]) <= step_bound:
                        return int(j)
            if k >= n:
                break
        return -1

    for start in order:
        if used[start]:
            continue
        used[start] = True
        chain = [int(start)]
        for front in (True, False):
            while True:
                i = chain[-1] if front else chain[0]
                j = nearest_unused(i)
                if j < 0:
                    break
                used[j] = True
                if front:
                    chain.append(j)
                else:
                    chain.insert(0, j)
        chains.append(chain)
    return chains


def find_parallel_branches(curve: PlaneCurve, grid_n: int = 256):
    """Parallel-pair branches; each unordered pair on exactly one branch."""
    pts = find_parallel_points(curve, grid_n)
    if pts.shape[0] == 0:
        return []
    step_bound = 4.0 * TWO_PI / grid_n
    chains = _link_chains(pts, step_bound)

    branches = []
    unlinked = 0
    for chain in chains:
        if len(chain) < 3:
            unlinked += len(chain)
            continue
        P = pts[chain]
        closed = torus_dist2(P[0], P[-1]) <= step_bound
        branches.append(ParallelBranch(P[:, 0].copy(), P[:, 1].copy(), closed))
    if not branches:
        raise BranchLinkFailure("no branch could be assembled; increase grid_n")
    if unlinked > 0.10 * pts.shape[0]:
        raise BranchLinkFailure(
            f"{unlinked}/{pts.shape[0]} refined points not linkable; increase grid_n"
        )

    branches = _dedup_mirror(branches, step_bound)
    for i, b in enumerate(branches):
        b.branch_id = i
    return branches


def _branch_set_distance(A, B):
    """max over rows of A of min torus distance to rows of B (coarse)."""
    tree = cKDTree(_torus_embed(B))
    d, _ = tree.query(_torus_embed(A))
    return float(np.max(d))


def _dedup_mirror(branches, tol):
    kept = []
    dropped = [False] * len(branches)
    for i, b in enumerate(branches):
        if dropped[i]:
            continue
        mirror = np.stack([b.T, b.S], axis=1)
        own = np.stack([b.S, b.T], axis=1)
        if _branch_set_distance(mirror, own) <= tol:
            kept.append(b)  # self-mirror branch
            continue
        for j in range(i + 1, len(branches)):
            if dropped[j]:
                continue
            other = np.stack([branches[j].S, branches[j].T], axis=1)
            if (
                abs(len(b) - len(branches[j])) <= max(4, 0.2 * len(b))
                and _branch_set_distance(mirror, other) <= tol
                and _branch_set_distance(other, mirror) <= tol
            ):
                dropped[j] = True
                break
        kept.append(b)
    return kept


def project_to_pair_set(curve: PlaneCurve, s, t, iters: int = 3):
    """Newton-project (s, t) onto {g = 0} along the gradient."""
    s = np.asarray(s, dtype=float).copy()
    t = np.asarray(t, dtype=float).copy()
    for _ in range(iters):
        g = parallel_residual(curve, s, t)
        gs, gt = parallel_residual_grad(curve, s, t)
        n2 = gs**2 + gt**2
        n2 = np.where(n2 < 1e-30, 1.0, n2)
        s = s - g * gs / n2
        t = t - g * gt / n2
    return s, t


def branch_tangents(curve: PlaneCurve, S, T):
    """Unit tangents of the pair branch: null direction of dg = (g_s, g_t)."""
    gs, gt = parallel_residual_grad(curve, S, T)
    v = np.stack([-gt, gs], axis=-1)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    n = np.where(n == 0.0, 1.0, n)
    return v / n


def refine_on_branch(curve, p0, p1, fn, tol=1e-13):
    """Root of fn along the branch between nearby branch points p0 and p1.

    Walks the segment p(a) = (1-a) p0 + a p1 projected back onto {g = 0};
    fn(s, t) must change sign between the endpoints.
    """
    from scipy.optimize import brentq

    p0 = np.asarray(p0, dtype=float)
    # move p1 to the same torus sheet as p0
    p1 = np.asarray(p1, dtype=float)
    p1 = p0 + (np.mod(p1 - p0 + np.pi, TWO_PI) - np.pi)

    def phi(a):
        q = (1.0 - a) * p0 + a * p1
        s, t = project_to_pair_set(curve, q[0], q[1])
        return float(fn(s, t))

    f0, f1 = phi(0.0), phi(1.0)
    if f0 == 0.0:
        a = 0.0
    elif f1 == 0.0:
        a = 1.0
    elif f0 * f1 > 0.0:
        return None
    else:
        a = brentq(phi, 0.0, 1.0, xtol=tol)
    q = (1.0 - a) * p0 + a * p1
    s, t = project_to_pair_set(curve, q[0], q[1], iters=5)
    return float(s), float(t)


# -- bitangents ---------------------------------------------------------------


def _newton_bitangent(curve: PlaneCurve, s, t, min_sep=0.0):
    for _ in range(NEWTON_ITERS):
        g = float(parallel_residual(curve, s, t))
        b = float(bitangent_residual(curve, s, t))
        gs, gt = parallel_residual_grad(curve, s, t)
        chord = curve.point(t) - curve.point(s)
        bs = float(cross2(chord, curve.deriv(s, 2)))
        bt = float(cross2(curve.tangent(t), curve.tangent(s)))
        J = np.array([[gs, gt], [bs, bt]], dtype=float)
        try:
            step = np.linalg.solve(J, np.array([g, b]))
        except np.linalg.LinAlgError:
            return None
        s, t = s - step[0], t - step[1]
        if abs(g) + abs(b) < 1e-15 * curve.max_speed**2:
            break
    tol = pair_tol(curve)
    btol = PAIR_TOL_FACTOR * curve.max_speed * curve.diameter
    if float(torus_dist(s, t)) < min_sep:
        return None
    if abs(float(parallel_residual(curve, s, t))) < tol and abs(
        float(bitangent_residual(curve, s, t))
    ) < btol:
        return wrap_angle(s), wrap_angle(t)
    return None


def find_bitangent_pairs(curve: PlaneCurve, branches=None, grid_n: int = 256):
    """Pairs whose chord lies on the common tangent line; [] for convex curves."""
    if branches is None:
        branches = find_parallel_branches(curve, grid_n)
    sep = TWO_PI / grid_n
    found = []
    for br in branches:
        S, T = br.S, br.T
        vals = bitangent_residual(curve, S, T)
        n = len(br)
        rng = range(n) if br.closed else range(n - 1)
        for i in rng:
            j = (i + 1) % n
            if vals[i] == 0.0 or vals[i] * vals[j] < 0.0:
                root = _newton_bitangent(curve, S[i], T[i], min_sep=2 * sep)
                if root is None:
                    root = _newton_bitangent(
                        curve, 0.5 * (S[i] + S[j]), 0.5 * (T[i] + T[j]), min_sep=2 * sep
                    )
                if root is not None:
                    found.append(root)
    # dedup: unordered pairs, torus metric
    pairs = []
    for s, t in found:
        key = (s, t) if s <= t else (t, s)
        dup = False
        for ps, pt in pairs:
            if torus_dist(key[0], ps) < 10 * sep and torus_dist(key[1], pt) < 10 * sep:
                dup = True
                break
        if not dup:
            pairs.append(key)
    pairs.sort()
    return [make_pair(curve, s, t) for s, t in pairs]


# -- contact orders -----------------------------------------------------------


def chord_frame_heights(curve: PlaneCurve, pair: ParallelPair):
    """Derivatives of the signed distance to the chord line at both endpoints."""
    d = curve.tangent(pair.s)
    d = d / np.linalg.norm(d)
    out = []
    for u in (pair.s, pair.t):
        f2 = float(cross2(d, curve.deriv(u, 2)))
        f3 = float(cross2(d, curve.deriv(u, 3)))
        f4 = float(cross2(d, curve.deriv(u, 4)))
        sp2 = float(np.dot(curve.tangent(u), curve.tangent(u)))
        out.append((f2 / sp2, f3 / sp2**1.5, f4 / sp2**2))
    return out


def tangency_order(curve: PlaneCurve, pair: ParallelPair, rel_tol: float = 1e-6):
    """Contact order of the chord line with the curve at each endpoint.

    Order 1 <=> nonzero curvature there (in the chord frame); order 2 <=>
    curvature zero but third height derivative nonzero.
    """
    btol = 1e-7 * curve.diameter
    chord = curve.point(pair.t) - curve.point(pair.s)
    if abs(float(cross2(chord, curve.tangent(pair.s)))) > btol * curve.max_speed:
        raise NotBitangent("tangency_order requires a bitangent pair")
    scale = max(curve.max_curvature, 1.0 / curve.diameter)
    orders = []
    for f2, f3, f4 in chord_frame_heights(curve, pair):
        if abs(f2) > rel_tol * scale:
            orders.append(1)
        elif abs(f3) > rel_tol * scale:
            orders.append(2)
        elif abs(f4) > rel_tol * scale:
            orders.append(3)
        else:
            raise DegenerateContact("contact order exceeds 3")
    return tuple(orders)


# -- adapted-frame curvature data --------------------------------------------


def frame_sign(curve: PlaneCurve, s, t):
    """+1 for equally oriented tangents, -1 for opposite."""
    dots = np.einsum("...i,...i->...", curve.tangent(s), curve.tangent(t))
    return np.where(dots > 0.0, 1.0, -1.0)


def frame_curvatures(curve: PlaneCurve, s, t):
    """(ktilde_plus, ktilde_minus): graph curvatures over the common tangent."""
    kp = curve.curvature(s)
    km = frame_sign(curve, s, t) * curve.curvature(t)
    return kp, km


def singular_residual(curve: PlaneCurve, s, t, lam: float):
    """ktilde+/lam + ktilde-/(1-lam); zero exactly on the singular locus."""
    kp, km = frame_curvatures(curve, s, t)
    return kp / lam + km / (1.0 - lam)


def curvature_ratio(curve: PlaneCurve, s, t):
    """Ratio normalized so that 1 marks midpoint-caustic cusps."""
    kp, km = frame_curvatures(curve, s, t)
    return -kp / km


def singular_lambda(curve: PlaneCurve, s, t):
    """The unique lambda with singular_residual = 0 (nan if curvatures cancel)."""
    kp, km = frame_curvatures(curve, s, t)
    den = kp - km
    return np.where(np.abs(den) > 0.0, kp / np.where(den == 0.0, 1.0, den), np.nan)
