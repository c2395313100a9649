"""Affine equidistant slices, the chord transform, and the extended front.

The lambda-point map sends a parallel pair (a+, a-) to lam*a+ + (1-lam)*a-.
Slices are sampled along precomputed pair branches in both orderings, so the
emitted set satisfies E_lam = E_(1-lam).  An independent oracle scans the
(s, t) torus for rank drops of the product-map Jacobian and must reproduce
each slice up to grid pitch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pairs as prs
from .curves import PlaneCurve
from .errors import DegenerateLambda
from .geom import TWO_PI, cross2, dedup_points, torus_dist, wrap_angle

SING_TOL_FACTOR = 1e-9  # sing_tol = factor * max|kappa|
RANK_TOL_FACTOR = 1e-10  # rank_tol = factor * max|X'|^2
COLLAPSE_FACTOR = 1e-6  # fully-degenerate slice spread, relative to diameter

DEFAULT_LAMBDA_RANGE = (-0.5, 1.5)
DEFAULT_LAMBDA_STEPS = 201


def _check_lambda(lam: float):
    if lam in (0.0, 1.0):
        raise DegenerateLambda("lambda must avoid {0, 1}")


# -- chord transform ----------------------------------------------------------


def chord_transform(lam: float, x_plus, x_minus):
    """(x+, x-) -> (x, xdot): lambda-point and chord coordinates."""
    _check_lambda(lam)
    x_plus = np.asarray(x_plus, dtype=float)
    x_minus = np.asarray(x_minus, dtype=float)
    x = lam * x_plus + (1.0 - lam) * x_minus
    xdot = lam * x_plus - (1.0 - lam) * x_minus
    return x, xdot


def inverse_chord_transform(lam: float, x, xdot):
    _check_lambda(lam)
    x = np.asarray(x, dtype=float)
    xdot = np.asarray(xdot, dtype=float)
    return (x + xdot) / (2.0 * lam), (x - xdot) / (2.0 * (1.0 - lam))


def chord_transform_matrix(lam: float, n: int = 2):
    """Matrix of the transform on R^n x R^n, block order (x+, x-) -> (x, xdot)."""
    _check_lambda(lam)
    eye = np.eye(n)
    top = np.hstack([lam * eye, (1.0 - lam) * eye])
    bot = np.hstack([lam * eye, -(1.0 - lam) * eye])
    return np.vstack([top, bot])


def _omega_matrix():
    # dp ^ dq in coordinates (p, q)
    return np.array([[0.0, 1.0], [-1.0, 0.0]])


def weighted_product_form(lam: float):
    """2 lam^2 w (+) -2 (1-lam)^2 w on R^2 x R^2, coordinates (p+,q+,p-,q-)."""
    J = _omega_matrix()
    out = np.zeros((4, 4))
    out[:2, :2] = 2.0 * lam**2 * J
    out[2:, 2:] = -2.0 * (1.0 - lam) ** 2 * J
    return out


def tangent_bundle_form():
    """dpdot ^ dq + dp ^ dqdot in coordinates (p, q, pdot, qdot)."""
    out = np.zeros((4, 4))
    out[2, 1] = 1.0  # dpdot ^ dq
    out[1, 2] = -1.0
    out[0, 3] = 1.0  # dp ^ dqdot
    out[3, 0] = -1.0
    return out


def pullback_residual(lam: float) -> float:
    """|M^T Omega_dot M - Omega_lam|_max for the chord transform M."""
    M = chord_transform_matrix(lam, 2)
    # reorder blocks: transform acts on (x+, x-) with x = (p, q)
    omega_dot = tangent_bundle_form()
    lhs = M.T @ omega_dot @ M
    return float(np.abs(lhs - weighted_product_form(lam)).max())


# -- equidistant slices -------------------------------------------------------


@dataclass
class EquidistantBranch:
    lam: float
    S: np.ndarray
    T: np.ndarray
    points: np.ndarray
    regular: np.ndarray
    source_branch: int
    swapped: bool = False
    closed: bool = False
    fully_degenerate: bool = False
    collapsed_point: np.ndarray | None = None


def equidistant(curve: PlaneCurve, lam: float, branches=None, grid_n: int = 256):
    """Sampled E_lam on every branch, in both pair orderings."""
    _check_lambda(lam)
    if branches is None:
        branches = prs.find_parallel_branches(curve, grid_n)
    sing_tol = SING_TOL_FACTOR * max(curve.max_curvature, 1.0 / curve.diameter)
    out = []
    for br in branches:
        A = curve.point(br.S)
        B = curve.point(br.T)
        for swapped in (False, True):
            S, T = (br.T, br.S) if swapped else (br.S, br.T)
            P, Q = (B, A) if swapped else (A, B)
            pts = lam * P + (1.0 - lam) * Q
            res = prs.singular_residual(curve, S, T, lam)
            eb = EquidistantBranch(
                lam=lam,
                S=S.copy(),
                T=T.copy(),
                points=pts,
                regular=np.abs(res) > sing_tol,
                source_branch=br.branch_id,
                swapped=swapped,
                closed=br.closed,
            )
            _flag_collapse(curve, eb)
            out.append(eb)
    return out


def _flag_collapse(curve: PlaneCurve, eb: EquidistantBranch):
    center = eb.points.mean(axis=0)
    spread = np.linalg.norm(eb.points - center, axis=1).max() if len(eb.points) else 0.0
    if spread < COLLAPSE_FACTOR * curve.diameter:
        eb.fully_degenerate = True
        eb.collapsed_point = center


def wigner_caustic(curve: PlaneCurve, branches=None, grid_n: int = 256):
    return equidistant(curve, 0.5, branches, grid_n)


def slice_points(slices) -> np.ndarray:
    """Stack sample points of a list of EquidistantBranch."""
    chunks = [eb.points for eb in slices if len(eb.points)]
    return np.concatenate(chunks, axis=0) if chunks else np.zeros((0, 2))


# -- singular locus -----------------------------------------------------------


def singular_locus(curve: PlaneCurve, lam: float, branches=None, grid_n: int = 256):
    """Root-refined singular points of the lam-slice: [(pair, point)].

    Mirror hits landing on the same point are deduplicated (relevant at
    lam = 1/2 where both orderings give the midpoint).
    """
    _check_lambda(lam)
    if branches is None:
        branches = prs.find_parallel_branches(curve, grid_n)
    hits = []
    for br in branches:
        for swapped in (False, True):
            S, T = (br.T, br.S) if swapped else (br.S, br.T)
            res = prs.singular_residual(curve, S, T, lam)
            n = len(S)
            rng = range(n) if br.closed else range(n - 1)
            for i in rng:
                j = (i + 1) % n
                if res[i] == 0.0 or res[i] * res[j] < 0.0:
                    root = prs.refine_on_branch(
                        curve,
                        (S[i], T[i]),
                        (S[j], T[j]),
                        lambda s, t: prs.singular_residual(curve, s, t, lam),
                    )
                    if root is None:
                        continue
                    s, t = root
                    pt = prs.lambda_point(curve.point(s), curve.point(t), lam)
                    hits.append((s, t, pt))
    if not hits:
        return []
    pts = np.array([h[2] for h in hits])
    params = np.array([[min(h[0], h[1]), max(h[0], h[1])] for h in hits])
    _, idx = dedup_points(pts, 1e-6 * curve.diameter, extra=params)
    return [
        (prs.make_pair(curve, hits[i][0], hits[i][1]), hits[i][2]) for i in idx
    ]


# -- independent oracle: rank-drop scan of the product map --------------------


def gensing_scan(curve: PlaneCurve, lam: float, grid_n: int = 256) -> np.ndarray:
    """Critical values of (s, t) -> lam X(s) + (1-lam) X(t), by grid scan.

    Independent of the branch machinery: detects sign changes of the
    Jacobian determinant on the raw torus grid and bisects along edges.
    """
    _check_lambda(lam)
    ts = np.linspace(0.0, TWO_PI, grid_n, endpoint=False)
    tang = curve.tangent(ts)
    # det [lam X'(s) | (1-lam) X'(t)] = lam (1-lam) cross(X'(s), X'(t))
    D = lam * (1.0 - lam) * (
        np.multiply.outer(tang[:, 0], tang[:, 1])
        - np.multiply.outer(tang[:, 1], tang[:, 0])
    )
    sep = TWO_PI / grid_n
    dist = torus_dist(ts[:, None], ts[None, :])
    banned = dist < sep

    def jac_det(s, t):
        return lam * (1.0 - lam) * cross2(curve.tangent(s), curve.tangent(t))

    found = []
    Dn = np.roll(D, -1, axis=0)
    mask = (D * Dn < 0.0) & ~banned & ~np.roll(banned, -1, axis=0)
    si, tj = np.nonzero(mask)
    if si.size:
        t_fix = ts[tj]
        s_root = prs._bisect_edges(lambda s: jac_det(s, t_fix), ts[si], ts[si] + sep)
        found.append(np.stack([s_root, t_fix], axis=1))
    Dn = np.roll(D, -1, axis=1)
    mask = (D * Dn < 0.0) & ~banned & ~np.roll(banned, -1, axis=1)
    si, tj = np.nonzero(mask)
    if si.size:
        s_fix = ts[si]
        t_root = prs._bisect_edges(lambda t: jac_det(s_fix, t), ts[tj], ts[tj] + sep)
        found.append(np.stack([s_fix, t_root], axis=1))
    if not found:
        return np.zeros((0, 2))
    st = np.concatenate(found, axis=0)
    keep = torus_dist(st[:, 0], st[:, 1]) >= sep
    st = st[keep]
    return lam * curve.point(st[:, 0]) + (1.0 - lam) * curve.point(st[:, 1])


# -- extended front -----------------------------------------------------------


@dataclass(frozen=True)
class FrontSample:
    lam: float
    point: np.ndarray
    fiber_tangency_order: int = 0
    regular: bool = True


def lambda_grid(lo=DEFAULT_LAMBDA_RANGE[0], hi=DEFAULT_LAMBDA_RANGE[1],
                steps=DEFAULT_LAMBDA_STEPS, refine_wigner=True):
    """Uniform grid with a 10x refined band near lambda = 1/2."""
    grid = np.linspace(lo, hi, steps)
    if refine_wigner and lo < 0.5 < hi:
        step = (hi - lo) / max(steps - 1, 1)
        band = np.arange(max(lo, 0.5 - 5 * step), min(hi, 0.5 + 5 * step), step / 10.0)
        grid = np.unique(np.concatenate([grid, band]))
    return grid[(grid != 0.0) & (grid != 1.0)]


def extended_front(curve: PlaneCurve, lam_min=DEFAULT_LAMBDA_RANGE[0],
                   lam_max=DEFAULT_LAMBDA_RANGE[1], lam_steps=DEFAULT_LAMBDA_STEPS,
                   branches=None, grid_n: int = 256, tangency_orders=False):
    """Stacked slices over a lambda grid, as FrontSample records."""
    if branches is None:
        branches = prs.find_parallel_branches(curve, grid_n)
    bits = prs.find_bitangent_pairs(curve, branches, grid_n) if tangency_orders else []
    samples = []
    for lam in lambda_grid(lam_min, lam_max, lam_steps):
        for eb in equidistant(curve, float(lam), branches):
            if eb.fully_degenerate:
                samples.append(FrontSample(float(lam), eb.collapsed_point, 0, False))
                continue
            orders = np.zeros(len(eb.points), dtype=int)
            if bits:
                for bp in bits:
                    near = (torus_dist(eb.S, bp.s) < 2 * TWO_PI / grid_n) & (
                        torus_dist(eb.T, bp.t) < 2 * TWO_PI / grid_n
                    )
                    if near.any():
                        o = sum(prs.tangency_order(curve, bp)) - 1  # (1,1)->1, (1,2)->2
                        orders[near] = o
            for k in range(len(eb.points)):
                samples.append(
                    FrontSample(float(lam), eb.points[k], int(orders[k]), bool(eb.regular[k]))
                )
    return samples
