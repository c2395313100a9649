"""Assembly and classification of the global centre symmetry set.

Layers computed here:

* midpoint caustic (the lambda = 1/2 slice) and its cusps, located where the
  adapted-frame curvature ratio crosses 1;
* centre symmetry set: the envelope of chords of parallel pairs, with cusps
  where the ratio derivative along the branch vanishes;
* singular sweep: singular slice points linked over a lambda grid (matches
  the envelope on its lambda in (0,1) part);
* middle axes: self-intersections of the slices swept over lambda; each arc
  is born at an envelope cusp;
* criminant: chord segments of bitangent pairs (empty iff no bitangents).

Pointwise classification follows the curvature/tangency decision table for
stable germs of the set.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import equidistants as eq
from . import pairs as prs
from .curves import PlaneCurve
from .errors import A2ConditionFailed, EnvelopeDegenerate
from .geom import (TWO_PI, cross2, dedup_points, perp, segment_intersections,
                   torus_dist, wrap_angle)

RATIO_ROOT_TOL = 1e-9
CUSP_DEDUP_FACTOR = 1e-6  # dedup radius = factor * diameter
DEGENERATE_RATIO_TOL = 1e-9

LABEL_WIGNER_SMOOTH = "A2_B1"
LABEL_WIGNER_CRIMINANT = "A2_B2"
LABEL_CRIMINANT_SMOOTH = "A2_A1"
LABEL_UNSTABLE = "UNSTABLE"
LABEL_FULLY_DEGENERATE = "FULLY_DEGENERATE"


# -- curvature ratio profiles -------------------------------------------------


@dataclass
class CurvatureRatioProfile:
    branch_id: int
    S: np.ndarray
    T: np.ndarray
    ratio: np.ndarray
    ratio_derivative: np.ndarray
    defined: np.ndarray  # False where the lower curvature vanishes
    closed: bool


def curvature_ratio_profile(curve: PlaneCurve, branch) -> CurvatureRatioProfile:
    """Adapted-frame curvature ratio and its analytic branch derivative."""
    S, T = branch.S, branch.T
    sig = prs.frame_sign(curve, S, T)
    ks = curve.curvature(S)
    kt = curve.curvature(T)
    dks = curve.curvature_deriv(S)
    dkt = curve.curvature_deriv(T)
    km = sig * kt
    defined = np.abs(km) > 1e-12 * max(curve.max_curvature, 1e-12)
    km_safe = np.where(defined, km, 1.0)
    ratio = np.where(defined, -ks / km_safe, np.nan)
    tang = prs.branch_tangents(curve, S, T)
    # d/du of -k(s)/(sig k(t)) along the branch direction (ds, dt)
    dr = -(dks * tang[:, 0] * km - ks * sig * dkt * tang[:, 1]) / km_safe**2
    dr = np.where(defined, dr, np.nan)
    return CurvatureRatioProfile(branch.branch_id, S, T, ratio, dr, defined, branch.closed)


def _profile_sign_roots(curve, profile, values, fn):
    """Refine sign changes of `values` along the branch via fn(s, t).

    Samples landing on a root up to noise (common when the grid divides the
    curve's symmetry) are taken verbatim instead of bracketing.
    """
    S, T = profile.S, profile.T
    n = S.size
    rng = range(n) if profile.closed else range(n - 1)
    vmax = np.nanmax(np.abs(values)) if np.isfinite(values).any() else 0.0
    tol = 1e-11 * max(vmax, 1e-300)
    roots = []
    for i in rng:
        j = (i + 1) % n
        vi, vj = values[i], values[j]
        if np.isnan(vi) or np.isnan(vj):
            continue
        if abs(vi) <= tol:
            roots.append((float(S[i]), float(T[i])))
            continue
        if abs(vj) <= tol:
            continue  # recorded when the scan reaches j
        if vi * vj < 0.0:
            root = prs.refine_on_branch(curve, (S[i], T[i]), (S[j], T[j]), fn)
            if root is not None:
                roots.append(root)
    return roots


def _dedup_cusps(curve, roots, lam_of_root):
    """Deduplicate mirror/duplicate cusp hits by position + unordered params."""
    if not roots:
        return []
    pts = []
    params = []
    for s, t in roots:
        lam = lam_of_root(s, t)
        pts.append(prs.lambda_point(curve.point(s), curve.point(t), lam))
        params.append((min(s, t), max(s, t)))
    pts = np.asarray(pts)
    _, idx = dedup_points(pts, CUSP_DEDUP_FACTOR * curve.diameter, extra=np.asarray(params))
    return [(pts[i], prs.make_pair(curve, roots[i][0], roots[i][1])) for i in idx]


@dataclass
class CuspSummary:
    cusps: list
    degenerate: bool = False

    @property
    def count(self):
        return len(self.cusps)

    def points(self):
        return np.array([c[0] for c in self.cusps]) if self.cusps else np.zeros((0, 2))

    def pairs(self):
        return [c[1] for c in self.cusps]


def wigner_cusps(curve: PlaneCurve, branches=None, grid_n: int = 256) -> CuspSummary:
    """Cusps of the midpoint caustic: ratio = 1 crossings, deduplicated."""
    if branches is None:
        branches = prs.find_parallel_branches(curve, grid_n)
    roots = []
    degenerate = True
    for br in branches:
        prof = curvature_ratio_profile(curve, br)
        dev = np.nanmax(np.abs(prof.ratio - 1.0)) if prof.defined.any() else 0.0
        if dev > DEGENERATE_RATIO_TOL:
            degenerate = False
        roots += _profile_sign_roots(
            curve,
            prof,
            prof.ratio - 1.0,
            lambda s, t: prs.curvature_ratio(curve, s, t) - 1.0,
        )
    if degenerate:
        return CuspSummary([], degenerate=True)
    return CuspSummary(_dedup_cusps(curve, roots, lambda s, t: 0.5))


# -- envelope of chords ---------------------------------------------------------


def css_envelope(curve: PlaneCurve, branches=None, grid_n: int = 256):
    """Envelope of the chord lines along each branch, plus its cusps.

    Per sample, the envelope point solves the 2x2 system {point on the line,
    point on the u-derivative line}; samples where the chord family is
    momentarily stationary are dropped.
    Returns (polylines, CuspSummary, lambda arrays per polyline).
    """
    if branches is None:
        branches = prs.find_parallel_branches(curve, grid_n)
    polylines = []
    lam_values = []
    roots = []
    degenerate = True
    for br in branches:
        S, T = br.S, br.T
        A = curve.point(S)
        B = curve.point(T)
        D = B - A
        tang = prs.branch_tangents(curve, S, T)
        Adot = curve.tangent(S) * tang[:, :1]
        Bdot = curve.tangent(T) * tang[:, 1:2]
        Ddot = Bdot - Adot
        nrm = perp(D)
        nrmdot = perp(Ddot)
        c = np.einsum("ij,ij->i", nrm, A)
        cdot = np.einsum("ij,ij->i", nrmdot, A) + np.einsum("ij,ij->i", nrm, Adot)
        det = nrm[:, 0] * nrmdot[:, 1] - nrm[:, 1] * nrmdot[:, 0]
        ok = np.abs(det) > 1e-12 * curve.diameter * curve.max_speed**2
        Z = np.full_like(A, np.nan)
        det_safe = np.where(ok, det, 1.0)
        Z[:, 0] = (c * nrmdot[:, 1] - cdot * nrm[:, 1]) / det_safe
        Z[:, 1] = (cdot * nrm[:, 0] - c * nrmdot[:, 0]) / det_safe
        Z[~ok] = np.nan
        polylines.append(Z)
        lam_values.append(prs.singular_lambda(curve, S, T))

        prof = curvature_ratio_profile(curve, br)
        if prof.defined.any() and np.nanmax(np.abs(prof.ratio - 1.0)) > DEGENERATE_RATIO_TOL:
            degenerate = False
        roots += _profile_sign_roots(
            curve,
            prof,
            prof.ratio_derivative,
            lambda s, t: _ratio_derivative_scalar(curve, s, t),
        )
    if degenerate:
        return polylines, CuspSummary([], degenerate=True), lam_values
    cusps = _dedup_cusps(
        curve, roots, lambda s, t: float(prs.singular_lambda(curve, s, t))
    )
    return polylines, CuspSummary(cusps), lam_values


def _ratio_derivative_scalar(curve, s, t):
    sig = float(prs.frame_sign(curve, s, t))
    ks = float(curve.curvature(s))
    kt = float(curve.curvature(t))
    dks = float(curve.curvature_deriv(s))
    dkt = float(curve.curvature_deriv(t))
    km = sig * kt
    gs, gt = prs.parallel_residual_grad(curve, s, t)
    v = np.array([-float(gt), float(gs)])
    nv = np.linalg.norm(v)
    if nv == 0.0 or km == 0.0:
        return np.nan
    v /= nv
    return -(dks * v[0] * km - ks * sig * dkt * v[1]) / km**2


# -- singular sweep and middle axes --------------------------------------------


def sigma_prime_sweep(curve: PlaneCurve, lam_grid=None, branches=None, grid_n: int = 256):
    """Singular slice points over a lambda grid, linked into polylines.

    The lambda in (0,1) portion reproduces the chord envelope; parts with
    lambda outside [0,1] exist only when some pair has equally-signed
    adapted-frame curvatures (never on a convex curve).
    """
    if branches is None:
        branches = prs.find_parallel_branches(curve, grid_n)
    if lam_grid is None:
        lam_grid = eq.lambda_grid()
    records = []  # (lam, point, s, t)
    for lam in lam_grid:
        for pair, pt in eq.singular_locus(curve, float(lam), branches):
            records.append((float(lam), pt, pair.s, pair.t))
    return _link_sweep(curve, records)


def _link_sweep(curve, records, move_bound=None):
    """Chain sweep records into polylines by matching consecutive lambda layers."""
    if not records:
        return []
    if move_bound is None:
        move_bound = 0.35 * curve.diameter
    pts = np.array([r[1] for r in records])
    par = np.array([[r[2], r[3]] for r in records])
    lams = np.array([r[0] for r in records])
    levels = np.unique(lams)
    chains = []  # list of index lists; chains[i][-1] is the live end
    live = []  # indices into chains that may still be extended
    for lev in levels:
        layer = sorted(np.nonzero(lams == lev)[0], key=lambda i: (pts[i, 0], pts[i, 1]))
        # greedy 1-1 match of live chain ends to layer records
        cand = []
        for ci in live:
            end = chains[ci][-1]
            for j in layer:
                d = float(np.linalg.norm(pts[end] - pts[j]))
                if d <= move_bound:
                    cand.append((d, ci, j))
        cand.sort()
        taken_chain, taken_rec = set(), set()
        next_live = []
        for d, ci, j in cand:
            if ci in taken_chain or j in taken_rec:
                continue
            chains[ci].append(j)
            taken_chain.add(ci)
            taken_rec.add(j)
            next_live.append(ci)
        for j in layer:
            if j not in taken_rec:
                chains.append([j])
                next_live.append(len(chains) - 1)
        live = next_live
    return [
        {"points": pts[c], "lambdas": lams[c], "params": par[c]}
        for c in chains
    ]


def slice_self_intersections(curve: PlaneCurve, lam: float, branches=None,
                             grid_n: int = 256, refine_samples: int = 1024):
    """Transversal self-intersection points of the lam-slice.

    The slice is resampled densely along each branch (projected back onto the
    pair set), intersected segment against segment, and every crossing is
    polished by a 2-D Newton solve on the two branch parameters.
    """
    if branches is None:
        branches = prs.find_parallel_branches(curve, grid_n)
    out = []
    for br in branches:
        S, T = _resample_branch(curve, br, refine_samples)
        pts = lam * curve.point(S) + (1.0 - lam) * curve.point(T)
        for i, j, ui, vj, p0 in segment_intersections(pts, exclude_param_gap=3, closed=br.closed):
            w1 = np.array([S[i], T[i]])
            w1b = np.array([S[(i + 1) % len(S)], T[(i + 1) % len(S)]])
            w2 = np.array([S[j], T[j]])
            w2b = np.array([S[(j + 1) % len(S)], T[(j + 1) % len(S)]])
            seed1 = w1 + ui * (np.mod(w1b - w1 + np.pi, TWO_PI) - np.pi)
            seed2 = w2 + vj * (np.mod(w2b - w2 + np.pi, TWO_PI) - np.pi)
            sol = _newton_crossing(curve, lam, seed1, seed2)
            if sol is not None:
                out.append(sol)
    if not out:
        return []
    pts = np.array([o[0] for o in out])
    pars = np.array([o[1] for o in out])
    _, idx = dedup_points(pts, CUSP_DEDUP_FACTOR * curve.diameter * 10)
    return [(pts[i], pars[i]) for i in idx]


def _resample_branch(curve, br, n):
    S, T = br.S, br.T
    if len(S) >= n:
        return S, T
    # unwrap, upsample linearly, project back to the pair set
    dS = np.mod(np.diff(S) + np.pi, TWO_PI) - np.pi
    dT = np.mod(np.diff(T) + np.pi, TWO_PI) - np.pi
    Su = np.concatenate([[S[0]], S[0] + np.cumsum(dS)])
    Tu = np.concatenate([[T[0]], T[0] + np.cumsum(dT)])
    if br.closed:
        dS0 = np.mod(S[0] - Su[-1] + np.pi, TWO_PI) - np.pi
        dT0 = np.mod(T[0] - Tu[-1] + np.pi, TWO_PI) - np.pi
        Su = np.concatenate([Su, [Su[-1] + dS0]])
        Tu = np.concatenate([Tu, [Tu[-1] + dT0]])
    u = np.linspace(0.0, 1.0, Su.size)
    uu = np.linspace(0.0, 1.0, n, endpoint=not br.closed)
    Sr = np.interp(uu, u, Su)
    Tr = np.interp(uu, u, Tu)
    Sr, Tr = prs.project_to_pair_set(curve, Sr, Tr)
    return wrap_angle(Sr), wrap_angle(Tr)


def _newton_crossing(curve, lam, w1, w2, iters=40):
    """Solve lam X(s1) + (1-lam) X(t1) = lam X(s2) + (1-lam) X(t2) on the pair set.

    Unknowns are arclength moves along the two branch tangents; the two
    residual equations are the coordinates of the point difference.
    """
    w1 = np.asarray(w1, dtype=float).copy()
    w2 = np.asarray(w2, dtype=float).copy()

    def point(w):
        return lam * curve.point(w[0]) + (1.0 - lam) * curve.point(w[1])

    for _ in range(iters):
        w1[0], w1[1] = prs.project_to_pair_set(curve, w1[0], w1[1], iters=2)
        w2[0], w2[1] = prs.project_to_pair_set(curve, w2[0], w2[1], iters=2)
        r = point(w1) - point(w2)
        if np.linalg.norm(r) < 1e-13 * curve.diameter:
            break
        t1 = prs.branch_tangents(curve, np.array([w1[0]]), np.array([w1[1]]))[0]
        t2 = prs.branch_tangents(curve, np.array([w2[0]]), np.array([w2[1]]))[0]
        d1 = lam * curve.tangent(w1[0]) * t1[0] + (1.0 - lam) * curve.tangent(w1[1]) * t1[1]
        d2 = lam * curve.tangent(w2[0]) * t2[0] + (1.0 - lam) * curve.tangent(w2[1]) * t2[1]
        J = np.stack([d1, -d2], axis=1)
        try:
            step = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            return None
        w1 -= step[0] * t1
        w2 -= step[1] * t2
    else:
        return None
    # reject the trivial "crossing" of a branch with itself at the same pair
    if np.hypot(torus_dist(w1[0], w2[0]), torus_dist(w1[1], w2[1])) < 1e-4:
        return None
    return point(w1), np.array([w1[0], w1[1], w2[0], w2[1]])


def middle_axes(curve: PlaneCurve, branches=None, grid_n: int = 256,
                lam_lo: float = 0.5, lam_hi: float = 0.999, lam_steps: int = 41):
    """Self-intersection sweep of the slices: arcs attached at envelope cusps.

    Slices for lam and 1-lam coincide as sets, so sweeping lam in (1/2, 1)
    covers all crossings.  Near lam = 1/2 the mirror orderings collide and
    crossings degenerate, so the sweep starts just above 1/2.
    """
    if branches is None:
        branches = prs.find_parallel_branches(curve, grid_n)
    records = []
    eps = 1.0 / (4.0 * lam_steps)
    for lam in np.linspace(lam_lo + eps, lam_hi, lam_steps):
        for pt, par in slice_self_intersections(curve, float(lam), branches):
            records.append((float(lam), pt, par[0], par[1]))
    return _link_sweep(curve, records)


# -- criminant -----------------------------------------------------------------


def criminant(curve: PlaneCurve, bitangents=None, branches=None, grid_n: int = 256,
              lam_window=(-0.5, 1.5)):
    """Chord segments of bitangent pairs, clipped to a lambda window."""
    if bitangents is None:
        bitangents = prs.find_bitangent_pairs(curve, branches, grid_n)
    segs = []
    for bp in bitangents:
        a = curve.point(bp.s)
        b = curve.point(bp.t)
        lo = prs.lambda_point(a, b, lam_window[0])
        hi = prs.lambda_point(a, b, lam_window[1])
        segs.append(np.stack([lo, hi], axis=0))
    return segs


# -- fiber tangency and classification ------------------------------------------


def is_bitangent_pair(curve: PlaneCurve, pair, rel_tol: float = 1e-7) -> bool:
    chord = curve.point(pair.t) - curve.point(pair.s)
    res = abs(float(cross2(chord, curve.tangent(pair.s))))
    return res < rel_tol * curve.diameter * curve.max_speed


def fiber_tangency_order(curve: PlaneCurve, pair, lam: float) -> int:
    """Contact order of the front with the vertical fiber at (lam, point).

    0 when the chord is not bitangent; 1 for (1,1) chord contact; 2 when one
    endpoint has second-order contact.
    """
    res = float(prs.singular_residual(curve, pair.s, pair.t, lam))
    sing_tol = eq.SING_TOL_FACTOR * max(curve.max_curvature, 1.0 / curve.diameter)
    if abs(res) <= sing_tol:
        raise A2ConditionFailed("front is singular at this pair/lambda")
    if not is_bitangent_pair(curve, pair):
        return 0
    orders = prs.tangency_order(curve, pair)
    return 1 if orders == (1, 1) else 2


def _local_slice_distance(curve, x0, s0, t0, lam, window=0.6, samples=2001, zooms=4):
    """Distance from x0 to the slice arc swept by the branch through (s0, t0).

    Coarse scan plus iterative zoom: the tangential quantization error decays
    with the cube of the sample spacing, so a few zoom rounds push the
    refined minimum far below the geometric scales of interest.
    """
    center, width = 0.0, window
    out = np.inf
    for _ in range(zooms):
        a = np.linspace(center - width, center + width, samples)
        S, T = prs.project_to_pair_set(curve, s0 + a, t0 + a, iters=4)
        pts = lam * curve.point(S) + (1.0 - lam) * curve.point(T)
        r2 = np.einsum("ij,ij->i", pts - x0, pts - x0)
        i = int(np.argmin(r2))
        lo, hi = max(i - 1, 0), min(i + 1, len(r2) - 1)
        val = r2[i]
        if lo < i < hi:
            y0, y1, y2 = r2[lo], r2[i], r2[hi]
            den = y0 - 2.0 * y1 + y2
            if den > 0:
                ref = y1 - 0.125 * (y0 - y2) ** 2 / den
                if ref > 0:  # negative values are refinement noise
                    val = ref
        out = float(np.sqrt(max(val, 0.0)))
        center = float(a[i])
        width = 4.0 * width / (samples - 1)
    return out


def front_distance_exponent(curve: PlaneCurve, pair, lam: float,
                            offsets=None, window: float = 0.6):
    """Numeric cross-check: log-log slope of dist(x0, slice(lam + d)) in d.

    Transversal front: slope 1; k-tangent front: slope k + 1.
    """
    if offsets is None:
        offsets = np.geomspace(2e-3, 1.2e-2, 7)
    offsets = np.asarray(offsets, dtype=float)
    x0 = prs.lambda_point(curve.point(pair.s), curve.point(pair.t), lam)
    ds = np.array(
        [
            _local_slice_distance(curve, x0, pair.s, pair.t, lam + d, window=window)
            for d in offsets
        ]
    )
    good = ds > 0
    slope = np.polyfit(np.log(offsets[good]), np.log(ds[good]), 1)[0]
    return float(slope)


@dataclass
class SingularityReport:
    point: np.ndarray
    pair: prs.ParallelPair
    lam: float
    label: str | None
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "point": [float(self.point[0]), float(self.point[1])],
            "pair": {"s": self.pair.s, "t": self.pair.t, "gap": self.pair.gap},
            "lambda": self.lam,
            "label": self.label,
            "diagnostics": {k: _jsonable(v) for k, v in self.diagnostics.items()},
        }


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    return v


def classify_point(curve: PlaneCurve, pair, lam: float,
                   half_tol: float = 1e-9) -> SingularityReport:
    """Decision table over (bitangency, contact orders, lambda = 1/2)."""
    res = float(prs.singular_residual(curve, pair.s, pair.t, lam))
    sing_tol = eq.SING_TOL_FACTOR * max(curve.max_curvature, 1.0 / curve.diameter)
    if abs(res) <= sing_tol:
        raise A2ConditionFailed(
            f"fold condition fails: residual {res:.3e}; point lies on the singular sweep"
        )
    point = prs.lambda_point(curve.point(pair.s), curve.point(pair.t), lam)
    at_half = abs(lam - 0.5) <= half_tol
    bit = is_bitangent_pair(curve, pair)
    diag = {
        "fold_residual": res,
        "bitangent_residual": float(
            cross2(curve.point(pair.t) - curve.point(pair.s), curve.tangent(pair.s))
        ),
        "lambda": lam,
    }
    if not bit:
        label = LABEL_WIGNER_SMOOTH if at_half else None
        return SingularityReport(point, pair, lam, label, diag)
    orders = prs.tangency_order(curve, pair)
    diag["contact_orders"] = orders
    if orders == (1, 1):
        label = LABEL_WIGNER_CRIMINANT if at_half else LABEL_CRIMINANT_SMOOTH
    else:
        label = LABEL_UNSTABLE
    return SingularityReport(point, pair, lam, label, diag)


# -- assembly ------------------------------------------------------------------


@dataclass
class GcsDecomposition:
    curve: PlaneCurve
    wigner: list
    wigner_cusps: CuspSummary
    css: list
    css_cusps: CuspSummary
    middle_axes: list
    criminant: list
    reports: list
    fully_degenerate: bool = False

    def criminant_empty(self):
        return len(self.criminant) == 0


def assemble_gcs(curve: PlaneCurve, grid_n: int = 256, branches=None,
                 classify_lambda: float = 0.3, with_middle_axes: bool = True):
    if branches is None:
        branches = prs.find_parallel_branches(curve, grid_n)
    wig = eq.wigner_caustic(curve, branches)
    wcusps = wigner_cusps(curve, branches)
    css_lines, ccusps, _ = css_envelope(curve, branches)
    bits = prs.find_bitangent_pairs(curve, branches, grid_n)
    crim = criminant(curve, bits)
    assert (len(crim) == 0) == (len(bits) == 0)
    axes = []
    degenerate = wcusps.degenerate and ccusps.degenerate
    if with_middle_axes and not degenerate:
        axes = middle_axes(curve, branches, grid_n)
    reports = []
    for pt, pair in wcusps.cusps:
        reports.append(
            SingularityReport(pt, pair, 0.5, LABEL_FULLY_DEGENERATE if degenerate else "CUSP",
                              {"kind": "wigner_cusp"})
        )
    for bp in bits:
        for lam in (0.5, classify_lambda):
            try:
                reports.append(classify_point(curve, bp, lam))
            except A2ConditionFailed:
                pass
    if degenerate:
        center = eq.slice_points(wig).mean(axis=0)
        reports.append(
            SingularityReport(center, branches[0].pair(curve, 0), 0.5,
                              LABEL_FULLY_DEGENERATE, {"kind": "degenerate_slice"})
        )
    return GcsDecomposition(
        curve, wig, wcusps, css_lines, ccusps, axes, crim, reports, degenerate
    )
