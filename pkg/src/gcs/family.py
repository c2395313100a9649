"""Generating families built from polynomial jets.

A family spec holds two jets S+ (in q_1..q_m) and S- (in q_1..q_k,
p_(k+1)..p_m) plus lambda, and produces the polynomial

  F(p, q, alpha, beta) = 2 lam^2 S+((q + beta) / 2 lam)
                       - 2 (1-lam)^2 S-((q_[k] - beta_[k], p_>k - alpha_>k) / 2(1-lam))
                       - sum_{i<=k} p_i beta_i
                       + 1/2 sum_{j>k} (q_j alpha_j - p_j beta_j - alpha_j beta_j - p_j q_j)

whose fiberwise critical data reproduces the chord relation: the caustic of
the auxiliary-variable family is the lambda-slice, and the corank of its
Hessian equals the parallelism degree.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateLambda, FitWindowTooSmall, NewtonDivergence,
                     SchemaError, UnrealizableAtDimension)

MAX_JET_DEGREE = 6


# -- sparse multivariate polynomials ------------------------------------------


class Poly:
    """Sparse polynomial: {exponent tuple: coefficient}, fixed variable count."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms=None):
        self.n = n
        self.terms = {}
        if terms:
            for e, c in terms.items():
                if c != 0.0:
                    self.terms[tuple(e)] = self.terms.get(tuple(e), 0.0) + float(c)

    @staticmethod
    def zero(n):
        return Poly(n)

    @staticmethod
    def const(n, c):
        return Poly(n, {tuple([0] * n): c})

    @staticmethod
    def var(n, i):
        e = [0] * n
        e[i] = 1
        return Poly(n, {tuple(e): 1.0})

    def copy(self):
        p = Poly(self.n)
        p.terms = dict(self.terms)
        return p

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Poly.const(self.n, other)
        out = self.copy()
        for e, c in other.terms.items():
            out.terms[e] = out.terms.get(e, 0.0) + c
            if out.terms[e] == 0.0:
                del out.terms[e]
        return out

    def __sub__(self, other):
        return self + (other * -1.0 if isinstance(other, Poly) else -other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            out = Poly(self.n)
            if other != 0.0:
                out.terms = {e: c * other for e, c in self.terms.items()}
            return out
        out = Poly(self.n)
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out.terms[e] = out.terms.get(e, 0.0) + c1 * c2
        out.terms = {e: c for e, c in out.terms.items() if c != 0.0}
        return out

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(self.n, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def diff(self, i: int):
        out = Poly(self.n)
        for e, c in self.terms.items():
            if e[i] > 0:
                ne = list(e)
                ne[i] -= 1
                out.terms[tuple(ne)] = out.terms.get(tuple(ne), 0.0) + c * e[i]
        return out

    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def eval(self, pts):
        """pts shape (..., n); returns (...)."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for e, c in self.terms.items():
            term = np.full(pts.shape[:-1], c)
            for i, k in enumerate(e):
                if k:
                    term = term * pts[..., i] ** k
            out = out + term
        return out if out.shape else float(out)

    def compose_affine(self, rows, consts, n_new):
        """Substitute var_i -> consts[i] + sum_j rows[i][j] X_j."""
        lin = []
        for i in range(self.n):
            t = {tuple([0] * n_new): float(consts[i])}
            for j, a in enumerate(rows[i]):
                if a != 0.0:
                    e = [0] * n_new
                    e[j] = 1
                    t[tuple(e)] = float(a)
            lin.append(Poly(n_new, t))
        pow_cache = [{0: Poly.const(n_new, 1.0)} for _ in range(self.n)]

        def lpow(i, k):
            if k not in pow_cache[i]:
                pow_cache[i][k] = lpow(i, k - 1) * lin[i]
            return pow_cache[i][k]

        out = Poly.zero(n_new)
        for e, c in self.terms.items():
            term = Poly.const(n_new, c)
            for i, k in enumerate(e):
                if k:
                    term = term * lpow(i, k)
            out = out + term
        return out

    def __repr__(self):
        return f"Poly(n={self.n}, {len(self.terms)} terms)"


# -- jets and specs ------------------------------------------------------------


@dataclass
class PolyJet:
    """Polynomial jet in m variables around a base point."""

    m: int
    poly: Poly
    base: np.ndarray
    adapted: bool = False

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        if self.poly.n != self.m:
            raise SchemaError("jet polynomial variable count mismatch")
        if self.poly.degree() > MAX_JET_DEGREE:
            raise SchemaError(f"jet degree exceeds {MAX_JET_DEGREE}")
        if self.adapted:
            H = jet_hessian(self)
            if np.abs(H).max() > 1e-8 * max(1.0, _coeff_scale(self.poly)):
                raise SchemaError("adapted jet must have vanishing Hessian at base")

    @staticmethod
    def from_terms(m, terms, base=None, adapted=False):
        return PolyJet(m, Poly(m, terms), np.zeros(m) if base is None else base, adapted)


def _coeff_scale(poly):
    return max((abs(c) for c in poly.terms.values()), default=1.0)


def jet_hessian(jet: PolyJet):
    H = np.zeros((jet.m, jet.m))
    for i in range(jet.m):
        for j in range(jet.m):
            H[i, j] = jet.poly.diff(i).diff(j).eval(jet.base)
    return H


@dataclass
class FamilySpec:
    m: int
    k: int
    lam: float
    splus: PolyJet
    sminus: PolyJet
    label: str | None = None
    sign: int = +1

    def __post_init__(self):
        if self.lam in (0.0, 1.0):
            raise DegenerateLambda("family lambda must avoid {0, 1}")
        if not (1 <= self.k <= self.m):
            raise SchemaError("need 1 <= k <= m")
        if self.splus.m != self.m or self.sminus.m != self.m:
            raise SchemaError("jets must have m variables")

    @property
    def n_kappa(self):
        return 2 * self.m - self.k


def variable_names(spec: FamilySpec):
    m, k = spec.m, spec.k
    names = [f"p{i+1}" for i in range(m)] + [f"q{i+1}" for i in range(m)]
    names += [f"a{j+1}" for j in range(k, m)]
    names += [f"b{i+1}" for i in range(m)]
    return names


def build_family(spec: FamilySpec, lam: float | None = None) -> Poly:
    """The family polynomial in variables (p, q, alpha_(>k), beta)."""
    lam = spec.lam if lam is None else lam
    if lam in (0.0, 1.0):
        raise DegenerateLambda("lambda must avoid {0, 1}")
    m, k = spec.m, spec.k
    nv = 2 * m + (2 * m - k)
    ip = list(range(m))
    iq = list(range(m, 2 * m))
    ia = {j: 2 * m + (j - k) for j in range(k, m)}  # alpha_{j+1}, j = k..m-1
    ib = list(range(2 * m + (m - k), nv))

    # S+((q + beta) / 2 lam)
    rows = np.zeros((m, nv))
    consts = np.zeros(m)
    for i in range(m):
        rows[i, iq[i]] = 1.0 / (2.0 * lam)
        rows[i, ib[i]] = 1.0 / (2.0 * lam)
    Fp = spec.splus.poly.compose_affine(rows, consts, nv) * (2.0 * lam**2)

    # S-((q_[k] - beta_[k], p_(>k) - alpha_(>k)) / 2 (1 - lam))
    rows = np.zeros((m, nv))
    for i in range(k):
        rows[i, iq[i]] = 1.0 / (2.0 * (1.0 - lam))
        rows[i, ib[i]] = -1.0 / (2.0 * (1.0 - lam))
    for j in range(k, m):
        rows[j, ip[j]] = 1.0 / (2.0 * (1.0 - lam))
        rows[j, ia[j]] = -1.0 / (2.0 * (1.0 - lam))
    Fm = spec.sminus.poly.compose_affine(rows, np.zeros(m), nv) * (2.0 * (1.0 - lam) ** 2)

    F = Fp - Fm
    for i in range(k):
        F = F - Poly.var(nv, ip[i]) * Poly.var(nv, ib[i])
    for j in range(k, m):
        qj, aj = Poly.var(nv, iq[j]), Poly.var(nv, ia[j])
        pj, bj = Poly.var(nv, ip[j]), Poly.var(nv, ib[j])
        F = F + 0.5 * (qj * aj - pj * bj - aj * bj - pj * qj)
    return F


def family_eval(spec: FamilySpec, x, kappa, lam: float | None = None):
    """F at x = (p, q) in R^2m and auxiliary kappa in R^(2m-k)."""
    F = build_family(spec, lam)
    z = np.concatenate([np.asarray(x, float), np.asarray(kappa, float)], axis=-1)
    return F.eval(z)


def family_derivative(spec: FamilySpec, multi_index, x, kappa, lam=None):
    """Exact partial derivative; multi_index over (p, q, alpha, beta)."""
    F = build_family(spec, lam)
    for i, k in enumerate(multi_index):
        for _ in range(k):
            F = F.diff(i)
    z = np.concatenate([np.asarray(x, float), np.asarray(kappa, float)], axis=-1)
    return F.eval(z)


def kappa_gradient_polys(F: Poly, spec: FamilySpec):
    nv = F.n
    nk = spec.n_kappa
    return [F.diff(nv - nk + i) for i in range(nk)]


def kappa_hessian_polys(F: Poly, spec: FamilySpec):
    nv = F.n
    nk = spec.n_kappa
    return [[F.diff(nv - nk + i).diff(nv - nk + j) for j in range(nk)] for i in range(nk)]


def kappa_hessian(spec: FamilySpec, x, kappa, lam=None):
    F = build_family(spec, lam)
    H = kappa_hessian_polys(F, spec)
    z = np.concatenate([np.asarray(x, float), np.asarray(kappa, float)])
    return np.array([[H[i][j].eval(z) for j in range(spec.n_kappa)] for i in range(spec.n_kappa)])


def corank(spec: FamilySpec, x_base=None, kappa_base=None) -> int:
    """Nullity of the auxiliary Hessian at the base point."""
    x = np.zeros(2 * spec.m) if x_base is None else np.asarray(x_base, float)
    kp = np.zeros(spec.n_kappa) if kappa_base is None else np.asarray(kappa_base, float)
    H = kappa_hessian(spec, x, kp)
    sv = np.linalg.svd(H, compute_uv=False)
    scale = sv.max() if sv.size and sv.max() > 0 else 1.0
    return int(np.sum(sv < 1e-10 * scale))


# -- the catalogue of realizations ---------------------------------------------

REALIZABLE = ("A2", "A3", "A4", "A5", "D4plus", "D4minus", "D5")


def realization_spec(label: str, m: int, lam: float, sign: int = +1) -> FamilySpec:
    """Explicit cubic-and-up jets realizing the requested caustic germ.

    A_2, A_3 need m >= 1 (k = 1); A_4, A_5 need m = 2 (k = 1);
    D_4+-, D_5 need m = 2 (k = 2).  E-type germs need m >= 3: rejected.
    """
    if lam in (0.0, 1.0):
        raise DegenerateLambda("lambda must avoid {0, 1}")
    if label.startswith("E"):
        raise UnrealizableAtDimension(f"{label} needs m >= 3 auxiliary directions")
    if label not in REALIZABLE:
        raise SchemaError(f"unknown label {label!r}")
    if label in ("D4plus", "D4minus"):
        sign = +1 if label == "D4plus" else -1

    def _acc(d, e, c):
        d[e] = d.get(e, 0.0) + c

    def a_family(j: int):
        # A_j: 1-parallel germs; S+ = lam q1^3 + q1^(j+1) + coupling terms
        need_m = 1 if j <= 3 else 2
        if m < need_m or (j >= 4 and m != 2):
            raise UnrealizableAtDimension(f"A{j} needs m = {need_m}")
        ell = j // 2 if j % 2 == 0 else (j - 1) // 2
        sp = {}
        _acc(sp, _e(m, (3,)), lam)
        _acc(sp, _e(m, (j + 1,)), 1.0)
        for i in range(2, ell + 1):
            e = [0] * m
            e[0] = 2 * i - 1
            e[i - 1] += 1
            _acc(sp, tuple(e), 1.0)
        sm = {}
        _acc(sm, _e(m, (3,)), -(1.0 - lam))
        hi = ell - 1 if j % 2 == 0 else ell
        for i in range(2, hi + 1):
            e = [0] * m
            e[0] = 2 * (ell - i + 1) if j % 2 == 0 else 2 * (ell - i + 2)
            e[i - 1] += 1  # p_i slot of the S- argument list
            _acc(sm, tuple(e), 1.0)
        return sp, sm, 1

    if label == "A2":
        sp, sm, k = a_family(2)
    elif label == "A3":
        sp, sm, k = a_family(3)
    elif label == "A4":
        sp, sm, k = a_family(4)
    elif label == "A5":
        sp, sm, k = a_family(5)
    else:
        if m != 2:
            raise UnrealizableAtDimension(f"{label} needs m = 2")
        k = 2
        deg = 3 if label.startswith("D4") else 4
        sp = {}
        for e, c in (
            (_e(m, (3, 0)), lam),
            (_e(m, (2, 1)), 1.0),
            (_e(m, (0, deg)), float(sign)),
            (_e(m, (0, 3)), lam),
        ):
            sp[e] = sp.get(e, 0.0) + c
        sm = {
            _e(m, (3, 0)): -(1.0 - lam),
            _e(m, (0, 3)): -(1.0 - lam),
        }
    return FamilySpec(
        m=m,
        k=k,
        lam=lam,
        splus=PolyJet.from_terms(m, sp, adapted=True),
        sminus=PolyJet.from_terms(m, sm, adapted=True),
        label=label,
        sign=sign,
    )


def _e(m, exps):
    e = [0] * m
    for i, v in enumerate(exps):
        e[i] = v
    return tuple(e)


# -- caustic sampling ------------------------------------------------------------


def _graph_points(spec: FamilySpec, w):
    """Map graph parameters w = (q+, w-) to (x+, x-) via the jet graphs.

    x+ = (grad S+(q+), q+); x- has p_i = dS-/dq_i (i <= k) and
    q_l = -dS-/dp_l (l > k) over the free coordinates w-.
    """
    m, k = spec.m, spec.k
    w = np.asarray(w, dtype=float)
    qp = w[..., :m]
    wm = w[..., m:]
    gp = np.stack([spec.splus.poly.diff(i).eval(qp) for i in range(m)], axis=-1)
    gm = np.stack([spec.sminus.poly.diff(i).eval(wm) for i in range(m)], axis=-1)
    pp = gp
    pm = np.concatenate([gm[..., :k], wm[..., k:]], axis=-1)
    qm = np.concatenate([wm[..., :k], -gm[..., k:]], axis=-1)
    xp = np.concatenate([pp, qp], axis=-1)
    xm = np.concatenate([pm, qm], axis=-1)
    return xp, xm


def _chord_coords(spec: FamilySpec, w, lam=None):
    lam = spec.lam if lam is None else lam
    xp, xm = _graph_points(spec, w)
    x = lam * xp + (1.0 - lam) * xm
    xdot = lam * xp - (1.0 - lam) * xm
    m, k = spec.m, spec.k
    pdot, qdot = xdot[..., :m], xdot[..., m:]
    kappa = np.concatenate([pdot[..., k:], qdot], axis=-1)
    return x, kappa


def _hessian_det_on_w(spec: FamilySpec, W, lam=None):
    F = build_family(spec, lam)
    Hp = kappa_hessian_polys(F, spec)
    x, kappa = _chord_coords(spec, W, lam)
    z = np.concatenate([x, kappa], axis=-1)
    n = spec.n_kappa
    H = np.empty(W.shape[:-1] + (n, n))
    for i in range(n):
        for j in range(n):
            H[..., i, j] = Hp[i][j].eval(z)
    return np.linalg.det(H)


def realized_caustic(spec: FamilySpec, grid_n: int = 201, window: float = 1.0,
                     lam: float | None = None) -> np.ndarray:
    """Caustic sample cloud in R^2m.

    Scans the 2m-dimensional graph-parameter box, finds sign changes of the
    auxiliary Hessian determinant along grid edges, bisects them, and maps
    the roots through the lambda-point. Practical for m <= 2.
    """
    m = spec.m
    dim = 2 * m
    if dim > 4:
        raise SchemaError("caustic scan supports m <= 2")
    if dim == 4 and grid_n > 61:
        grid_n = 41  # keep the 4-D scan tractable
    axes = [np.linspace(-window, window, grid_n)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    W = np.stack(mesh, axis=-1)
    D = _hessian_det_on_w(spec, W, lam)
    roots = []
    for ax in range(dim):
        sl_lo = [slice(None)] * dim
        sl_hi = [slice(None)] * dim
        sl_lo[ax] = slice(0, -1)
        sl_hi[ax] = slice(1, None)
        mask = D[tuple(sl_lo)] * D[tuple(sl_hi)] < 0.0
        idx = np.nonzero(mask)
        if idx[0].size == 0:
            continue
        lo = np.stack([mesh[d][tuple(sl_lo)][idx] for d in range(dim)], axis=-1)
        step = np.zeros(dim)
        step[ax] = 2.0 * window / (grid_n - 1)

        a = np.zeros(lo.shape[0])
        b = np.ones(lo.shape[0])
        fa = _hessian_det_on_w(spec, lo, lam)
        for _ in range(40):
            mid = 0.5 * (a + b)
            fm = _hessian_det_on_w(spec, lo + mid[:, None] * step, lam)
            left = fa * fm <= 0.0
            b = np.where(left, mid, b)
            a = np.where(left, a, mid)
            fa = np.where(left, fa, fm)
        roots.append(lo + (0.5 * (a + b))[:, None] * step)
    if not roots:
        return np.zeros((0, dim))
    Wr = np.concatenate(roots, axis=0)
    x, _ = _chord_coords(spec, Wr, lam)
    return x


def caustic_section(spec: FamilySpec, q_fixed, grid_n: int = 401, window: float = 1.0,
                    lam: float | None = None):
    """Planar p-section of an m = 2, k = 2 caustic at fixed base coordinates q.

    Fixing q in the slice determines q- from q+, so the section is a 2-D scan
    over q+.  Returns the section points (p1, p2) ordered along the contour.
    """
    if spec.m != 2 or spec.k != 2:
        raise SchemaError("caustic_section needs m = 2, k = 2")
    lam_ = spec.lam if lam is None else lam
    q0 = np.asarray(q_fixed, dtype=float)
    axes = [np.linspace(-window, window, grid_n)] * 2
    QP = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    QM = (q0 - lam_ * QP) / (1.0 - lam_)
    W = np.concatenate([QP, QM], axis=-1)
    D = _hessian_det_on_w(spec, W, lam)

    # contour the zero set of D on the (q+1, q+2) grid
    try:
        from skimage import measure

        contours = measure.find_contours(D, 0.0)
    except ImportError:  # fallback: edge bisection, unordered
        contours = None
    scale = 2.0 * window / (grid_n - 1)
    sections = []
    if contours is not None:
        for c in contours:
            qp = -window + c * scale
            qm = (q0 - lam_ * qp) / (1.0 - lam_)
            w = np.concatenate([qp, qm], axis=-1)
            x, _ = _chord_coords(spec, w, lam)
            sections.append(x[:, :2])
        return sections
    raise SchemaError("scikit-image required for ordered sections")


# -- local jets fitted to a curve pair -----------------------------------------


@dataclass
class PairFrame:
    """Affine frame with the q-axis along the pair's common tangent direction.

    world -> frame:  (q, p) = R (x - origin); R is a rotation, so the frame
    change is affine symplectic for dp ^ dq.
    """

    origin: np.ndarray
    rot: np.ndarray  # rows: (q-axis direction, p-axis direction)

    def to_frame(self, xy):
        xy = np.asarray(xy, dtype=float)
        return (xy - self.origin) @ self.rot.T

    def to_world(self, qp):
        qp = np.asarray(qp, dtype=float)
        return qp @ self.rot + self.origin


@dataclass
class FittedFamily:
    """FamilySpec for a curve pair together with its frame and base data."""

    spec: FamilySpec
    frame: PairFrame
    q_plus: float
    q_minus: float
    pair: object

    def x_base(self, lam=None):
        lam = self.spec.lam if lam is None else lam
        a = self.frame.to_frame(_pair_points(self)[0])
        b = self.frame.to_frame(_pair_points(self)[1])
        qp = lam * a + (1.0 - lam) * b
        return np.array([qp[1], qp[0]])  # (p, q)

    def kappa_base(self, lam=None):
        lam = self.spec.lam if lam is None else lam
        a = self.frame.to_frame(_pair_points(self)[0])
        b = self.frame.to_frame(_pair_points(self)[1])
        qdot = lam * a[0] - (1.0 - lam) * b[0]
        return np.array([qdot])


def _pair_points(fit: FittedFamily):
    return fit._a_plus, fit._a_minus


FIT_WINDOW_FRACTION = 1.0 / 20.0  # arc per side, as a fraction of total length
FIT_ROTATION_CAP = 0.04  # max tangent rotation inside the window (radians)
FIT_NODES = 48
FIT_DEGREE = 5


def _curve_length(curve, n=2048):
    ts = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return float(np.mean(curve.speed(ts)) * 2.0 * np.pi)


def _fit_graph(curve, frame, u0, du, degree):
    """Constrained quintic graph fit over the window u0 +- du.

    G(q0) = p0 and G'(q0) = 0 are imposed exactly; free coefficients are
    fitted in the scaled variable z = (q - q0)/w for conditioning.
    Returns (coefficients c2..cdeg, q0, p0).
    """
    cheb = np.cos(np.pi * (np.arange(FIT_NODES) + 0.5) / FIT_NODES)
    us = u0 + du * cheb
    qp = frame.to_frame(curve.point(us))
    q, p = qp[:, 0], qp[:, 1]
    base = frame.to_frame(curve.point(u0))
    q0, p0 = float(base[0]), float(base[1])
    qs = q[np.argsort(us)]
    if not (np.all(np.diff(qs) > 0) or np.all(np.diff(qs) < 0)):
        raise FitWindowTooSmall("curve is not a graph over the tangent in the window")
    w = np.abs(q - q0).max()
    z = (q - q0) / w
    Amat = np.stack([z**j for j in range(2, degree + 1)], axis=1)
    coef_z, *_ = np.linalg.lstsq(Amat, p - p0, rcond=None)
    return [c / w**j for j, c in zip(range(2, degree + 1), coef_z)], q0, p0


def fit_local_jets(curve, pair, lam: float = 0.5, degree: int = FIT_DEGREE) -> FittedFamily:
    """Least-squares graph jets p = G(q) for both pair endpoints.

    Chebyshev-sampled windows of at most 1/20 of the total length per side,
    shrunk so the tangent turns by no more than FIT_ROTATION_CAP inside the
    window (keeps the quintic truncation error below the 1e-6 derivative
    contract); the value and slope at each base point are constrained
    exactly, so the fitted jets carry d2 S = 0 at their bases.
    """
    d = curve.tangent(pair.s)
    d = d / np.linalg.norm(d)
    n = np.array([-d[1], d[0]])
    a_plus = curve.point(pair.s)
    a_minus = curve.point(pair.t)
    origin = 0.5 * (a_plus + a_minus)
    frame = PairFrame(origin, np.stack([d, n]))

    L = _curve_length(curve)
    polys = []
    q_bases = []
    for u0 in (pair.s, pair.t):
        speed0 = float(curve.speed(u0))
        du = (L * FIT_WINDOW_FRACTION) / speed0
        turn = abs(float(curve.curvature(u0))) * speed0
        if turn > 0:
            du = min(du, FIT_ROTATION_CAP / turn)
        coef, q0, p0 = _fit_graph(curve, frame, u0, du, degree)
        # Richardson check on the quadratic coefficient (the curvature):
        # halve the window until 2*c2 stabilizes (truncation is O(w^4))
        for _ in range(12):
            coef_h, q0, p0 = _fit_graph(curve, frame, u0, du / 2.0, degree)
            scale = max(1.0, abs(2.0 * coef_h[0]))
            if abs(coef[0] - coef_h[0]) * 2.0 < 5e-8 * scale:
                coef = coef_h
                break
            du /= 2.0
            coef = coef_h
        # S = antiderivative of G (constant dropped), in centered q
        s_terms = {(1,): p0}
        for j, c in zip(range(2, degree + 1), coef):
            s_terms[(j + 1,)] = c / (j + 1.0)
        centered = Poly(1, s_terms)
        # recenter to the global frame coordinate: q -> (q - q0)
        poly = centered.compose_affine(np.array([[1.0]]), np.array([-q0]), 1)
        polys.append(poly)
        q_bases.append(q0)

    splus = PolyJet(1, polys[0], np.array([q_bases[0]]))
    sminus = PolyJet(1, polys[1], np.array([q_bases[1]]))
    spec = FamilySpec(1, 1, lam, splus, sminus, label="fitted")
    fit = FittedFamily(spec, frame, q_bases[0], q_bases[1], pair)
    fit._a_plus = a_plus
    fit._a_minus = a_minus
    return fit


def jet_third_derivative(jet: PolyJet) -> float:
    """S''' at the jet base (m = 1 jets)."""
    return float(jet.poly.diff(0).diff(0).diff(0).eval(jet.base))


# -- membership in the big front -----------------------------------------------


def wl_membership(fit: FittedFamily, x_world, lam: float | None = None,
                  max_iter: int = 60):
    """Residual pair (gradient, Hessian determinant) of the front conditions.

    Gauss-Newton over the auxiliary variables from the chord seed; residuals
    are scale-free (lengths divided by the chord scale).  Membership holds
    when both residuals are < 1e-6.
    """
    spec = fit.spec
    lam = spec.lam if lam is None else lam
    if lam in (0.0, 1.0):
        raise DegenerateLambda("lambda must avoid {0, 1}")
    qp = fit.frame.to_frame(np.asarray(x_world, dtype=float))
    x = np.array([qp[1], qp[0]])  # (p, q)
    F = build_family(spec, lam)
    grads = kappa_gradient_polys(F, spec)
    hess = kappa_hessian_polys(F, spec)
    n = spec.n_kappa
    det_poly = hess[0][0] if n == 1 else None

    def residuals(kappa):
        z = np.concatenate([x, kappa])
        g = np.array([gp.eval(z) for gp in grads])
        H = np.array([[hess[i][j].eval(z) for j in range(n)] for i in range(n)])
        return g, float(np.linalg.det(H)), H

    scale = max(abs(fit.q_plus - fit.q_minus), 1e-9)
    kappa = fit.kappa_base(lam) if n == 1 else np.zeros(n)
    best = np.inf
    for _ in range(max_iter):
        g, det, H = residuals(kappa)
        r = np.concatenate([g / scale, [det]])
        nr = float(np.linalg.norm(r))
        if nr >= best - 1e-16 and nr < 1e-10:
            break
        best = min(best, nr)
        # Jacobian rows: dg/dkappa = H; d(det)/dkappa via adjugate
        ddet = np.empty(n)
        z = np.concatenate([x, kappa])
        adj = np.linalg.inv(H) * np.linalg.det(H) if abs(np.linalg.det(H)) > 1e-300 else None
        for a in range(n):
            dH = np.array(
                [[hess[i][j].diff(2 * spec.m + a).eval(z) for j in range(n)] for i in range(n)]
            )
            if adj is not None:
                ddet[a] = float(np.trace(adj @ dH))
            else:
                ddet[a] = float(np.trace(dH)) if n == 1 else 0.0
        J = np.vstack([H / scale, ddet])
        try:
            step, *_ = np.linalg.lstsq(J, r, rcond=None)
        except np.linalg.LinAlgError:
            raise NewtonDivergence("membership solve failed")
        if not np.all(np.isfinite(step)):
            raise NewtonDivergence("membership solve produced non-finite step")
        # damped step, bounded by the fit window scale
        limit = 10.0 * scale
        nstep = np.linalg.norm(step)
        if nstep > limit:
            step = step * (limit / nstep)
        kappa = kappa - step
        if np.linalg.norm(step) < 1e-14 * max(scale, 1.0):
            break
    g, det, _ = residuals(kappa)
    r_grad = float(np.abs(g).max() / scale)
    r_det = abs(det)
    return r_grad, r_det


def membership_test(fit: FittedFamily, x_world, lam=None, tol: float = 1e-6) -> bool:
    try:
        r_grad, r_det = wl_membership(fit, x_world, lam)
    except NewtonDivergence:
        return False
    return r_grad < tol and r_det < tol
