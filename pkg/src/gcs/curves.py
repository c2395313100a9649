"""Closed plane curves as finite trigonometric polynomials.

Two interchangeable forms:

* ``fourier``  -- X(t) = (x(t), y(t)), both coordinates trig polynomials;
* ``support``  -- convex curve from a support function h(theta):
      X(theta) = h * u + h' * u_perp,   u = (cos theta, sin theta).

All derivatives are taken term by term on the coefficient series, so jets up
to order 4 carry no differentiation noise.  For the support form

    X'      = rho * u_perp              with rho = h + h''  (curvature radius)
    kappa   = 1 / rho
    tangent angle = theta + pi/2        (exactly)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvexSupport, RegularityError, SchemaError
from .geom import cross2, wrap_angle
from .trig import TrigPoly

REGULARITY_FACTOR = 1e-8  # regularity_tol = factor * diameter
_VALIDATION_GRID = 2048
MAX_JET_ORDER = 4


@dataclass(frozen=True)
class CurveJet:
    """Point with derivatives (orders 1..n), curvature and tangent angle."""

    point: np.ndarray
    derivatives: list
    signed_curvature: float | None = None
    tangent_angle: float | None = None


class PlaneCurve:
    """Immutable closed curve; evaluation methods accept scalars or arrays."""

    def __init__(self, form, *, x=None, y=None, h=None, validate=True):
        if form not in ("fourier", "support"):
            raise SchemaError(f"unknown curve form {form!r}")
        self.form = form
        if form == "fourier":
            if x is None or y is None:
                raise SchemaError("fourier form needs x and y series")
            self._dx = [x]
            self._dy = [y]
            for _ in range(MAX_JET_ORDER + 1):
                self._dx.append(self._dx[-1].deriv())
                self._dy.append(self._dy[-1].deriv())
        else:
            if h is None:
                raise SchemaError("support form needs an h series")
            self.h = h
            # X^(n) = a_n * u + b_n * u_perp;  a' - b, b' + a recurrence
            a, b = h, h.deriv()
            self._ab = [(a, b)]
            for _ in range(MAX_JET_ORDER + 1):
                a, b = a.deriv() - b, b.deriv() + a
                self._ab.append((a, b))
        self._init_scales()
        if validate:
            self._validate()

    # -- construction -------------------------------------------------------

    @staticmethod
    def from_fourier(x_cos, x_sin, y_cos, y_sin) -> "PlaneCurve":
        return PlaneCurve("fourier", x=TrigPoly(x_cos, x_sin), y=TrigPoly(y_cos, y_sin))

    @staticmethod
    def from_support(h_cos, h_sin=()) -> "PlaneCurve":
        return PlaneCurve("support", h=TrigPoly(h_cos, h_sin))

    def _init_scales(self):
        ts = np.linspace(0.0, 2.0 * np.pi, _VALIDATION_GRID, endpoint=False)
        pts = self.point(ts)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        self.diameter = float(np.linalg.norm(hi - lo))
        if self.diameter == 0.0:
            raise SchemaError("curve degenerates to a point")
        sp = np.linalg.norm(self.deriv(ts, 1), axis=-1)
        self.max_speed = float(sp.max())
        self.min_speed = float(sp.min())
        self.max_curvature = float(np.abs(self.curvature(ts)).max())
        self.regularity_tol = REGULARITY_FACTOR * self.diameter

    def _validate(self):
        if self.min_speed <= self.regularity_tol:
            raise RegularityError(
                f"curve speed {self.min_speed:.3e} below tolerance {self.regularity_tol:.3e}"
            )
        if self.form == "support":
            ts = np.linspace(0.0, 2.0 * np.pi, _VALIDATION_GRID, endpoint=False)
            rho = self.curvature_radius(ts)
            if rho.min() <= 0.0:
                raise NonConvexSupport(
                    f"curvature radius h + h'' reaches {rho.min():.6f} <= 0"
                )

    # -- evaluation ----------------------------------------------------------

    def point(self, t):
        return self.deriv(t, 0)

    def deriv(self, t, order):
        """order-th derivative of the parametrization, shape (..., 2)."""
        t = np.asarray(t, dtype=float)
        if self.form == "fourier":
            out = np.stack([self._dx[order](t), self._dy[order](t)], axis=-1)
        else:
            a, b = self._ab[order]
            u = np.stack([np.cos(t), np.sin(t)], axis=-1)
            up = np.stack([-np.sin(t), np.cos(t)], axis=-1)
            out = np.asarray(a(t))[..., None] * u + np.asarray(b(t))[..., None] * up
        return out

    def tangent(self, t):
        return self.deriv(t, 1)

    def speed(self, t):
        return np.linalg.norm(self.deriv(t, 1), axis=-1)

    def curvature_radius(self, theta):
        """Support form only: rho = h + h''."""
        if self.form != "support":
            raise SchemaError("curvature_radius is defined for the support form")
        return np.asarray(self.h(theta)) + np.asarray(self.h.deriv(2)(theta))

    def curvature(self, t):
        """Signed curvature det(X', X'') / |X'|^3."""
        d1 = self.deriv(t, 1)
        d2 = self.deriv(t, 2)
        v = np.linalg.norm(d1, axis=-1)
        return cross2(d1, d2) / v**3

    def curvature_deriv(self, t):
        """d(kappa)/dt, analytic."""
        d1 = self.deriv(t, 1)
        d2 = self.deriv(t, 2)
        d3 = self.deriv(t, 3)
        v2 = np.einsum("...i,...i->...", d1, d1)
        v = np.sqrt(v2)
        c = cross2(d1, d2)
        return cross2(d1, d3) / v**3 - 3.0 * np.einsum("...i,...i->...", d1, d2) * c / v**5

    def tangent_angle(self, t):
        d1 = self.deriv(t, 1)
        return wrap_angle(np.arctan2(d1[..., 1], d1[..., 0]))

    def jet(self, t, order: int = 4) -> CurveJet:
        if order not in (1, 2, 3, 4):
            raise ValueError("jet order must be in 1..4")
        t = float(t)
        d1 = self.deriv(t, 1)
        if np.linalg.norm(d1) <= self.regularity_tol:
            raise RegularityError(f"speed below tolerance at t={t}")
        ders = [self.deriv(t, k) for k in range(1, order + 1)]
        curv = float(self.curvature(t)) if order >= 2 else None
        ang = float(self.tangent_angle(t))
        return CurveJet(self.point(t), ders, curv, ang)

    # -- transforms & predicates ---------------------------------------------

    def affine(self, A, b=(0.0, 0.0)) -> "PlaneCurve":
        """Image under x -> A x + b, returned in fourier form."""
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.form == "fourier":
            xc, xs = self._dx[0].c, self._dx[0].s
            yc, ys = self._dy[0].c, self._dy[0].s
        else:
            # X = h u + h' u_perp: collect cos/sin series of each coordinate
            xc, xs, yc, ys = _support_to_fourier(self.h)
        n = max(xc.size, yc.size)

        def pad(v):
            out = np.zeros(n)
            out[: v.size] = v
            return out

        xc, xs, yc, ys = map(pad, (xc, xs, yc, ys))
        nxc = A[0, 0] * xc + A[0, 1] * yc
        nxs = A[0, 0] * xs + A[0, 1] * ys
        nyc = A[1, 0] * xc + A[1, 1] * yc
        nys = A[1, 0] * xs + A[1, 1] * ys
        nxc[0] += b[0]
        nyc[0] += b[1]
        return PlaneCurve.from_fourier(nxc, nxs, nyc, nys)

    def to_fourier(self) -> "PlaneCurve":
        return self if self.form == "fourier" else self.affine(np.eye(2))

    def to_spec(self) -> dict:
        if self.form == "fourier":
            return {
                "form": "fourier",
                "x_cos": self._dx[0].c.tolist(),
                "x_sin": self._dx[0].s.tolist(),
                "y_cos": self._dy[0].c.tolist(),
                "y_sin": self._dy[0].s.tolist(),
            }
        return {
            "form": "support",
            "h_cos": self.h.c.tolist(),
            "h_sin": self.h.s.tolist(),
        }


def _support_to_fourier(h: TrigPoly):
    """Exact cos/sin series of X(theta) = h u + h' u_perp."""
    # Evaluate on a grid fine enough for an exact FFT of degree+1 harmonics.
    deg = h.degree + 1
    n = max(8, 4 * (deg + 1))
    ts = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    hp = h.deriv()
    u = np.stack([np.cos(ts), np.sin(ts)], axis=-1)
    up = np.stack([-np.sin(ts), np.cos(ts)], axis=-1)
    pts = np.asarray(h(ts))[:, None] * u + np.asarray(hp(ts))[:, None] * up
    out = []
    for k in range(2):
        f = np.fft.rfft(pts[:, k]) / n
        cos = 2.0 * f.real
        sin = -2.0 * f.imag
        cos[0] /= 2.0
        out.append((cos[: deg + 1], sin[: deg + 1]))
    (xc, xs), (yc, ys) = out
    return xc, xs, yc, ys


def antipodal_distance(curve: PlaneCurve, center, n: int = 512) -> float:
    """max_t distance from 2*center - X(t) to the curve."""
    c = np.asarray(center, dtype=float)
    ts = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    pts = curve.point(ts)
    targets = 2.0 * c - pts
    # coarse nearest parameter, then Newton on d/dt |X(t) - P|^2
    d = np.linalg.norm(targets[:, None, :] - pts[None, :, :], axis=-1)
    seed = ts[np.argmin(d, axis=1)]
    t = seed.copy()
    for _ in range(12):
        X = curve.point(t)
        d1 = curve.deriv(t, 1)
        d2 = curve.deriv(t, 2)
        r = X - targets
        g = np.einsum("ij,ij->i", r, d1)
        h = np.einsum("ij,ij->i", d1, d1) + np.einsum("ij,ij->i", r, d2)
        h = np.where(np.abs(h) < 1e-30, 1.0, h)
        t = t - g / h
    best = np.linalg.norm(curve.point(t) - targets, axis=-1)
    best = np.minimum(best, d.min(axis=1))
    return float(best.max())


def is_centrally_symmetric(curve: PlaneCurve, center, tol: float = 1e-9) -> bool:
    """True iff X(t) + X(t*) = 2*center for the antipodal matching t*."""
    return antipodal_distance(curve, center) < tol * max(1.0, curve.diameter)


# -- stock shapes used by tests, scripts and docs ----------------------------


def unit_circle(radius: float = 1.0) -> PlaneCurve:
    return PlaneCurve.from_fourier([0.0, radius], [0.0, 0.0], [0.0, 0.0], [0.0, radius])


def ellipse(a: float = 2.0, b: float = 1.0) -> PlaneCurve:
    return PlaneCurve.from_fourier([0.0, a], [0.0, 0.0], [0.0, 0.0], [0.0, b])


def support_bump(eps: float = 0.1, k: int = 3) -> PlaneCurve:
    """h = 1 + eps*cos(k theta); convex for |eps| (k^2-1) < 1."""
    hc = np.zeros(k + 1)
    hc[0] = 1.0
    hc[k] = eps
    return PlaneCurve.from_support(hc)


def peanut_curve(waist: float = 0.2, lobe: float = 0.8) -> PlaneCurve:
    """x = cos t, y = sin t (waist + lobe sin^2 t); nonconvex for waist < 3*lobe/8.

    y = (waist + 3*lobe/4) sin t - (lobe/4) sin 3t.
    """
    ys = [0.0, waist + 0.75 * lobe, 0.0, -0.25 * lobe]
    return PlaneCurve.from_fourier([0.0, 1.0], [0.0, 0.0], [0.0] * 4, ys)
