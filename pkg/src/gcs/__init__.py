"""Affine equidistants, midpoint caustics, centre symmetry sets and
normal-form caustic realizations of smooth closed plane curves."""

from .curves import PlaneCurve, ellipse, peanut_curve, support_bump, unit_circle

__all__ = [
    "PlaneCurve",
    "unit_circle",
    "ellipse",
    "support_bump",
    "peanut_curve",
]

__version__ = "0.1.0"
