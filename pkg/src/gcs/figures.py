"""Random convex curve ensembles and cusp-count coefficient searches."""
from __future__ import annotations

import numpy as np

from . import analysis as an
from . import pairs as prs
from .curves import PlaneCurve

MIN_RADIUS = 0.1  # smallest allowed curvature radius in generated ensembles


def random_convex_support(rng, harmonics=range(3, 10), amp: float = 0.3,
                          min_rho: float = MIN_RADIUS) -> PlaneCurve:
    """h = 1 + scaled random harmonics, rescaled to keep min(h + h'') > min_rho."""
    kmax = max(harmonics)
    hc = np.zeros(kmax + 1)
    hs = np.zeros(kmax + 1)
    for k in harmonics:
        hc[k] = rng.normal(0.0, amp / k**2)
        hs[k] = rng.normal(0.0, amp / k**2)
    # rho = 1 + sum (1 - k^2)(hc cos + hs sin); rescale the perturbation
    ts = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
    k = np.arange(kmax + 1)
    wt = 1.0 - k.astype(float) ** 2
    pert = np.cos(np.multiply.outer(ts, k)) @ (wt * hc) + np.sin(
        np.multiply.outer(ts, k)
    ) @ (wt * hs)
    worst = float(np.abs(pert).max())
    if worst > 0:
        target = (1.0 - min_rho) * 0.98
        if worst > target:
            f = target / worst
            hc *= f
            hs *= f
    hc[0] = 1.0
    return PlaneCurve.from_support(hc, hs)


def cusp_counts(curve: PlaneCurve, grid_n: int = 192, branches=None):
    """(midpoint-caustic cusps, envelope cusps) over unordered pairs."""
    if branches is None:
        branches = prs.find_parallel_branches(curve, grid_n)
    w = an.wigner_cusps(curve, branches)
    _, c, _ = an.css_envelope(curve, branches)
    return w.count, c.count, w, c


def search_cusp_profile(target, rng=None, max_tries: int = 400,
                        harmonics=(3, 5), grid_n: int = 192):
    """Random search for a convex curve whose (midpoint, envelope) cusp counts
    match `target`; returns (curve, tries)."""
    rng = np.random.default_rng(rng if not hasattr(rng, "normal") else None) if not hasattr(rng, "normal") else rng
    for attempt in range(1, max_tries + 1):
        curve = random_convex_support(rng, harmonics=harmonics, amp=0.6)
        try:
            wn, cn, _, _ = cusp_counts(curve, grid_n)
        except Exception:
            continue
        if (wn, cn) == tuple(target):
            return curve, attempt
    raise RuntimeError(f"no curve with cusp profile {target} in {max_tries} tries")


# -- engineered second-order contact ------------------------------------------


def inflection_bitangent_curve(asym: float = 0.1):
    """Closed curve whose bitangent chord has contact orders (1, 2).

    The x-axis is forced to be the chord: the y-series satisfies
    y(0) = y'(0) = y''(0) = 0 (the curve osculates its inflection at t = 0,
    order-2 contact) and y(pi) = y'(pi) = 0 with y''(pi) != 0 (plain
    tangency, order 1).  Both tangents point along +x, so (pi, 0) is a
    bitangent parallel pair by construction.  `asym` scales an extra cosine
    block (chosen in the kernel of the three t = 0 conditions and the two
    t = pi conditions) that breaks the remaining symmetry.
    Returns (curve, pair).
    """
    from .curves import PlaneCurve

    yc = [0.0, asym, -2.0 * asym / 3.0, -asym, 2.0 * asym / 3.0]
    ys = [0.0, 0.9, 0.0, -0.3, 0.0]
    curve = PlaneCurve.from_fourier([0.0, 1.0], [0.0, 0.0, 0.3], yc, ys)
    pair = prs.make_pair(curve, np.pi, 0.0)
    return curve, pair
