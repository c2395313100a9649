"""Deterministic artifact I/O: curve/family specs, CSV tables, layered SVG.

All floats are written with 9 significant digits; identical inputs produce
byte-identical files.  Writes are atomic (temp file + rename).
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .curves import PlaneCurve
from .errors import EmptyScene, SchemaError
from .family import FamilySpec, Poly, PolyJet

FLOAT_FMT = "%.9g"

LAYER_STYLES = {
    "curve": "stroke:#101010;stroke-width:0.9",
    "equidistant": "stroke:#708090;stroke-width:0.7",
    "wigner": "stroke:#c22040;stroke-width:0.9",
    "css": "stroke:#2050c2;stroke-width:0.9",
    "middle_axes": "stroke:#d88020;stroke-width:0.8",
    "criminant": "stroke:#20a060;stroke-width:0.8",
    "markers": "fill:#c22040;stroke:none",
    "default": "stroke:#404040;stroke-width:0.7",
}


def fmt(v: float) -> str:
    out = FLOAT_FMT % float(v)
    return "0" if out in ("-0", "-0.0") else out


# -- spec parsing ---------------------------------------------------------------


def parse_curve_spec(text_or_dict) -> PlaneCurve:
    """Curve from its JSON spec; raises SchemaError / NonConvexSupport."""
    if isinstance(text_or_dict, (str, bytes)):
        try:
            data = json.loads(text_or_dict)
        except json.JSONDecodeError as ex:
            raise SchemaError(f"invalid JSON: {ex}") from ex
    else:
        data = text_or_dict
    if not isinstance(data, dict) or "form" not in data:
        raise SchemaError("curve spec must be an object with a 'form' key")
    form = data["form"]

    def arr(key, required=False):
        v = data.get(key, [])
        if required and key not in data:
            raise SchemaError(f"missing key {key!r}")
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) for x in v):
            raise SchemaError(f"{key!r} must be a list of numbers")
        return v

    if form == "fourier":
        return PlaneCurve.from_fourier(
            arr("x_cos", True), arr("x_sin"), arr("y_cos", True), arr("y_sin")
        )
    if form == "support":
        return PlaneCurve.from_support(arr("h_cos", True), arr("h_sin"))
    raise SchemaError(f"unknown form {form!r}")


def curve_spec_json(curve: PlaneCurve) -> str:
    return json.dumps(curve.to_spec())


def parse_family_spec(text_or_dict) -> FamilySpec:
    """FamilySpec from JSON; monomial keys are comma-separated exponents."""
    if isinstance(text_or_dict, (str, bytes)):
        try:
            data = json.loads(text_or_dict)
        except json.JSONDecodeError as ex:
            raise SchemaError(f"invalid JSON: {ex}") from ex
    else:
        data = text_or_dict
    try:
        m = int(data["m"])
        k = int(data["k"])
        lam = float(data["lambda"])
    except (KeyError, TypeError, ValueError) as ex:
        raise SchemaError(f"family spec needs m, k, lambda: {ex}") from ex

    def jet(key):
        terms = {}
        for mono, coeff in data.get(key, {}).items():
            try:
                e = tuple(int(x) for x in str(mono).split(","))
            except ValueError as ex:
                raise SchemaError(f"bad monomial key {mono!r}") from ex
            if len(e) != m:
                raise SchemaError(f"monomial {mono!r} has wrong arity for m={m}")
            terms[e] = float(coeff)
        return PolyJet(m, Poly(m, terms), np.zeros(m))

    return FamilySpec(m, k, lam, jet("Splus"), jet("Sminus"))


def family_spec_json(spec: FamilySpec) -> str:
    def jet_dict(jet):
        return {
            ",".join(str(x) for x in e): c
            for e, c in sorted(jet.poly.terms.items())
        }

    return json.dumps(
        {
            "m": spec.m,
            "k": spec.k,
            "lambda": spec.lam,
            "Splus": jet_dict(spec.splus),
            "Sminus": jet_dict(spec.sminus),
        }
    )


# -- atomic writes ----------------------------------------------------------------


def atomic_write(path: str, data: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_csv(header, rows, path: str):
    """header: list of column names; rows: iterable of tuples."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append("1" if v else "0")
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(fmt(v))
        lines.append(",".join(cells))
    atomic_write(path, "\n".join(lines) + "\n")


# -- scenes and SVG ----------------------------------------------------------------


@dataclass
class Layer:
    name: str
    polylines: list = field(default_factory=list)
    points: list = field(default_factory=list)
    style: str = "default"


@dataclass
class Scene:
    layers: list = field(default_factory=list)

    def add(self, name, polylines=(), points=(), style=None):
        self.layers.append(
            Layer(
                name,
                [np.asarray(p, dtype=float) for p in polylines if len(p)],
                [np.asarray(p, dtype=float) for p in points],
                style or (name if name in LAYER_STYLES else "default"),
            )
        )

    def bounding_box(self):
        pts = []
        for layer in self.layers:
            for p in layer.polylines:
                good = np.isfinite(p).all(axis=1)
                if good.any():
                    pts.append(p[good])
            for p in layer.points:
                pts.append(np.asarray(p, dtype=float)[None, :])
        if not pts:
            raise EmptyScene("scene has no geometry")
        allp = np.concatenate(pts, axis=0)
        return allp.min(axis=0), allp.max(axis=0)


def scene_from_curve(curve: PlaneCurve, n: int = 720) -> Scene:
    ts = np.linspace(0.0, 2.0 * np.pi, n + 1)
    scene = Scene()
    scene.add("curve", [curve.point(ts)])
    return scene


def emit_svg(scene: Scene, path: str, size: int = 640):
    lo, hi = scene.bounding_box()
    span = np.maximum(hi - lo, 1e-9)
    margin = 0.05 * float(span.max())
    lo = lo - margin
    hi = hi + margin
    w, h = hi - lo
    scale = size / max(w, h)
    ox = 0.5 * (size - w * scale)
    oy = 0.5 * (size - h * scale)

    def sx(x):
        return fmt((x - lo[0]) * scale + ox)

    def sy(y):
        return fmt(size - ((y - lo[1]) * scale + oy))

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>',
    ]
    marker_r = fmt(0.006 * size)
    for layer in scene.layers:
        style = LAYER_STYLES.get(layer.style, LAYER_STYLES["default"])
        parts.append(f'<g id="{layer.name}" style="fill:none;{style}">')
        for poly in layer.polylines:
            good = np.isfinite(poly).all(axis=1)
            runs = _finite_runs(good)
            for a, b in runs:
                seg = poly[a:b]
                if len(seg) < 2:
                    continue
                coords = " ".join(f"{sx(p[0])},{sy(p[1])}" for p in seg)
                parts.append(f'<polyline points="{coords}"/>')
        for p in layer.points:
            parts.append(
                f'<circle cx="{sx(p[0])}" cy="{sy(p[1])}" r="{marker_r}" '
                f'style="{LAYER_STYLES["markers"]}"/>'
            )
        parts.append("</g>")
    parts.append("</svg>")
    atomic_write(path, "\n".join(parts) + "\n")


def _finite_runs(mask):
    runs = []
    start = None
    for i, good in enumerate(mask):
        if good and start is None:
            start = i
        elif not good and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs
