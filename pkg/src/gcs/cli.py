"""Command-line driver.

Subcommands: equidistant, wigner, css, criminant, front, gcs, classify,
realize, check.  Exit codes: 0 ok, 2 schema error, 3 numerical failure,
4 degenerate-input short-circuit.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis as an
from . import equidistants as eq
from . import family as fam
from . import pairs as prs
from . import sceneio as io
from .errors import (BranchLinkFailure, DegenerateLambda, GcsError,
                     NewtonDivergence, NonConvexSupport, RegularityError,
                     SchemaError, UnrealizableAtDimension)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERIC = 3
EXIT_DEGENERATE = 4


def worker_count() -> int:
    """Parallelism cap from GCS_THREADS (informational; compute is vectorized)."""
    try:
        return max(1, int(os.environ.get("GCS_THREADS", "1")))
    except ValueError:
        return 1


def _load_curve(path):
    with open(path) as f:
        return io.parse_curve_spec(f.read())


def _parse_lambda_range(text):
    try:
        lo, hi, n = text.split(":")
        return float(lo), float(hi), int(n)
    except ValueError as ex:
        raise SchemaError(f"--lambda-range must be lo:hi:n, got {text!r}") from ex


def _branch_rows(curve, branches):
    for br in branches:
        A = curve.point(br.S)
        B = curve.point(br.T)
        gaps = np.where(prs.frame_sign(curve, br.S, br.T) > 0, 0.0, np.pi)
        for i in range(len(br)):
            yield (br.S[i], br.T[i], gaps[i], A[i, 0], A[i, 1], B[i, 0], B[i, 1])


def cmd_equidistant(args):
    curve = _load_curve(args.curve)
    branches = prs.find_parallel_branches(curve, args.grid)
    slices = eq.equidistant(curve, args.lam, branches)
    degenerate = all(s.fully_degenerate for s in slices)
    rows = []
    for s in slices:
        for i in range(len(s.points)):
            rows.append((s.S[i], s.T[i], s.points[i, 0], s.points[i, 1], s.regular[i]))
    if args.out:
        io.emit_csv(["s", "t", "x", "y", "regular"], rows, args.out)
    if args.svg:
        scene = io.scene_from_curve(curve)
        scene.add("equidistant", [s.points for s in slices])
        io.emit_svg(scene, args.svg)
    return EXIT_DEGENERATE if degenerate else EXIT_OK


def cmd_wigner(args):
    args.lam = 0.5
    return cmd_equidistant(args)


def cmd_css(args):
    curve = _load_curve(args.curve)
    branches = prs.find_parallel_branches(curve, args.grid)
    lines, cusps, _ = an.css_envelope(curve, branches)
    rows = []
    for poly in lines:
        for p in poly:
            if np.isfinite(p).all():
                rows.append((p[0], p[1]))
    if args.out:
        io.emit_csv(["x", "y"], rows, args.out)
    if args.svg:
        scene = io.scene_from_curve(curve)
        scene.add("css", lines, points=list(cusps.points()))
        io.emit_svg(scene, args.svg)
    return EXIT_DEGENERATE if cusps.degenerate else EXIT_OK


def cmd_criminant(args):
    curve = _load_curve(args.curve)
    branches = prs.find_parallel_branches(curve, args.grid)
    bits = prs.find_bitangent_pairs(curve, branches, args.grid)
    segs = an.criminant(curve, bits)
    rows = []
    for bp, seg in zip(bits, segs):
        rows.append((bp.s, bp.t, seg[0, 0], seg[0, 1], seg[1, 0], seg[1, 1]))
    if args.out:
        io.emit_csv(["s", "t", "x0", "y0", "x1", "y1"], rows, args.out)
    if args.svg:
        scene = io.scene_from_curve(curve)
        scene.add("criminant", segs)
        io.emit_svg(scene, args.svg)
    return EXIT_OK


def cmd_front(args):
    curve = _load_curve(args.curve)
    lo, hi, n = _parse_lambda_range(args.lambda_range)
    branches = prs.find_parallel_branches(curve, args.grid)
    samples = eq.extended_front(curve, lo, hi, n, branches, tangency_orders=args.tangency)
    rows = [
        (s.lam, s.point[0], s.point[1], s.fiber_tangency_order, s.regular)
        for s in samples
    ]
    if args.out:
        io.emit_csv(["lambda", "x", "y", "tangency_order", "regular"], rows, args.out)
    return EXIT_OK


def cmd_gcs(args):
    curve = _load_curve(args.curve)
    dec = an.assemble_gcs(curve, grid_n=args.grid)
    if args.svg:
        scene = io.scene_from_curve(curve)
        scene.add("wigner", [s.points for s in dec.wigner], points=list(dec.wigner_cusps.points()))
        scene.add("css", dec.css, points=list(dec.css_cusps.points()))
        scene.add("middle_axes", [a["points"] for a in dec.middle_axes])
        scene.add("criminant", dec.criminant)
        io.emit_svg(scene, args.svg)
    if args.json_report:
        lines = [json.dumps(r.to_json_dict()) for r in dec.reports]
        io.atomic_write(args.json_report, "\n".join(lines) + "\n")
    if args.out:
        rows = []
        for s in dec.wigner:
            for i in range(len(s.points)):
                rows.append(("wigner", s.points[i, 0], s.points[i, 1]))
        for poly in dec.css:
            for p in poly:
                if np.isfinite(p).all():
                    rows.append(("css", p[0], p[1]))
        for a in dec.middle_axes:
            for p in a["points"]:
                rows.append(("middle_axis", p[0], p[1]))
        for seg in dec.criminant:
            for p in seg:
                rows.append(("criminant", p[0], p[1]))
        io.emit_csv(["layer", "x", "y"], rows, args.out)
    return EXIT_DEGENERATE if dec.fully_degenerate else EXIT_OK


def cmd_classify(args):
    curve = _load_curve(args.curve)
    branches = prs.find_parallel_branches(curve, args.grid)
    bits = prs.find_bitangent_pairs(curve, branches, args.grid)
    reports = []
    for bp in bits:
        try:
            reports.append(an.classify_point(curve, bp, args.lam))
        except GcsError:
            pass
    if not bits:
        # no bitangents: report a sample of smooth midpoint-caustic points
        br = branches[0]
        for i in range(0, len(br), max(1, len(br) // 8)):
            pair = br.pair(curve, i)
            try:
                reports.append(an.classify_point(curve, pair, 0.5))
            except GcsError:
                pass
    payload = "\n".join(json.dumps(r.to_json_dict()) for r in reports) + "\n"
    if args.json_report:
        io.atomic_write(args.json_report, payload)
    else:
        sys.stdout.write(payload)
    return EXIT_OK


def cmd_realize(args):
    spec = fam.realization_spec(args.label, args.m, args.lam)
    cloud = fam.realized_caustic(spec, grid_n=args.grid, window=args.window)
    header = [f"x{i+1}" for i in range(2 * args.m)]
    if args.out:
        io.emit_csv(header, [tuple(r) for r in cloud], args.out)
    if args.svg and args.m == 1:
        scene = io.Scene()
        scene.add("equidistant", [], points=[p for p in cloud])
        io.emit_svg(scene, args.svg)
    return EXIT_OK


def cmd_check(args):
    """Quick invariant battery on stock shapes."""
    from .curves import ellipse, support_bump, unit_circle

    failures = []

    def check(name, ok):
        print(f"[check] {name}: {'ok' if ok else 'FAIL'}")
        if not ok:
            failures.append(name)

    rng = np.random.default_rng(0)
    res = max(
        eq.pullback_residual(l)
        for l in rng.uniform(-2.0, 3.0, 100)
        if abs(l) > 1e-3 and abs(l - 1.0) > 1e-3
    )
    check("chord-transform pullback identity", res < 1e-12)

    c = unit_circle()
    br = prs.find_parallel_branches(c, 128)
    pts = eq.slice_points(eq.equidistant(c, 0.25, br))
    radii = np.linalg.norm(pts, axis=1)
    check("circle scaling law", np.abs(radii - 0.5).max() < 1e-9)

    e = ellipse()
    bre = prs.find_parallel_branches(e, 128)
    w = eq.wigner_caustic(e, bre)
    spread = np.linalg.norm(eq.slice_points(w), axis=1).max()
    check("ellipse midpoint collapse", spread < 1e-8)

    s = support_bump()
    brs = prs.find_parallel_branches(s, 192)
    wc = an.wigner_cusps(s, brs)
    _, cc, _ = an.css_envelope(s, brs)
    check("bump cusp counts (3, 3)", (wc.count, cc.count) == (3, 3))
    check("convex criminant empty", not prs.find_bitangent_pairs(s, brs, 192))
    return EXIT_NUMERIC if failures else EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="gcs", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, lam=False, lam_range=False, svg=True, tangency=False):
        p.add_argument("--curve", required=True, help="curve spec JSON path")
        p.add_argument("--grid", type=int, default=256, help="pair-scan grid size")
        p.add_argument("--out", help="CSV output path")
        if svg:
            p.add_argument("--svg", help="SVG output path")
        if lam:
            p.add_argument("--lambda", dest="lam", type=float, default=0.5)
        if lam_range:
            p.add_argument("--lambda-range", dest="lambda_range", default="-0.5:1.5:201")
        if tangency:
            p.add_argument("--tangency", action="store_true",
                           help="annotate fiber tangency orders (slower)")

    p = sub.add_parser("equidistant", help="sample one lambda slice")
    common(p, lam=True)
    p.set_defaults(fn=cmd_equidistant)

    p = sub.add_parser("wigner", help="sample the midpoint (lambda = 1/2) slice")
    common(p)
    p.set_defaults(fn=cmd_wigner)

    p = sub.add_parser("css", help="envelope of chords with cusps")
    common(p)
    p.set_defaults(fn=cmd_css)

    p = sub.add_parser("criminant", help="bitangent chord segments")
    common(p)
    p.set_defaults(fn=cmd_criminant)

    p = sub.add_parser("front", help="stacked slices over a lambda range")
    common(p, lam_range=True, svg=False, tangency=True)
    p.set_defaults(fn=cmd_front)

    p = sub.add_parser("gcs", help="full decomposition: wigner + css + axes + criminant")
    common(p)
    p.add_argument("--json-report", help="JSON-lines report path")
    p.set_defaults(fn=cmd_gcs)

    p = sub.add_parser("classify", help="classify bitangent pairs at a lambda")
    common(p, lam=True, svg=False)
    p.add_argument("--json-report", help="JSON-lines report path")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("realize", help="sample a normal-form caustic")
    p.add_argument("--label", required=True, choices=list(fam.REALIZABLE))
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--window", type=float, default=0.5)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--svg", help="SVG output path (m = 1 only)")
    p.set_defaults(fn=cmd_realize)

    p = sub.add_parser("check", help="run the quick invariant battery")
    p.set_defaults(fn=cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        code = args.fn(args)
    except (SchemaError, NonConvexSupport, RegularityError,
            UnrealizableAtDimension, FileNotFoundError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_SCHEMA
    except (BranchLinkFailure, NewtonDivergence, DegenerateLambda, GcsError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_NUMERIC
    return code


if __name__ == "__main__":
    sys.exit(main())
