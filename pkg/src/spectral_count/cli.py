"""Command-line front end.

Exit status: 0 success (ambiguous counts included, flagged in the output),
1 malformed input, 2 numerical failure, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import bounds, collapse, families, fem, geometry
from .geometry import (GeometryError, Polygon, SolverError, is_convex, measures, rectangle, rectangle_sides,
                       regular_polygon)
from .spectra import (DIRICHLET, NEUMANN, BoxDomain, CompletenessError, DiskDomain, FlatModel, ResourceError,
                      count_from_spectra, count_N_box)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_RESOURCE = 0, 1, 2, 3


class InputError(ValueError):
    pass


# ---------------------------------------------------------------- builtin domains


@dataclass(frozen=True)
class Builtin:
    polygon: Callable[[], Polygon]
    analytic: object = None
    description: str = ""


def _lshape() -> Polygon:
    return Polygon.from_vertices([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])


BUILTINS: dict[str, Builtin] = {
    "unit-square": Builtin(lambda: rectangle(0, 0, 1, 1), BoxDomain((1.0, 1.0)), "[0,1]^2"),
    "unit-disk": Builtin(lambda: regular_polygon(512), DiskDomain(1.0), "unit disk (FEM uses the 512-gon)"),
    "unit-disk-512gon": Builtin(lambda: regular_polygon(512), None, "regular 512-gon inscribed in the unit circle"),
    "triangle-T": Builtin(lambda: Polygon.from_vertices([(-1, 0), (0, 0), (0, 1)]), None,
                          "right triangle (-1,0), (0,0), (0,1)"),
    "right-triangle": Builtin(lambda: Polygon.from_vertices([(0, 0), (1, 0), (0, 1)]), None, "legs 1, 1"),
    "equilateral": Builtin(lambda: regular_polygon(3, 1 / math.sqrt(3), phase=math.pi / 2), None,
                           "equilateral triangle of side 1"),
    "lshape": Builtin(_lshape, None, "L-shape of three unit squares"),
    "long-rectangle": Builtin(lambda: rectangle(0, 0, 1, 50), BoxDomain((1.0, 50.0)), "[0,1] x [0,50]"),
    "thin-triangle-5": Builtin(lambda: families.thin_triangle_example(5), None, "triangle with a thin tail, k = 5"),
    "rooms-3": Builtin(lambda: families.rooms_passages(3), None, "rooms and passages, k = 3"),
    "spiky-4": Builtin(lambda: families.spiky_disk(4), None, "spiky disk, k = 4"),
}


def load_domain(spec: str) -> tuple[Polygon, object]:
    """``builtin:NAME`` or a path to a polygon JSON file."""
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTINS:
            raise InputError(f"unknown builtin {name!r}; known: {', '.join(sorted(BUILTINS))}")
        b = BUILTINS[name]
        return b.polygon(), b.analytic
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"domain file {spec!r} not found")
    try:
        p = Polygon.from_json(path.read_text())
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"malformed domain JSON: {exc}") from exc
    sides = rectangle_sides(p)
    return p, (BoxDomain(sides) if sides else None)


def _analytic_or_box(p: Polygon, analytic):
    if analytic is not None:
        return analytic
    sides = rectangle_sides(p)
    if sides is None:
        raise InputError("analytic method needs a rectangle or the builtin unit disk")
    return BoxDomain(sides)


# ---------------------------------------------------------------- parsing helpers


def parse_ks(text: str) -> list[int]:
    """'1-4' or '1,2,5'."""
    try:
        if "-" in text and "," not in text:
            a, b = text.split("-")
            return list(range(int(a), int(b) + 1))
        return [int(t) for t in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad k range {text!r}") from exc


def parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError as exc:
        raise InputError(f"bad number list {text!r}") from exc


def parse_base(text: str) -> FlatModel:
    """point | circle:L | interval:L[:ends] | torus:L1xL2 | box:L1xL2[:ends]."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "point":
            return FlatModel("point")
        if kind == "circle":
            return FlatModel.circle(float(rest))
        parts = rest.split(":")
        lengths = tuple(float(x) for x in parts[0].split("x"))
        ends = parts[1] if len(parts) > 1 else "natural"
        if kind == "interval":
            return FlatModel.interval(lengths[0], ends)
        if kind == "torus":
            return FlatModel("torus", lengths)
        if kind == "box":
            return FlatModel("box", lengths, ends)
    except (ValueError, IndexError) as exc:
        raise InputError(f"bad base {text!r}: {exc}") from exc
    raise InputError(f"unknown base kind {kind!r}")


def parse_fiber(text: str):
    """interval[:L] | box:L1xL2 | disk[:R]; lengths default to 1."""
    kind, _, rest = text.partition(":")
    try:
        if kind in ("interval", "box"):
            return BoxDomain(tuple(float(x) for x in (rest or "1").split("x")))
        if kind == "disk":
            return DiskDomain(float(rest or 1.0))
    except ValueError as exc:
        raise InputError(f"bad fiber {text!r}: {exc}") from exc
    raise InputError(f"unknown fiber kind {kind!r}")


def _default_h(p: Polygon, h: float | None) -> float:
    if h is not None:
        if not h > 0:
            raise InputError("--h must be positive")
        return h
    return bounds.default_h(p)


def _emit(args, text_table: str, csv_text: str | None = None, json_obj=None) -> None:
    print(text_table)
    if args.output:
        fmt = args.format
        if fmt == "csv" and csv_text is None:
            fmt = "json"
        data = csv_text if fmt == "csv" else json.dumps(json_obj, indent=1, sort_keys=True, default=float) + "\n"
        Path(args.output).write_text(data)


# ---------------------------------------------------------------- subcommands


def cmd_spectrum(args) -> int:
    p, analytic = load_domain(args.domain)
    bc = args.bc
    if args.method == "analytic":
        dom = _analytic_or_box(p, analytic)
        cutoff = args.cutoff if args.cutoff is not None else 4 * dom.lambda1
        spec = dom.spectrum(bc, cutoff)
        _emit(args, spec.to_csv(), spec.to_csv(),
              {"values": spec.values.tolist(), "mult": spec.mult.tolist(), "cutoff": cutoff, "bc": bc})
        return EXIT_OK
    h = _default_h(p, args.h)
    mesh = fem.triangulate(p, h).with_tags(geometry.DIRICHLET if bc == DIRICHLET else geometry.NEUMANN)
    K, M, _ = fem.assemble(mesh)
    rep = fem.solve_eigs(K, M, min(args.k, K.shape[0]), bc, h, seed=args.seed)
    _emit(args, rep.values.to_csv(), rep.values.to_csv(), json.loads(rep.to_json()))
    return EXIT_OK


def _count(p, analytic, method, h, seed):
    if method == "analytic":
        dom = _analytic_or_box(p, analytic)
        if isinstance(dom, BoxDomain):
            return count_N_box(dom)
        lam = dom.lambda1
        return count_from_spectra(dom.spectrum(NEUMANN, 1.5 * lam), lam)
    return fem.count_N_fem(p, _default_h(p, h), seed=seed)


def cmd_count(args) -> int:
    p, analytic = load_domain(args.domain)
    res = _count(p, analytic, args.method, args.h, args.seed)
    obj = {"N": res.n_count, "lambda1": res.lambda1, "gap": res.gap, "ambiguous": res.ambiguous,
           "method": args.method}
    line = f"N = {res.n_count}  lambda1 = {res.lambda1:.10g}  gap = {res.gap:.4g}"
    if res.ambiguous:
        line += "  AMBIGUOUS (near-tie within error radius)"
    _emit(args, line, None, obj)
    return EXIT_OK


def cmd_verify(args) -> int:
    p, analytic = load_domain(args.domain)
    th = args.theorem
    reports: list[bounds.BoundReport] = []
    if th == "mixed":
        for eps in parse_floats(args.eps or "0.2,0.1,0.05"):
            n = families.annulus_sides(eps)
            nu = fem.mixed_eigenvalue(families.annulus(eps, n), eps / 4, seed=args.seed)
            lb = bounds.mixed_lower_bound(families.annulus_inner_radial(n), eps)
            reports.append(bounds.BoundReport("mixed_lower_bound", lb, nu, {"eps": eps, "sides": n}))
    else:
        if th in ("convex", "cross-section", "payne-weinberger", "funano") and not is_convex(p):
            raise InputError(f"--theorem {th} needs a convex domain")
        needs_fem = th in ("payne-weinberger", "faber-krahn", "funano") or rectangle_sides(p) is None
        fs = fem.fem_spectra(p, _default_h(p, args.h), seed=args.seed) if needs_fem else None
        count = None
        if th in ("convex", "cross-section", "polygon"):
            if rectangle_sides(p) is not None:
                count = count_N_box(BoxDomain(rectangle_sides(p)))
            else:
                count = fem.count_from_fem(fs)
        if th == "convex":
            reports += bounds.verify_convex_sandwich(p, count=count)
        elif th == "cross-section":
            reports += bounds.verify_cross_section(p, count=count)
        elif th == "polygon":
            reports += bounds.verify_polygon_bounds(p, count=count)
        elif th == "payne-weinberger":
            reports.append(bounds.payne_weinberger(p, fs))
        elif th == "faber-krahn":
            reports.append(bounds.faber_krahn(p, fs))
        elif th == "funano":
            reports += bounds.funano_sandwich(p, spectra=fs)
    for r in reports:
        print(r.to_json())
    print(bounds.render_table(reports), file=sys.stderr)
    if args.output:
        Path(args.output).write_text(bounds.reports_to_jsonl(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_NUMERIC


def cmd_family(args) -> int:
    ks = parse_ks(args.k)
    rows = families.family_sweep(args.name, ks, h=args.h, resolution=args.resolution,
                                 with_fem=not args.no_fem)
    text = families.rows_to_csv(rows)
    _emit(args, text, text, rows)
    return EXIT_OK


def cmd_collapse(args) -> int:
    base = parse_base(args.base)
    fiber = parse_fiber(args.fiber)
    grid = parse_floats(args.eps)
    if not grid or any(e <= 0 for e in grid):
        raise InputError("--eps needs positive values")
    rows = collapse.collapse_convergence(base, fiber, grid)
    for r in rows:
        if r.error:
            print(f"eps = {r.eps}: {r.error}", file=sys.stderr)
    text = collapse.convergence_to_csv(rows)
    _emit(args, text, text, [r.__dict__ for r in rows])
    return EXIT_OK


def cmd_mesh_info(args) -> int:
    p, _ = load_domain(args.domain)
    h = _default_h(p, args.h)
    mesh = fem.triangulate(p, h)
    area, perim, diam, iso = measures(p)
    ang = mesh.angles()
    info = {"vertices": mesh.n_vertices, "triangles": len(mesh.triangles),
            "boundary_edges": len(mesh.boundary_edges), "h": h,
            "max_edge": float(mesh.edge_lengths().max()), "min_angle": float(ang.min()),
            "mesh_area": mesh.area, "polygon_area": area, "perimeter": perim, "diameter": diam,
            "iso_ratio": iso}
    _emit(args, "\n".join(f"{k:<15} {v}" for k, v in info.items()), None, info)
    if args.dump:
        Path(args.dump).write_text(mesh.dump())
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="spectral-count",
                 description="Count Neumann eigenvalues below the first Dirichlet eigenvalue, "
                             "N = #{j : mu_j <= lambda_1}, and check the bounds on it.")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp, domain=True, h=True):
        if domain:
            sp.add_argument("--domain", required=True,
                            help="builtin:NAME (" + ", ".join(sorted(BUILTINS)) + ") or polygon JSON path")
        if h:
            sp.add_argument("--h", type=float, default=None, help="FEM mesh size (default from geometry)")
        sp.add_argument("--output", default=None, help="write results to this file")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--seed", type=lambda s: int(s, 0), default=fem.SEED,
                        help="Krylov start-vector seed (default 0x5EED)")

    sp = sub.add_parser("spectrum", help="low Dirichlet or Neumann eigenvalues",
                        description="Low eigenvalues of a domain: closed forms for boxes and disks "
                                    "(lattice sums, Bessel zeros) or P1 finite elements.")
    common(sp)
    sp.add_argument("--bc", choices=(DIRICHLET, NEUMANN), default=NEUMANN)
    sp.add_argument("--method", choices=("analytic", "fem"), default="fem")
    sp.add_argument("--cutoff", type=float, default=None, help="analytic: largest eigenvalue listed")
    sp.add_argument("--k", type=int, default=10, help="fem: number of eigenvalues")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("count", help="N(domain)",
                        description="N = #{j : mu_j <= lambda_1}; reproduces N(unit disk) = 3 and the "
                                    "unit-square tie mu_4 = lambda_1 = 2 pi^2, exactly (analytic) or by "
                                    "Richardson-extrapolated P1 finite elements (fem).")
    common(sp)
    sp.add_argument("--method", choices=("analytic", "fem"), default="fem")
    sp.set_defaults(func=cmd_count)

    sp = sub.add_parser("verify", help="check an inequality on a domain",
                        description="Check a theorem on a domain: the convex-domain isoperimetric sandwich "
                                    "C1 |dO|^2/|O| <= N <= C2 |dO|^2/|O| (convex), its longest-chord form "
                                    "(cross-section), the m-gon bound C1 |dP|/sqrt|P| <= N <= "
                                    "55 (m-2)^2 |dP|^2/|P| (polygon), the Payne-Weinberger and Faber-Krahn "
                                    "inequalities, Funano's convex domain-monotonicity comparison "
                                    "mu_j(outer) <= 4 * 92^2 mu_j(inner) (funano) and the 1/(f g) lower "
                                    "bound for the mixed eigenvalue of a thin shell (mixed). "
                                    "Exit 2 if any report fails.")
    common(sp)
    sp.add_argument("--theorem", required=True,
                    choices=("convex", "cross-section", "polygon", "payne-weinberger", "faber-krahn",
                             "funano", "mixed"))
    sp.add_argument("--eps", default=None, help="mixed: comma-separated shell widths")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("family", help="sweep a domain family",
                        description="CSV table over k for the counterexample families: spiky disks "
                                    "(N = 3 with unbounded isoperimetric ratio), Gaussian strips (N bounded "
                                    "with unbounded diameter), rooms and passages (N >= k with bounded "
                                    "ratios) and triangles with a thin tail (sharpness of the polygon "
                                    "lower bound).")
    common(sp, domain=False)
    sp.add_argument("--name", required=True, choices=families.FAMILIES)
    sp.add_argument("--k", required=True, help="range '1-4' or list '1,2,5'")
    sp.add_argument("--resolution", type=int, default=None, help="boundary chords per unit length")
    sp.add_argument("--no-fem", action="store_true", help="geometry columns only")
    sp.set_defaults(func=cmd_family)

    sp = sub.add_parser("collapse", help="exact N of M x eps F against the leading term",
                        description="Collapsing-fiber asymptotic N(M x eps F) ~ omega_m/(2 pi)^m |M| "
                                    "sum_j (lambda_1(F) - mu_j(F))^{m/2} eps^-m, including the tube "
                                    "constant for ball fibers: exact count on flat products against "
                                    "the leading term. Bases: point, circle:L, "
                                    "interval:L[:natural|neumann|dirichlet], torus:AxB, box:AxB[:ends]. "
                                    "Fibers: interval:L, box:AxB, disk:R.")
    common(sp, domain=False, h=False)
    sp.add_argument("--base", required=True)
    sp.add_argument("--fiber", required=True)
    sp.add_argument("--eps", required=True, help="comma-separated, decreasing")
    sp.set_defaults(func=cmd_collapse)

    sp = sub.add_parser("mesh-info", help="mesh statistics and dump",
                        description="Triangulate a domain (the FEM step behind every count) and report "
                                    "size and quality; --dump writes the ASCII mesh.")
    common(sp)
    sp.add_argument("--dump", default=None, help="write the mesh in VERTICES/TRIANGLES/BOUNDARY format")
    sp.set_defaults(func=cmd_mesh_info)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ResourceError, MemoryError) as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (collapse.GuardError, fem.EigenSolveError, fem.MeshError, SolverError, CompletenessError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        residuals = getattr(exc, "residuals", None)
        if residuals is not None:
            print(f"residuals: {np.asarray(residuals).tolist()}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, GeometryError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
