"""Explicit constants of the two-sided N bounds and inequality checks.

Every check returns a BoundReport with ``lhs <= rhs`` as the claim. FEM
quantities enter through their extrapolated values widened by the
extrapolation radius, on the side that favours the inequality: a failure is
then a real violation rather than discretization noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import fem
from .bessel import bessel_zero
from .geometry import GeometryError, Polygon, is_convex, max_chord, measures, rect_sandwich, rectangle_sides
from .spectra import NEUMANN, BoxDomain, CountResult, box_spectrum, count_N_box, unit_ball_volume

FUNANO_E = 92.0**2
REL_TOL = 1e-9


@dataclass(frozen=True)
class BoundReport:
    name: str
    lhs: float
    rhs: float
    inputs: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.rhs / self.lhs if self.lhs != 0 else math.inf

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs * (1 + REL_TOL) or self.lhs <= self.rhs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratio"] = self.ratio
        d["pass"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=float)


def reports_to_jsonl(reports: Sequence[BoundReport]) -> str:
    return "".join(r.to_json() + "\n" for r in reports)


def render_table(reports: Sequence[BoundReport]) -> str:
    rows = [f"{'name':<28} {'lhs':>14} {'rhs':>14} {'ratio':>12}  pass"]
    for r in reports:
        rows.append(f"{r.name:<28} {r.lhs:>14.6g} {r.rhs:>14.6g} {r.ratio:>12.4g}  {'yes' if r.passed else 'NO'}")
    return "\n".join(rows)


# ---------------------------------------------------------------- constants


def convex_constants(n: int) -> tuple[float, float]:
    """(C1, C2) of the convex-domain bound in dimension n."""
    if n < 2:
        raise ValueError("n must be at least 2")
    c1 = unit_ball_volume(n) * 184.0**-n * n ** (-1.5 * n * (n + 1))
    c2 = 92.0**n * n ** (1.5 * n * n + n)
    return c1, c2


def convex_constants_from_E(n: int, E: float = FUNANO_E) -> tuple[float, float]:
    """The same constants written through the domain-monotonicity constant E."""
    if n < 2:
        raise ValueError("n must be at least 2")
    c1 = unit_ball_volume(n) * 2.0**-n * E ** (-n / 2) * n ** (-1.5 * n * (n + 1))
    c2 = E ** (n / 2) * n ** (1.5 * n * n + n)
    return c1, c2


def cross_section_constants(n: int) -> tuple[float, float]:
    """(lower, upper) constants in front of A_{n-1}^n / |Omega|^{n-1}."""
    c1, c2 = convex_constants(n)
    return 2.0**n * c1, (2.0 * n) ** (n * n) / unit_ball_volume(n - 1) ** n * c2


def polygon_constants(m: int) -> tuple[float, float]:
    """(C1, C2) of the m-gon bound C1 |dP|/sqrt|P| <= N <= C2 |dP|^2/|P|."""
    if m < 3:
        raise ValueError("a polygon has at least 3 edges")
    c1 = bessel_zero(0, 1) / (4 * math.sqrt(2 * math.pi) * m * (m - 1))
    c2 = 55.0 * (m - 2) ** 2
    return c1, c2


# ---------------------------------------------------------------- counts


def default_h(p: Polygon) -> float:
    """Mesh size resolving the polygon: a fraction of its inradius-like width."""
    area, perim, diam, _ = measures(p)
    return min(diam / 30, 2 * area / perim / 4)


def polygon_count(p: Polygon, h: float | None = None) -> CountResult:
    """Exact count for rectangles, FEM count otherwise."""
    sides = rectangle_sides(p)
    if sides is not None:
        return count_N_box(BoxDomain(sides))
    return fem.count_N_fem(p, h or default_h(p))


def _count_inputs(p: Polygon, res: CountResult) -> dict:
    area, perim, diam, iso = measures(p)
    return {"n_vertices": int(len(p.vertices)), "area": area, "perimeter": perim, "diameter": diam,
            "N": res.n_count, "ambiguous": res.ambiguous}


def _resolve(p, h, count):
    return count if count is not None else polygon_count(p, h)


# ---------------------------------------------------------------- sandwiches


def verify_convex_sandwich(p: Polygon, h: float | None = None,
                           count: CountResult | None = None) -> tuple[BoundReport, BoundReport]:
    """C1 |dO|^2/|O| <= N(O) <= C2 |dO|^2/|O| for a convex polygon."""
    if not is_convex(p):
        raise GeometryError("convex polygon required")
    res = _resolve(p, h, count)
    area, perim, _, _ = measures(p)
    iso = perim**2 / area
    c1, c2 = convex_constants(2)
    inp = _count_inputs(p, res)
    return (BoundReport("convex_sandwich_lower", c1 * iso, res.n_count, inp),
            BoundReport("convex_sandwich_upper", res.n_count, c2 * iso, inp))


def verify_cross_section(p: Polygon, h: float | None = None,
                         count: CountResult | None = None) -> tuple[BoundReport, BoundReport]:
    """Same sandwich in terms of the longest chord A_1."""
    if not is_convex(p):
        raise GeometryError("convex polygon required")
    res = _resolve(p, h, count)
    a1 = max_chord(p)
    q = a1**2 / p.area
    lo, hi = cross_section_constants(2)
    inp = dict(_count_inputs(p, res), max_chord=a1)
    return (BoundReport("cross_section_lower", lo * q, res.n_count, inp),
            BoundReport("cross_section_upper", res.n_count, hi * q, inp))


def verify_polygon_bounds(p: Polygon, h: float | None = None,
                          count: CountResult | None = None) -> tuple[BoundReport, BoundReport]:
    """C1 |dP|/sqrt|P| <= N(P) <= C2 |dP|^2/|P| with m-dependent constants."""
    if p.holes:
        raise GeometryError("simply connected polygon required")
    res = _resolve(p, h, count)
    area, perim, _, _ = measures(p)
    c1, c2 = polygon_constants(p.n_edges)
    inp = dict(_count_inputs(p, res), m=p.n_edges)
    return (BoundReport("polygon_lower", c1 * perim / math.sqrt(area), res.n_count, inp),
            BoundReport("polygon_upper", res.n_count, c2 * perim**2 / area, inp))


# ---------------------------------------------------------------- classical inequalities


def payne_weinberger(p: Polygon, spectra: fem.FemSpectra) -> BoundReport:
    """pi^2 / diam^2 <= mu_2 (convex domains)."""
    diam = measures(p)[2]
    mu2 = spectra.neumann[1] + spectra.neumann_radius[1]
    return BoundReport("payne_weinberger", math.pi**2 / diam**2, float(mu2), {"diameter": diam})


def faber_krahn(p: Polygon, spectra: fem.FemSpectra) -> BoundReport:
    """pi j_0^2 / |O| <= lambda_1."""
    lhs = math.pi * bessel_zero(0, 1) ** 2 / p.area
    return BoundReport("faber_krahn", lhs, spectra.lambda1 + spectra.lambda1_radius, {"area": p.area})


def funano(inner: np.ndarray, outer: np.ndarray, name: str = "funano", n: int = 2,
           E: float = FUNANO_E) -> BoundReport:
    """mu_j(outer) <= E n^2 mu_j(inner) termwise; reports the worst index."""
    k = min(len(inner), len(outer))
    lhs, rhs = np.asarray(outer[:k], float), E * n * n * np.asarray(inner[:k], float)
    slack = rhs - lhs
    j = int(np.argmin(slack))
    return BoundReport(name, float(lhs[j]), float(rhs[j]), {"j": j + 1, "terms": k})


def funano_sandwich(p: Polygon, jmax: int = 10, spectra: fem.FemSpectra | None = None) -> list[BoundReport]:
    """Termwise checks over R in O in Q from the rectangle sandwich.

    The (R, Q) pair is exact; pairs involving O need FEM spectra, whose
    values are widened by their radius against the claim.
    """
    rs = rect_sandwich(p)
    R = BoxDomain(rs.r_lengths)
    Q = BoxDomain(rs.q_lengths)

    def lowest(b: BoxDomain) -> np.ndarray:
        cut = b.lambda1
        while True:
            s = box_spectrum(b, NEUMANN, cut).expanded
            if len(s) >= jmax:
                return s[:jmax]
            cut *= 2

    mu_r, mu_q = lowest(R), lowest(Q)
    out = [funano(mu_r, mu_q, "funano_R_Q")]
    if spectra is not None:
        lo = np.maximum(spectra.neumann - spectra.neumann_radius, 0.0)
        hi = spectra.neumann + spectra.neumann_radius
        out.append(funano(mu_r, hi, "funano_R_Omega"))
        out.append(funano(lo, mu_q, "funano_Omega_Q"))
    return out


def perimeter_chord(p: Polygon) -> BoundReport:
    """|dO| <= (2n)^n / omega_{n-1} A_{n-1}, which is 8 * longest chord in the plane."""
    return BoundReport("perimeter_chord", measures(p)[1], 8.0 * max_chord(p))


def iso_ratio_sandwich(p: Polygon) -> tuple[BoundReport, BoundReport]:
    """Isoperimetric ratio of O against that of R, factor n^{3n(n-1)/2} = 8."""
    rs = rect_sandwich(p)
    a, b = rs.r_lengths
    iso_r = (2 * (a + b)) ** 2 / (a * b)
    iso = measures(p)[3]
    return (BoundReport("iso_ratio_lower", iso_r / 8, iso), BoundReport("iso_ratio_upper", iso, 8 * iso_r))


# ---------------------------------------------------------------- mixed problem


def mixed_fg(L: np.ndarray, eps: float, n: int = 2) -> tuple[float, float]:
    L = np.asarray(L, dtype=float)
    if eps <= 0 or np.any(L <= 0):
        raise ValueError("need eps > 0 and positive samples of L")
    if n == 2:
        f = np.max(np.log((L + eps) / L))
    elif n > 2:
        f = np.max((L ** (2 - n) - (L + eps) ** (2 - n)) / (n - 2))
    else:
        raise ValueError("n must be at least 2")
    g = np.max(((L + eps) ** n - L**n) / n)
    return float(f), float(g)


def mixed_lower_bound(L: np.ndarray, eps: float, n: int = 2) -> float:
    """1 / (f g) for the shell L < r < L + eps with Dirichlet data inside."""
    f, g = mixed_fg(L, eps, n)
    return 1.0 / (f * g)
