"""Parametric domain families: spiky disks, Gaussian strips, rooms and
passages, and a triangle with a thin triangular tail."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import fem
from .geometry import DIRICHLET, NEUMANN, GeometryError, Polygon, measures

FAMILIES = ("spiky_disk", "gaussian_strip", "rooms_passages", "thin_triangle")
N_NEUMANN_COLUMNS = 30
CSV_COLUMNS = ("family", "k", "area", "perimeter", "diameter", "iso_ratio", "lambda1", "N", "ambiguous",
               "h", "error") + tuple(f"mu{j}" for j in range(1, N_NEUMANN_COLUMNS + 1))
# desk-scale limits on the thinnest features FEM is asked to resolve
GAUSSIAN_FEM_MAX_K = 3
ROOMS_FEM_MAX_K = 5


def worker_count() -> int:
    env = os.environ.get("SPECTRAL_COUNT_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


# ---------------------------------------------------------------- spiky disk


def spike_profile(k: int, x):
    """f_k(x) = (1 + cos(k^2 pi x)) / k."""
    return (1.0 + np.cos(k * k * math.pi * np.asarray(x, float))) / k


def spiky_default_resolution(k: int) -> int:
    # chords of length <= h/2 at h = 1/(4k^2): the steepest slope is about k pi
    return max(8 * k * k, math.ceil(8 * math.pi * k**3))


def spiky_disk(k: int, resolution: int | None = None) -> Polygon:
    """Unit disk with k^2 bumps of height 2/k on the upper half.

    The upper boundary is sampled uniformly in x so every crest and trough
    of the cosine is a vertex, merged with the points x = cos(theta) that
    follow the circle where g is steep. ``resolution`` counts chords per unit
    length in x.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if resolution is None:
        resolution = spiky_default_resolution(k)
    if resolution < 8 * k * k:
        raise ValueError(f"resolution {resolution} < 8 k^2 = {8 * k * k} misses oscillations")
    per_half = math.ceil(resolution / (k * k))
    xs = np.linspace(-1.0, 1.0, 2 * k * k * per_half + 1)
    n_arc = math.ceil(math.pi * resolution)
    theta = np.linspace(0.0, math.pi, n_arc + 1)
    xs = np.union1d(xs, np.cos(theta))
    xs = xs[np.concatenate([[True], np.diff(xs) > 1e-12])]
    xs[0], xs[-1] = -1.0, 1.0
    top_x = xs[::-1]
    top = np.column_stack([top_x, np.sqrt(np.clip(1 - top_x**2, 0, None)) + spike_profile(k, top_x)])
    t = np.linspace(math.pi, 2 * math.pi, n_arc + 1)[1:-1]
    bottom = np.column_stack([np.cos(t), np.sin(t)])
    pts = [np.array([[-1.0, 0.0]]), bottom, np.array([[1.0, 0.0]])]
    # the end walls have height f_k(+-1), zero for odd k
    start = 0 if top[0, 1] > 1e-14 else 1
    stop = len(top) if top[-1, 1] > 1e-14 else len(top) - 1
    pts.append(top[start:stop])
    return Polygon((np.vstack(pts),))


def spiky_area(k: int) -> float:
    """Exact area pi + 2/k (the cosine integrates to zero over whole periods)."""
    return math.pi + 2.0 / k


def spike_cell(k: int, resolution: int | None = None, trim: float = 0.1) -> Polygon:
    """One bump of the region between the circle and the spiky top.

    The bump centred at x = 0 pinches to zero width at x = +-1/k^2; it is
    trimmed to |x| <= (1 - trim)/k^2 so its ends are proper vertical walls.
    The circular side is Dirichlet, the rest Neumann.
    """
    if not 0 < trim < 1:
        raise ValueError("trim must lie in (0, 1)")
    if resolution is None:
        resolution = spiky_default_resolution(k)
    a = (1 - trim) / (k * k)
    n = max(16, math.ceil(2 * a * resolution))
    x = np.linspace(-a, a, n + 1)
    g = np.sqrt(1 - x**2)
    low = np.column_stack([x, g])
    high = np.column_stack([x, g + spike_profile(k, x)])[::-1]
    loop = np.vstack([low, high])
    tags = [DIRICHLET] * n + [NEUMANN] + [NEUMANN] * n + [NEUMANN]
    return Polygon((loop,), (tuple(tags),))


# ---------------------------------------------------------------- gaussian strip


def gaussian_strip(k: int, resolution: int = 64, grade: bool | None = None) -> Polygon:
    """0 < x < k, |y| < exp(-x^2).

    With ``grade`` the x-spacing also stays below an eighth of the local
    width, so the mesher meets chords no longer than its local size. The
    point count then grows like exp(k^2), so grading defaults to on only
    within the range FEM runs cover.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if grade is None:
        grade = k <= GAUSSIAN_FEM_MAX_K
    xs = [0.0]
    while xs[-1] < k:
        step = 1.0 / resolution
        if grade:
            step = min(step, math.exp(-xs[-1] ** 2) / 8)
        xs.append(min(k, xs[-1] + step))
    xs = np.array(xs)
    w = np.exp(-xs**2)
    bottom = np.column_stack([xs, -w])
    top = np.column_stack([xs, w])[::-1]
    return Polygon((np.vstack([bottom, top]),))


def gaussian_size(c: np.ndarray) -> np.ndarray:
    """Local mesh size: a quarter of the strip width at the centroid."""
    return np.exp(-c[:, 0] ** 2) / 2


# ---------------------------------------------------------------- rooms and passages


def rooms_offsets(k: int) -> np.ndarray:
    """Left ends x_j = 6 (1 - 2^-j) of the chained pieces."""
    return 6.0 * (1.0 - 2.0 ** -np.arange(k + 1))


def rooms_passages(k: int) -> Polygon:
    """Chain of k pieces; piece j (scale s = 2^-j) is a passage
    [0, 3s] x [0, s^3/2] joined to a room [s, 2s] x [0, s], bottom aligned."""
    if k < 1:
        raise ValueError("k must be >= 1")
    x = rooms_offsets(k)
    pts = [(0.0, 0.0), (x[k], 0.0)]
    for j in range(k - 1, -1, -1):
        s = 2.0**-j
        p = s**3 / 2
        pts += [(x[j] + 3 * s, p), (x[j] + 2 * s, p), (x[j] + 2 * s, s),
                (x[j] + s, s), (x[j] + s, p), (x[j], p)]
    # consecutive pieces meet at x_j where the earlier passage is taller
    out = [pts[0], pts[1]]
    for q in pts[2:]:
        if q != out[-1]:
            out.append(q)
    return Polygon((np.array(out),))


def rooms_piece(j: int) -> Polygon:
    """Piece T_j at the origin, Dirichlet on its two end walls."""
    s = 2.0**-j
    p = s**3 / 2
    v = [(0, 0), (3 * s, 0), (3 * s, p), (2 * s, p), (2 * s, s), (s, s), (s, p), (0, p)]
    tags = [NEUMANN, DIRICHLET, NEUMANN, NEUMANN, NEUMANN, NEUMANN, NEUMANN, DIRICHLET]
    return Polygon((np.array(v, float),), (tuple(tags),))


def rooms_area(k: int) -> float:
    return float(sum(4.0**-j + 16.0**-j for j in range(k)))


def rooms_size(k: int) -> Callable[[np.ndarray], np.ndarray]:
    """Local mesh size: a quarter of the column height over the centroid."""
    x = rooms_offsets(k)

    def size(c: np.ndarray) -> np.ndarray:
        j = np.clip(np.searchsorted(x, c[:, 0], side="right") - 1, 0, k - 1)
        s = 2.0**-j
        rel = c[:, 0] - x[j]
        in_room = (rel >= s) & (rel <= 2 * s)
        return np.where(in_room, s, s**3 / 2) / 4

    return size


# ---------------------------------------------------------------- thin triangle


def thin_triangle_example(k: int) -> Polygon:
    """Triangle (-1,0), (0,0), (0,1) joined along x = 0 to the sliver
    (0,0), (0,1/k), (k,0); the reflex vertex sits at (0, 1/k)."""
    if k < 5:
        raise ValueError("k must be >= 5")
    return Polygon.from_vertices([(-1.0, 0.0), (float(k), 0.0), (0.0, 1.0 / k), (0.0, 1.0)])


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class FamilySpec:
    name: str
    k: int
    resolution: int | None = None

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise ValueError(f"unknown family {self.name!r}; choose from {', '.join(FAMILIES)}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.name == "spiky_disk" and self.resolution is not None and self.resolution < 8 * self.k**2:
            raise ValueError("spiky_disk resolution must be >= 8 k^2")

    def polygon(self) -> Polygon:
        if self.name == "spiky_disk":
            return spiky_disk(self.k, self.resolution)
        if self.name == "gaussian_strip":
            return gaussian_strip(self.k, self.resolution or 64)
        if self.name == "rooms_passages":
            return rooms_passages(self.k)
        return thin_triangle_example(self.k)

    def fem_h(self) -> float:
        """Global mesh size: a quarter of the thinnest feature (graded
        families refine further through ``fem_size``)."""
        k = self.k
        if self.name == "spiky_disk":
            return 1.0 / (4 * k * k)
        if self.name == "gaussian_strip":
            return 0.05
        if self.name == "rooms_passages":
            return 0.125
        return 1.0 / (4 * k)

    def fem_size(self):
        if self.name == "gaussian_strip":
            return gaussian_size
        if self.name == "rooms_passages":
            return rooms_size(self.k)
        return None

    def fem_allowed(self) -> bool:
        if self.name == "gaussian_strip":
            return self.k <= GAUSSIAN_FEM_MAX_K
        if self.name == "rooms_passages":
            return self.k <= ROOMS_FEM_MAX_K
        return True


def family_row(spec: FamilySpec, h: float | None = None, with_fem: bool = True) -> dict:
    """Geometry and (optionally) spectral data for one member; errors are
    recorded in the ``error`` column instead of raised."""
    row = {c: "" for c in CSV_COLUMNS}
    row.update(family=spec.name, k=spec.k)
    try:
        p = spec.polygon()
        area, perim, diam, iso = measures(p)
        row.update(area=area, perimeter=perim, diameter=diam, iso_ratio=iso)
        if not with_fem:
            return row
        if not spec.fem_allowed():
            raise fem.MeshError(f"FEM capped for {spec.name} at this k (feature size too small)")
        hh = h if h is not None else spec.fem_h()
        fs = fem.fem_spectra(p, hh, size=spec.fem_size())
        res = fem.count_from_fem(fs)
        row.update(lambda1=res.lambda1, N=res.n_count, ambiguous=res.ambiguous, h=hh)
        for j, mu in enumerate(fs.neumann[:N_NEUMANN_COLUMNS], start=1):
            row[f"mu{j}"] = float(mu)
    except (GeometryError, ValueError, RuntimeError, MemoryError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def family_sweep(name: str, ks: Iterable[int], h: float | None = None, resolution: int | None = None,
                 with_fem: bool = True, workers: int | None = None) -> list[dict]:
    """Rows for each k in order; members run concurrently on a bounded pool."""
    specs = [FamilySpec(name, int(k), resolution) for k in ks]
    workers = workers or worker_count()
    if workers == 1 or len(specs) == 1:
        return [family_row(s, h, with_fem) for s in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: family_row(s, h, with_fem), specs))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in CSV_COLUMNS])
    return out.getvalue()


# ---------------------------------------------------------------- thin annulus


def annulus_sides(eps: float, h: float | None = None) -> int:
    """Side count keeping chords of the inner circle below h/2 (h = eps/4)."""
    h = eps / 4 if h is None else h
    return max(64, math.ceil(2 * math.pi * (1 + eps) / (h / 2)))


def annulus(eps: float, n_sides: int | None = None) -> Polygon:
    """Polygonal shell between the inscribed n-gons of r = 1 and r = 1 + eps,
    vertices on common rays; Dirichlet inside, Neumann outside."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    n = n_sides or annulus_sides(eps)
    t = 2 * math.pi * np.arange(n) / n
    ring = np.column_stack([np.cos(t), np.sin(t)])
    return Polygon(((1 + eps) * ring, ring[::-1]), ((NEUMANN,) * n, (DIRICHLET,) * n))


def annulus_inner_radial(n_sides: int, samples: int = 64) -> np.ndarray:
    """Radial function L of the inner n-gon, sampled across one side (the
    function is periodic in the side)."""
    phi = np.linspace(-math.pi / n_sides, math.pi / n_sides, samples)
    return math.cos(math.pi / n_sides) / np.cos(phi)
