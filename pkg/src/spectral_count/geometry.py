"""Planar polygon geometry: measures, John ellipse, rectangle sandwich,
convex decomposition and square covers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from shapely.validation import explain_validity
from shapely.geometry import Polygon as _ShapelyPolygon
from shapely.geometry import box as _shapely_box

DIRICHLET = "D"
NEUMANN = "N"


class GeometryError(ValueError):
    """Invalid or unsupported geometric input."""


class SolverError(RuntimeError):
    """Numerical failure inside a geometric optimizer or self-check."""


def _signed_area(loop: np.ndarray) -> float:
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _reverse_loop(loop: np.ndarray, tags: list[str]) -> tuple[np.ndarray, list[str]]:
    # edge i joins v[i] -> v[i+1]; after reversal edge j is the old edge n-2-j
    n = len(loop)
    return loop[::-1].copy(), [tags[(n - 2 - j) % n] for j in range(n)]


@dataclass(frozen=True, eq=False)
class Polygon:
    """Polygon given by an outer CCW loop and optional CW hole loops.

    ``edge_tags[i][j]`` is the boundary condition on the edge from
    ``loops[i][j]`` to ``loops[i][j + 1]`` (cyclically).  Loops passed with the
    wrong orientation are reversed, together with their tags.
    """

    loops: tuple[np.ndarray, ...]
    edge_tags: tuple[tuple[str, ...], ...] = field(default=())
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if len(self.loops) == 0:
            raise GeometryError("polygon needs at least one loop")
        loops, tags = [], []
        given = list(self.edge_tags) if self.edge_tags else [None] * len(self.loops)
        if len(given) != len(self.loops):
            raise GeometryError("edge_tags must have one entry per loop")
        for i, (raw, t) in enumerate(zip(self.loops, given)):
            loop = np.array(raw, dtype=float).reshape(-1, 2)
            if len(loop) < 3:
                raise GeometryError("each loop needs at least 3 vertices")
            t = [DIRICHLET] * len(loop) if t is None else [str(s).upper() for s in t]
            if len(t) != len(loop):
                raise GeometryError("edge_tags length must match loop length")
            if any(s not in (DIRICHLET, NEUMANN) for s in t):
                raise GeometryError("edge tags must be 'D' or 'N'")
            if np.any(np.all(np.isclose(loop, np.roll(loop, -1, axis=0), rtol=0, atol=1e-14), axis=1)):
                raise GeometryError("consecutive duplicate vertices")
            a = _signed_area(loop)
            if (i == 0 and a < 0) or (i > 0 and a > 0):
                loop, t = _reverse_loop(loop, t)
            loop.setflags(write=False)
            loops.append(loop)
            tags.append(tuple(t))
        object.__setattr__(self, "loops", tuple(loops))
        object.__setattr__(self, "edge_tags", tuple(tags))
        if self.area <= 0:
            raise GeometryError("degenerate polygon (area <= 0)")
        if self.validate and not self.to_shapely().is_valid:
            raise GeometryError("loops are not simple / holes not strictly inside: "
                                + explain_validity(self.to_shapely()))

    @classmethod
    def from_vertices(cls, vertices, tags=None, holes=(), hole_tags=None) -> "Polygon":
        loops = [vertices, *holes]
        if tags is None and hole_tags is None:
            return cls(tuple(loops))
        if isinstance(tags, str):
            tags = [tags] * len(vertices)
        all_tags = [tags if tags is not None else [DIRICHLET] * len(vertices)]
        for i, h in enumerate(holes):
            ht = None if hole_tags is None else hole_tags[i]
            if isinstance(ht, str):
                ht = [ht] * len(h)
            all_tags.append(ht if ht is not None else [DIRICHLET] * len(h))
        return cls(tuple(loops), tuple(tuple(t) for t in all_tags))

    @property
    def outer(self) -> np.ndarray:
        return self.loops[0]

    @property
    def holes(self) -> tuple[np.ndarray, ...]:
        return self.loops[1:]

    @property
    def n_edges(self) -> int:
        return sum(len(l) for l in self.loops)

    @property
    def area(self) -> float:
        return _signed_area(self.loops[0]) - sum(-_signed_area(h) for h in self.loops[1:])

    @property
    def vertices(self) -> np.ndarray:
        return np.vstack(self.loops)

    def edges(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """Return (starts, ends, tags) over all loops."""
        starts = np.vstack(self.loops)
        ends = np.vstack([np.roll(l, -1, axis=0) for l in self.loops])
        tags = [t for ts in self.edge_tags for t in ts]
        return starts, ends, tags

    def with_tags(self, tag: str) -> "Polygon":
        return Polygon(self.loops, tuple((tag,) * len(l) for l in self.loops), validate=False)

    def to_shapely(self) -> _ShapelyPolygon:
        return _ShapelyPolygon(self.loops[0], [h for h in self.loops[1:]])

    def to_dict(self) -> dict:
        return {"loops": [l.tolist() for l in self.loops],
                "edge_tags": [list(t) for t in self.edge_tags]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Polygon":
        if "loops" not in d:
            raise GeometryError("polygon JSON needs a 'loops' key")
        tags = d.get("edge_tags")
        return cls(tuple(d["loops"]), tuple(tuple(t) for t in tags) if tags else ())

    @classmethod
    def from_json(cls, text: str) -> "Polygon":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class Ellipse:
    """Ellipse {x : (x - c)^T S^{-1} (x - c) <= 1}."""

    center: np.ndarray
    shape: np.ndarray

    @property
    def axes(self) -> tuple[float, float]:
        w = np.linalg.eigvalsh(self.shape)
        return float(np.sqrt(w[1])), float(np.sqrt(w[0]))

    @property
    def area(self) -> float:
        a1, a2 = self.axes
        return math.pi * a1 * a2

    @property
    def rotation(self) -> np.ndarray:
        """Rotation whose first column is the major axis direction.

        The angle is taken in (-pi/2, pi/2]; a circle gets the identity.
        """
        a1, a2 = self.axes
        if a1 - a2 <= 1e-9 * a1:
            return np.eye(2)
        w, v = np.linalg.eigh(self.shape)
        d = v[:, 1]
        theta = math.atan2(d[1], d[0])
        if theta <= -math.pi / 2:
            theta += math.pi
        elif theta > math.pi / 2:
            theta -= math.pi
        c, s = math.cos(theta), math.sin(theta)
        return np.array([[c, -s], [s, c]])

    def boundary_points(self, n: int = 720) -> np.ndarray:
        t = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
        w, v = np.linalg.eigh(self.shape)
        root = v @ np.diag(np.sqrt(w)) @ v.T
        return self.center + (root @ np.vstack([np.cos(t), np.sin(t)])).T

    def scaled(self, factor: float) -> "Ellipse":
        return Ellipse(self.center, self.shape * factor**2)


@dataclass(frozen=True, eq=False)
class RectSandwich:
    """Rectangles R and Q (half-widths in the principal frame) with R in the
    polygon and the polygon in Q.  ``Q = 2**1.5 * R`` about the common center."""

    r_half: np.ndarray
    q_half: np.ndarray
    rotation: np.ndarray
    center: np.ndarray

    def _corners(self, half: np.ndarray) -> np.ndarray:
        sx, sy = half
        local = np.array([[-sx, -sy], [sx, -sy], [sx, sy], [-sx, sy]])
        return self.center + local @ self.rotation.T

    @property
    def r_corners(self) -> np.ndarray:
        return self._corners(self.r_half)

    @property
    def q_corners(self) -> np.ndarray:
        return self._corners(self.q_half)

    @property
    def r_lengths(self) -> tuple[float, float]:
        return float(2 * self.r_half[0]), float(2 * self.r_half[1])

    @property
    def q_lengths(self) -> tuple[float, float]:
        return float(2 * self.q_half[0]), float(2 * self.q_half[1])


# ---------------------------------------------------------------- measures


def _diameter_of_points(pts: np.ndarray) -> float:
    if len(pts) > 64:
        from scipy.spatial import ConvexHull

        pts = pts[ConvexHull(pts).vertices]
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def measures(p: Polygon) -> tuple[float, float, float, float]:
    """Return ``(area, perimeter, diameter, perimeter**2 / area)``."""
    area = p.area
    if area <= 0:
        raise GeometryError("degenerate polygon")
    s, e, _ = p.edges()
    perimeter = float(np.linalg.norm(e - s, axis=1).sum())
    diameter = _diameter_of_points(p.outer)
    return area, perimeter, diameter, perimeter**2 / area


def interior_angles(loop: np.ndarray) -> np.ndarray:
    """Interior angles of a CCW loop, in (0, 2*pi)."""
    prev = np.roll(loop, 1, axis=0) - loop
    nxt = np.roll(loop, -1, axis=0) - loop
    a_prev = np.arctan2(prev[:, 1], prev[:, 0])
    a_next = np.arctan2(nxt[:, 1], nxt[:, 0])
    return np.mod(a_prev - a_next, 2 * math.pi)


def is_convex(p: Polygon, tol: float = 1e-12) -> bool:
    if p.holes:
        return False
    return bool(np.all(interior_angles(p.outer) <= math.pi + tol))


def max_chord(p: Polygon) -> float:
    """Longest line cross-section of a convex polygon (its diameter)."""
    if not is_convex(p):
        raise GeometryError("max_chord requires a convex polygon")
    return _diameter_of_points(p.outer)


def halfplanes(p: Polygon) -> tuple[np.ndarray, np.ndarray]:
    """Unit outward normals ``A`` and offsets ``b`` with p = {x : A x <= b}.

    Edges of length zero are impossible by construction; collinear vertices
    give repeated half-planes, which is harmless.
    """
    if not is_convex(p):
        raise GeometryError("half-plane form requires a convex polygon")
    v = p.outer
    d = np.roll(v, -1, axis=0) - v
    n = np.column_stack([d[:, 1], -d[:, 0]])
    n /= np.linalg.norm(n, axis=1)[:, None]
    return n, np.einsum("ij,ij->i", n, v)


def convex_signed_distance(p: Polygon, pts: np.ndarray) -> np.ndarray:
    """max_i (a_i x - b_i): negative inside, zero on the boundary."""
    A, b = halfplanes(p)
    return (np.atleast_2d(pts) @ A.T - b).max(axis=1)


def sample_boundary(p: Polygon, n: int) -> np.ndarray:
    """Roughly ``n`` points spread uniformly by arc length over all loops."""
    s, e, _ = p.edges()
    lengths = np.linalg.norm(e - s, axis=1)
    counts = np.maximum(1, np.round(n * lengths / lengths.sum()).astype(int))
    chunks = [s[i] + np.outer(np.arange(c) / c, e[i] - s[i]) for i, c in enumerate(counts)]
    return np.vstack(chunks)


# ---------------------------------------------------------------- John ellipse


def _john_objective(x, A, b, mu):
    p_, q_, r_, c1, c2 = x
    det = p_ * r_ - q_ * q_
    if p_ <= 0 or det <= 0:
        return math.inf
    u = np.column_stack([p_ * A[:, 0] + q_ * A[:, 1], q_ * A[:, 0] + r_ * A[:, 1]])
    s = b - A @ np.array([c1, c2]) - np.linalg.norm(u, axis=1)
    if np.any(s <= 0):
        return math.inf
    return -math.log(det) - mu * float(np.log(s).sum())


def _john_derivatives(x, A, b, mu):
    p_, q_, r_, c1, c2 = x
    det = p_ * r_ - q_ * q_
    g = np.zeros(5)
    H = np.zeros((5, 5))
    # -log det B
    g[:3] = -np.array([r_, -2 * q_, p_]) / det
    H[:3, :3] = -np.array([
        [-r_ * r_, 2 * q_ * r_, -q_ * q_],
        [2 * q_ * r_, -2 * det - 4 * q_ * q_, 2 * q_ * p_],
        [-q_ * q_, 2 * q_ * p_, -p_ * p_],
    ]) / det**2
    u = np.column_stack([p_ * A[:, 0] + q_ * A[:, 1], q_ * A[:, 0] + r_ * A[:, 1]])
    nu = np.hypot(u[:, 0], u[:, 1])
    s = b - A @ np.array([c1, c2]) - nu
    # D_i maps (p, q, r) to B a_i; rows of D_i^T u_i
    a1, a2 = A[:, 0], A[:, 1]
    Dtu = np.column_stack([a1 * u[:, 0], a2 * u[:, 0] + a1 * u[:, 1], a2 * u[:, 1]])
    ds = np.hstack([-Dtu / nu[:, None], -A])
    # D^T (I/nu - u u^T/nu^3) D, assembled per edge
    D = np.zeros((len(b), 2, 3))
    D[:, 0, 0], D[:, 0, 1] = a1, a2
    D[:, 1, 1], D[:, 1, 2] = a1, a2
    P = np.eye(2)[None] / nu[:, None, None] - np.einsum("ki,kj->kij", u, u) / nu[:, None, None] ** 3
    DPD = np.einsum("kai,kab,kbj->kij", D, P, D)
    w = mu / s
    g += -(ds * w[:, None]).sum(0)
    H += np.einsum("k,ki,kj->ij", w / s, ds, ds)
    H[:3, :3] += np.einsum("k,kij->ij", w, DPD)
    return g, H


def john_ellipse(p: Polygon, tol: float = 1e-9, max_iter: int = 500) -> Ellipse:
    """Maximum-area ellipse inscribed in a convex polygon.

    Solves max log det B subject to ||B a_i|| + a_i.c <= b_i by a log-barrier
    path with damped Newton centering. Coordinates are centered and scaled to
    unit diameter internally.
    """
    if not is_convex(p):
        raise GeometryError("john_ellipse requires a convex polygon")
    A, b = halfplanes(p)
    centroid = np.asarray(p.to_shapely().centroid.coords[0])
    scale = max_chord(p)
    b = (b - A @ centroid) / scale
    slack = b.min()
    x = np.array([0.5 * slack, 0.0, 0.5 * slack, 0.0, 0.0])
    m = len(b)
    mu = 1.0
    iters = 0
    while True:
        # damped Newton centering at fixed barrier weight mu
        for _ in range(max_iter):
            iters += 1
            if iters > max_iter:
                raise SolverError(f"john_ellipse did not converge in {max_iter} iterations")
            g, H = _john_derivatives(x, A, b, mu)
            step = -np.linalg.solve(H, g)
            decrement = float(-g @ step)
            if decrement < 1e-12:
                break
            f0 = _john_objective(x, A, b, mu)
            t = 1.0
            while t > 1e-12 and _john_objective(x + t * step, A, b, mu) > f0 + 0.25 * t * (g @ step):
                t *= 0.5
            if t <= 1e-12:
                break
            x = x + t * step
        # KKT residual of the barrier problem is the duality gap m * mu
        if m * mu < tol * 1e-3:
            break
        mu *= 0.1
    p_, q_, r_, c1, c2 = x
    B = np.array([[p_, q_], [q_, r_]]) * scale
    center = centroid + scale * np.array([c1, c2])
    return Ellipse(center, B @ B)


# ---------------------------------------------------------------- sandwich


def rect_sandwich(p: Polygon, n_samples: int = 10_000) -> RectSandwich:
    """Rectangles R = J/sqrt(2) box and Q = 2 J box in the John frame."""
    J = john_ellipse(p)
    a1, a2 = J.axes
    a = np.array([a1, a2])
    sw = RectSandwich(a / math.sqrt(2.0), 2.0 * a, J.rotation, J.center)
    diam = max_chord(p)
    tol = 1e-9 * diam
    r_pts = _rect_boundary(sw.r_corners, n_samples)
    if convex_signed_distance(p, r_pts).max() > tol:
        raise SolverError("R is not contained in the polygon (John ellipse inaccurate)")
    q_local = (sample_boundary(p, n_samples) - sw.center) @ sw.rotation
    excess = (np.abs(q_local) - sw.q_half).max()
    if excess > tol:
        raise SolverError("polygon is not contained in Q (John ellipse inaccurate)")
    return sw


def _rect_boundary(corners: np.ndarray, n: int) -> np.ndarray:
    k = max(1, n // 4)
    t = np.arange(k)[:, None] / k
    return np.vstack([corners[i] + t * (corners[(i + 1) % 4] - corners[i]) for i in range(4)])


# ---------------------------------------------------------------- decomposition


def _bisector_cut(loop: np.ndarray, i: int, angle: float):
    """First boundary hit of the interior angle bisector ray from vertex i.

    Returns (edge index j, parameter s on edge j, hit point).
    """
    n = len(loop)
    v = loop[i]
    w = loop[(i + 1) % n]
    d = (w - v) / np.linalg.norm(w - v)
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    ray = np.array([c * d[0] - s * d[1], s * d[0] + c * d[1]])
    starts = loop
    ends = np.roll(loop, -1, axis=0)
    e = ends - starts
    # solve v + t ray = start + s e
    den = ray[0] * e[:, 1] - ray[1] * e[:, 0]
    diff = starts - v
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (diff[:, 0] * e[:, 1] - diff[:, 1] * e[:, 0]) / den
        u = (diff[:, 0] * ray[1] - diff[:, 1] * ray[0]) / den
    scale = np.abs(e).max()
    eps = 1e-12
    ok = (np.abs(den) > 1e-14 * scale) & (t > eps * scale) & (u >= -eps) & (u <= 1 + eps)
    ok[i] = False
    ok[(i - 1) % n] = False
    if not ok.any():
        raise GeometryError("bisector ray does not hit the boundary")
    j = int(np.flatnonzero(ok)[np.argmin(t[ok])])
    return j, float(np.clip(u[j], 0.0, 1.0)), v + t[j] * ray


def _split(loop: np.ndarray, tags: list[str], i: int, j: int, s: float, x: np.ndarray):
    n = len(loop)
    snap = 1e-10
    if s <= snap:
        hit_idx, new_vertex = j, False
    elif s >= 1 - snap:
        hit_idx, new_vertex = (j + 1) % n, False
    else:
        hit_idx, new_vertex = None, True
    if np.linalg.norm(x - loop[i]) < 1e-12:
        raise GeometryError("degenerate cut of length < 1e-12")

    def walk(a, b):
        out = [a]
        while out[-1] != b:
            out.append((out[-1] + 1) % n)
        return out

    if not new_vertex:
        idx_a = walk(i, hit_idx)
        idx_b = walk(hit_idx, i)
        piece_a = (loop[idx_a], [tags[k] for k in idx_a[:-1]] + [NEUMANN])
        piece_b = (loop[idx_b], [tags[k] for k in idx_b[:-1]] + [NEUMANN])
    else:
        idx_a = walk(i, j)
        idx_b = walk((j + 1) % n, i)
        pa = np.vstack([loop[idx_a], x])
        ta = [tags[k] for k in idx_a] + [NEUMANN]
        pb = np.vstack([x, loop[idx_b]])
        tb = [tags[j]] + [tags[k] for k in idx_b[:-1]] + [NEUMANN]
        piece_a, piece_b = (pa, ta), (pb, tb)
    return [piece_a, piece_b]


def convex_decompose(p: Polygon) -> list[Polygon]:
    """Split a simply connected polygon into convex pieces by cutting along
    the interior-angle bisector of reflex vertices.

    The reflex vertex with the largest angle is cut first (lowest index on
    ties). Cut edges are tagged Neumann in the pieces.
    """
    if p.holes:
        raise GeometryError("convex_decompose only handles simply connected polygons")
    work = [(np.array(p.outer), list(p.edge_tags[0]))]
    done = []
    while work:
        loop, tags = work.pop(0)
        ang = interior_angles(loop)
        reflex = np.flatnonzero(ang > math.pi + 1e-12)
        if len(reflex) == 0:
            done.append(Polygon((loop,), (tuple(tags),), validate=False))
            continue
        i = int(reflex[np.lexsort((reflex, -ang[reflex]))[0]])
        j, s, x = _bisector_cut(loop, i, ang[i])
        for piece, ptags in _split(loop, tags, i, j, s, x):
            piece, ptags = _drop_duplicates(piece, ptags)
            if abs(_signed_area(piece)) < 1e-14 * max(1.0, abs(_signed_area(loop))):
                raise GeometryError("degenerate piece produced by a cut")
            work.append((piece, ptags))
    return done


def _drop_duplicates(loop: np.ndarray, tags: list[str], tol: float = 1e-14):
    keep = ~np.all(np.abs(loop - np.roll(loop, -1, axis=0)) < tol, axis=1)
    return loop[keep], [t for t, k in zip(tags, keep) if k]


# ---------------------------------------------------------------- covering


def square_cover(p: Polygon, h: float) -> list[Polygon]:
    """Nonempty intersections of the grid squares h*(i, j) + [0, h]^2 with p.

    Disconnected intersections contribute one polygon per component.
    Intersections with zero area (touching along an edge) are dropped.
    """
    if not h > 0:
        raise GeometryError("h must be positive")
    sp = p.to_shapely()
    xmin, ymin, xmax, ymax = sp.bounds
    i0, i1 = math.floor(xmin / h), math.ceil(xmax / h)
    j0, j1 = math.floor(ymin / h), math.ceil(ymax / h)
    cells = []
    area_tol = 1e-12 * h * h
    for i in range(i0, i1):
        for j in range(j0, j1):
            inter = sp.intersection(_shapely_box(i * h, j * h, (i + 1) * h, (j + 1) * h))
            for g in getattr(inter, "geoms", [inter]):
                if g.geom_type != "Polygon" or g.area <= area_tol:
                    continue
                rings = [np.asarray(g.exterior.coords)[:-1]]
                rings += [np.asarray(r.coords)[:-1] for r in g.interiors]
                rings = [_drop_duplicates(r, [DIRICHLET] * len(r), 1e-12 * h)[0] for r in rings]
                cells.append(Polygon(tuple(rings), validate=False))
    return cells


def regular_polygon(n: int, radius: float = 1.0, center: Sequence[float] = (0.0, 0.0),
                    phase: float = 0.0) -> Polygon:
    t = phase + 2 * math.pi * np.arange(n) / n
    pts = np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])
    return Polygon((pts,))


def rectangle(x0: float, y0: float, x1: float, y1: float) -> Polygon:
    return Polygon((np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]),))


def rectangle_sides(p: Polygon, tol: float = 1e-12) -> tuple[float, float] | None:
    """Side lengths if p is a rectangle (any orientation), else None."""
    if p.holes or len(p.outer) != 4:
        return None
    ang = interior_angles(p.outer)
    if not np.allclose(ang, math.pi / 2, atol=tol * 1e3):
        return None
    v = p.outer
    return float(np.linalg.norm(v[1] - v[0])), float(np.linalg.norm(v[2] - v[1]))


def random_convex_polygon(rng: np.random.Generator, n_vertices: int, max_aspect: float = 4.0) -> Polygon:
    """Random convex n-gon: sorted angles on a random rotated ellipse.

    Consecutive angles are kept at least a tenth of the mean spacing apart
    so no vertex is nearly straight or nearly coincident.
    """
    if n_vertices < 3:
        raise ValueError("need at least 3 vertices")
    gaps = rng.uniform(0.1, 1.0, n_vertices)
    t = rng.uniform(0, 2 * math.pi) + 2 * math.pi * np.cumsum(gaps) / gaps.sum()
    b = rng.uniform(1.0 / max_aspect, 1.0)
    rot = rng.uniform(0, math.pi)
    c, s = math.cos(rot), math.sin(rot)
    pts = np.column_stack([np.cos(t), b * np.sin(t)]) @ np.array([[c, s], [-s, c]])
    return Polygon((pts + rng.uniform(-1, 1, 2),))
