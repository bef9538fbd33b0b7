"""P1 finite elements for Dirichlet, Neumann and mixed Laplace eigenproblems
on polygons."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import triangle as _triangle

from .geometry import DIRICHLET, NEUMANN, GeometryError, Polygon, interior_angles, rectangle_sides
from .spectra import CountResult, Spectrum

SEED = 0x5EED
MIN_ANGLE = 20.0
MAX_REFINE_PASSES = 60


class MeshError(RuntimeError):
    """Triangulation failed to meet its quality contract."""

    def __init__(self, message: str, worst_angle: float | None = None):
        super().__init__(message)
        self.worst_angle = worst_angle


class EigenSolveError(RuntimeError):
    """Eigensolver did not converge; carries the residuals it reached."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: tuple[str, ...]
    h: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)

    def angles(self) -> np.ndarray:
        """Triangle angles in degrees, shape (T, 3); column i is at vertex i."""
        p = self.vertices[self.triangles]
        a = p[:, [1, 2, 0]] - p
        b = p[:, [2, 0, 1]] - p
        cos = (a * b).sum(-1) / (np.linalg.norm(a, axis=2) * np.linalg.norm(b, axis=2))
        return np.degrees(np.arccos(np.clip(cos, -1, 1)))

    def with_tags(self, tag: str) -> "Mesh":
        return replace(self, boundary_tags=(tag,) * len(self.boundary_edges))

    def dirichlet_vertices(self) -> np.ndarray:
        mask = np.array([t == DIRICHLET for t in self.boundary_tags], dtype=bool)
        return np.unique(self.boundary_edges[mask].ravel()) if mask.any() else np.zeros(0, dtype=int)

    def dump(self) -> str:
        """ASCII dump: VERTICES / TRIANGLES / BOUNDARY sections, 0-based indices."""
        out = io.StringIO()
        out.write(f"# h={float(self.h)!r}\nVERTICES {len(self.vertices)}\n")
        for x, y in self.vertices:
            out.write(f"{float(x)!r} {float(y)!r}\n")
        out.write(f"TRIANGLES {len(self.triangles)}\n")
        for a, b, c in self.triangles:
            out.write(f"{a} {b} {c}\n")
        out.write(f"BOUNDARY {len(self.boundary_edges)}\n")
        for (a, b), t in zip(self.boundary_edges, self.boundary_tags):
            out.write(f"{a} {b} {t}\n")
        return out.getvalue()

    @classmethod
    def load(cls, text: str) -> "Mesh":
        lines = [l.strip() for l in text.splitlines() if l.strip()]
        h = 0.0
        if lines[0].startswith("# h="):
            h = float(lines[0][4:])
        pos = next(i for i, l in enumerate(lines) if l.startswith("VERTICES"))

        def section(name, pos):
            head = lines[pos].split()
            if head[0] != name:
                raise ValueError(f"expected section {name}")
            n = int(head[1])
            return [l.split() for l in lines[pos + 1:pos + 1 + n]], pos + 1 + n

        verts, pos = section("VERTICES", pos)
        tris, pos = section("TRIANGLES", pos)
        bnd, pos = section("BOUNDARY", pos)
        return cls(np.array(verts, dtype=float).reshape(-1, 2), np.array(tris, dtype=int).reshape(-1, 3),
                   np.array([b[:2] for b in bnd], dtype=int).reshape(-1, 2), tuple(b[2] for b in bnd), h)


# ---------------------------------------------------------------- meshing


def _structured_rectangle(p: Polygon, h: float) -> Mesh:
    v = p.outer
    e1, e2 = v[1] - v[0], v[3] - v[0]
    nx = max(1, math.ceil(np.linalg.norm(e1) / h - 1e-9))
    ny = max(1, math.ceil(np.linalg.norm(e2) / h - 1e-9))
    s, t = np.meshgrid(np.linspace(0, 1, nx + 1), np.linspace(0, 1, ny + 1), indexing="ij")
    pts = v[0] + s.ravel()[:, None] * e1 + t.ravel()[:, None] * e2
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    tris = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    tags = p.edge_tags[0]
    edges, etags = [], []
    sides = [idx[:, 0], idx[-1, :], idx[::-1, -1], idx[0, ::-1]]
    for side, tag in zip(sides, tags):
        edges += list(zip(side[:-1], side[1:]))
        etags += [tag] * (len(side) - 1)
    return Mesh(pts, tris, np.array(edges, dtype=int), tuple(etags), h)


def _split_segments(p: Polygon, h: float):
    pts, segs, marks = [], [], []
    for loop, tags in zip(p.loops, p.edge_tags):
        base = len(pts)
        loop_pts = []
        loop_marks = []
        n = len(loop)
        for i in range(n):
            a, b = loop[i], loop[(i + 1) % n]
            k = max(1, math.ceil(np.linalg.norm(b - a) / h - 1e-9))
            for j in range(k):
                loop_pts.append(a + (b - a) * (j / k))
                loop_marks.append(1 if tags[i] == DIRICHLET else 2)
        m = len(loop_pts)
        pts.extend(loop_pts)
        segs.extend([(base + i, base + (i + 1) % m) for i in range(m)])
        marks.extend(loop_marks)
    return np.array(pts), np.array(segs, dtype=np.int32), np.array(marks, dtype=np.int32)


def _mesh_from_triangle(out: dict, h: float) -> Mesh:
    segs = out["segments"]
    marks = out["segment_markers"].ravel()
    tags = tuple(DIRICHLET if m == 1 else NEUMANN for m in marks)
    return Mesh(out["vertices"], out["triangles"], segs, tags, h)


def triangulate(p: Polygon, h: float, size: Callable[[np.ndarray], np.ndarray] | None = None,
                min_angle: float = MIN_ANGLE, structured: bool | None = None) -> Mesh:
    """Conforming triangulation of ``p`` with edges no longer than ``h``.

    ``size`` optionally maps centroids (T, 2) to a smaller local edge bound,
    used to grade meshes into thin passages. Rectangles get a structured
    mesh by default, in which case ``h`` bounds the legs of the right
    triangles. Boundary edges inherit the polygon's tags.
    """
    if not h > 0:
        raise GeometryError("h must be positive")
    if structured is None:
        structured = size is None and rectangle_sides(p) is not None
    if structured:
        if rectangle_sides(p) is None:
            raise GeometryError("structured meshes need a rectangle")
        return _structured_rectangle(p, h)
    pts, segs, marks = _split_segments(p, h)
    data = dict(vertices=pts, segments=segs, segment_markers=marks)
    holes = [np.asarray(Polygon((hl,), validate=False).to_shapely().representative_point().coords[0])
             for hl in p.holes]
    if holes:
        data["holes"] = np.array(holes)
    eq_area = math.sqrt(3) / 4 * h * h
    opts = f"pq{min_angle:g}" if min_angle else "p"
    out = _triangle.triangulate(data, f"{opts}a{float(eq_area)!r}Q")
    for _ in range(MAX_REFINE_PASSES):
        mesh = _mesh_from_triangle(out, h)
        target = np.full(len(mesh.triangles), h)
        if size is not None:
            cent = mesh.vertices[mesh.triangles].mean(axis=1)
            target = np.minimum(target, size(cent))
        too_long = mesh.edge_lengths().max(axis=1) > target * (1 + 1e-9)
        if not too_long.any():
            break
        max_area = np.where(too_long, np.minimum(0.5 * mesh.areas, math.sqrt(3) / 4 * target**2), -1.0)
        out = _triangle.triangulate(dict(out, triangle_max_area=max_area), f"r{opts}aQ")
    else:
        raise MeshError("edge-length refinement did not terminate")
    _check_quality(p, mesh, min_angle)
    return mesh


def _check_quality(p: Polygon, mesh: Mesh, min_angle: float) -> None:
    if np.any(mesh.areas <= 1e-14 * mesh.h**2):
        raise MeshError("degenerate triangle in mesh")
    if not min_angle:
        return
    ang = mesh.angles()
    # Delaunay refinement cannot improve triangles near input corners sharper
    # than 60 degrees; those within one local mesh size are exempt
    corners = np.vstack([loop[interior_angles(loop) < math.radians(60.0)] for loop in _ccw_loops(p)])
    exempt = np.zeros(len(mesh.triangles), dtype=bool)
    if len(corners):
        pts = mesh.vertices[mesh.triangles]
        cent = pts.mean(axis=1)
        reach = mesh.edge_lengths().max(axis=1)
        for c in corners:
            d = np.linalg.norm(cent - c, axis=1)
            exempt |= d <= mesh.h + reach
    worst = ang[~exempt].min() if (~exempt).any() else 180.0
    if worst < min_angle - 1e-6:
        raise MeshError(f"minimum angle {worst:.3f} below {min_angle}", worst)


def _ccw_loops(p: Polygon):
    # interior angles of holes are measured from the domain side
    yield p.outer
    for h in p.holes:
        yield h


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement: each triangle splits into four similar ones."""
    tris = mesh.triangles
    edges = np.sort(np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    n = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    verts = np.vstack([mesh.vertices, mids])
    t = len(tris)
    m01, m12, m20 = n + inv[:t], n + inv[t:2 * t], n + inv[2 * t:]
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    new = np.vstack([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ])
    lookup = {tuple(e): n + i for i, e in enumerate(uniq)}
    bedges, btags = [], []
    for (u, v), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        mid = lookup[(min(u, v), max(u, v))]
        bedges += [(u, mid), (mid, v)]
        btags += [tag, tag]
    return Mesh(verts, new, np.array(bedges, dtype=int), tuple(btags), mesh.h / 2)


# ---------------------------------------------------------------- assembly


def element_matrices(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Local P1 stiffness (T, 3, 3) and consistent mass (T, 3, 3)."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.areas
    # gradients of barycentric coordinates: rotated opposite edges / (2 area)
    e = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
    grads = np.stack([-e[:, :, 1], e[:, :, 0]], axis=2) / (2 * area)[:, None, None]
    Ke = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    Me = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))[None]
    return Ke, Me


def assemble(mesh: Mesh, eliminate: bool = True):
    """Global stiffness and mass matrices (CSR).

    With ``eliminate`` the rows and columns of Dirichlet-tagged boundary
    vertices are deleted; the kept vertex indices are returned third.
    """
    Ke, Me = element_matrices(mesh)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    free = np.arange(n)
    if eliminate:
        fixed = mesh.dirichlet_vertices()
        free = np.setdiff1d(free, fixed)
        K = K[free][:, free]
        M = M[free][:, free]
    return K, M, free


# ---------------------------------------------------------------- eigensolver


@dataclass(frozen=True, eq=False)
class EigenSolveReport:
    values: Spectrum
    residuals: np.ndarray
    iterations: int
    h_sequence: tuple[float, ...] = ()
    raw: np.ndarray = field(default=None, repr=False)
    vectors: np.ndarray = field(default=None, repr=False)

    def to_json(self) -> str:
        return json.dumps({"values": [float(v) for v in self.raw],
                           "residuals": [float(r) for r in self.residuals],
                           "h_sequence": [float(h) for h in self.h_sequence]})


def solve_eigs(K, M, k: int, bc: str = "neumann", h: float | None = None,
               tol: float = 1e-8, seed: int = SEED) -> EigenSolveReport:
    """Lowest ``k`` eigenpairs of K u = theta M u by shift-invert Lanczos.

    The shift sits slightly below zero so K - sigma M stays positive definite
    for Neumann problems; the start vector is seeded for reproducibility.
    """
    n = K.shape[0]
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= matrix dimension")
    sigma = -1e-6 * K.diagonal().sum() / M.diagonal().sum()
    if k >= n - 1 or n < 40:
        from scipy.linalg import eigh

        theta, U = eigh(K.toarray(), M.toarray())
        theta, U = theta[:k], U[:, :k]
        count = 1
    else:
        lu = spla.splu((K - sigma * M).tocsc())
        calls = [0]

        def apply(x):
            calls[0] += 1
            return lu.solve(x)

        op = spla.LinearOperator((n, n), matvec=apply, dtype=float)
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            theta, U = spla.eigsh(K, k=k, M=M, sigma=sigma, which="LM", OPinv=op, v0=v0,
                                  ncv=min(n, max(2 * k + 1, 20)), maxiter=5000)
        except spla.ArpackNoConvergence as exc:
            raise EigenSolveError("shift-invert Lanczos did not converge",
                                  getattr(exc, "eigenvalues", None)) from exc
        count = calls[0]
        order = np.argsort(theta)
        theta, U = theta[order], U[:, order]
    res = np.linalg.norm(K @ U - (M @ U) * theta, axis=0) / np.linalg.norm(U, axis=0)
    bad = res > tol * np.maximum(np.abs(theta), 1.0)
    if bad.any():
        raise EigenSolveError("eigenpair residuals exceed tolerance", res)
    prov = "fem" if h is None else f"fem(h={h:g})"
    spec = Spectrum.from_values(theta, max(float(theta[-1]), 0.0), bc, prov)
    return EigenSolveReport(spec, res, count, (h,) if h is not None else (), theta, U)


def mesh_eigenvalues(mesh: Mesh, k: int, seed: int = SEED) -> np.ndarray:
    """Lowest ``k`` eigenvalues with the mesh's own boundary tags."""
    K, M, _ = assemble(mesh)
    k = min(k, K.shape[0])
    return solve_eigs(K, M, k, _bc_of(mesh), mesh.h, seed=seed).raw


def _bc_of(mesh: Mesh) -> str:
    tags = set(mesh.boundary_tags)
    if tags == {DIRICHLET}:
        return "dirichlet"
    if tags == {NEUMANN}:
        return "neumann"
    return "mixed"


# ---------------------------------------------------------------- counting


def richardson(coarse: np.ndarray, fine: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Order-2 extrapolation over h, h/2 and the error radius |coarse - fine| / 3."""
    coarse, fine = np.asarray(coarse), np.asarray(fine)
    return (4 * fine - coarse) / 3, np.abs(coarse - fine) / 3


@dataclass(frozen=True, eq=False)
class FemSpectra:
    """Extrapolated Dirichlet lambda_1 and low Neumann eigenvalues."""

    lambda1: float
    lambda1_radius: float
    neumann: np.ndarray
    neumann_radius: np.ndarray
    coarse: dict
    fine: dict
    h_sequence: tuple[float, float]


def _lowest_until(mesh: Mesh, threshold: float, k0: int = 8, seed: int = SEED) -> np.ndarray:
    K, M, _ = assemble(mesh)
    n = K.shape[0]
    k = min(k0, n)
    while True:
        vals = solve_eigs(K, M, k, "neumann", mesh.h, seed=seed).raw
        if vals[-1] > threshold or k == n:
            return vals
        k = min(2 * k, n)


def fem_spectra(p: Polygon, h: float, size=None, mesh: Mesh | None = None,
                n_neumann: int | None = None, margin: float = 1.25, seed: int = SEED) -> FemSpectra:
    """Dirichlet and Neumann eigenvalues on meshes at h and h/2 (nested),
    extrapolated. Neumann values are computed past ``margin * lambda_1``
    unless ``n_neumann`` fixes their number."""
    coarse = mesh if mesh is not None else triangulate(p, h, size=size)
    fine = refine(coarse)
    lam_c = mesh_eigenvalues(coarse.with_tags(DIRICHLET), 1, seed)[0]
    lam_f = mesh_eigenvalues(fine.with_tags(DIRICHLET), 1, seed)[0]
    lam, lam_r = richardson([lam_c], [lam_f])
    if n_neumann is None:
        mu_c = _lowest_until(coarse.with_tags(NEUMANN), margin * lam_c, seed=seed)
        mu_f = mesh_eigenvalues(fine.with_tags(NEUMANN), len(mu_c), seed)
    else:
        mu_c = mesh_eigenvalues(coarse.with_tags(NEUMANN), n_neumann, seed)
        mu_f = mesh_eigenvalues(fine.with_tags(NEUMANN), n_neumann, seed)
    k = min(len(mu_c), len(mu_f))
    mu, mu_r = richardson(mu_c[:k], mu_f[:k])
    # constants lie in the P1 space, so the bottom of a connected domain is exact
    mu[0], mu_r[0] = 0.0, 0.0
    return FemSpectra(float(lam[0]), float(lam_r[0]), mu, mu_r,
                      {"lambda1": lam_c, "neumann": mu_c, "n_vertices": coarse.n_vertices},
                      {"lambda1": lam_f, "neumann": mu_f, "n_vertices": fine.n_vertices},
                      (coarse.h, fine.h))


def count_from_fem(fs: FemSpectra, planar: bool = True) -> CountResult:
    """Count extrapolated mu_j <= lambda_1.

    A pair closer than the combined extrapolation radius cannot be told
    apart from equality; it is counted as a tie (the count uses <=) and the
    result is flagged. ``details['n_strict']`` holds the count without them.
    """
    radius = fs.neumann_radius + fs.lambda1_radius
    diff = fs.neumann - fs.lambda1
    near = np.abs(diff) < radius
    n = int(np.sum((diff <= 0) | near))
    n_strict = int(np.sum((diff <= 0) & ~near))
    if n == len(fs.neumann):
        raise EigenSolveError("Neumann eigenvalues computed do not pass lambda_1")
    if planar and n < 2:
        raise EigenSolveError(f"planar count N = {n} contradicts N >= 2; mesh too coarse?")
    return CountResult(n, fs.lambda1, float(np.abs(diff).min()), bool(near.any()),
                       {"n_strict": n_strict, "neumann": fs.neumann.tolist(),
                        "neumann_radius": fs.neumann_radius.tolist(),
                        "lambda1_radius": fs.lambda1_radius, "h_sequence": list(fs.h_sequence)})


def count_N_fem(p: Polygon, h: float, size=None, seed: int = SEED) -> CountResult:
    """N(p) from P1 eigenvalues at h and h/2 with Richardson extrapolation.

    The result is flagged ambiguous whenever some Neumann eigenvalue lies
    within the combined extrapolation radius of lambda_1.
    """
    return count_from_fem(fem_spectra(p, h, size=size, seed=seed))


def mixed_eigenvalue(p: Polygon, h: float, size=None, extrapolate: bool = True, seed: int = SEED) -> float:
    """First eigenvalue with Dirichlet data on the polygon's D-tagged edges
    and Neumann data on the rest."""
    if all(t == NEUMANN for ts in p.edge_tags for t in ts):
        raise GeometryError("mixed problem needs at least one Dirichlet edge")
    coarse = triangulate(p, h, size=size)
    c = mesh_eigenvalues(coarse, 1, seed)[0]
    if not extrapolate:
        return float(c)
    f = mesh_eigenvalues(refine(coarse), 1, seed)[0]
    return float(richardson([c], [f])[0][0])
