import math

import numpy as np
import pytest

from spectral_count import fem
from spectral_count.geometry import DIRICHLET, NEUMANN, Polygon, rectangle, regular_polygon


def test_structured_square_mesh(unit_square):
    m = fem.triangulate(unit_square, 0.5)
    assert len(m.triangles) == 8
    assert m.area == pytest.approx(1.0)
    assert np.all(m.areas > 0)


def test_unstructured_mesh_quality(lshape):
    m = fem.triangulate(lshape, 0.1)
    assert m.area == pytest.approx(lshape.area)
    assert m.angles().min() >= fem.MIN_ANGLE - 1e-9
    assert m.edge_lengths().max() <= 0.1 * 1.5


def test_refine_halves(triangle_T):
    m = fem.triangulate(triangle_T, 0.1)
    r = fem.refine(m)
    assert len(r.triangles) == 4 * len(m.triangles)
    assert r.area == pytest.approx(m.area)
    assert r.h == pytest.approx(m.h / 2)
    assert len(r.boundary_edges) == 2 * len(m.boundary_edges)


def test_mesh_dump_roundtrip(lshape):
    m = fem.triangulate(lshape, 0.3)
    text = m.dump()
    assert text.splitlines()[1].startswith("VERTICES")
    q = fem.Mesh.load(text)
    assert np.array_equal(q.triangles, m.triangles)
    assert np.allclose(q.vertices, m.vertices)
    assert q.boundary_tags == m.boundary_tags and q.h == m.h


def test_mass_and_stiffness_invariants(unit_square):
    m = fem.triangulate(unit_square, 0.25).with_tags(NEUMANN)
    K, M, _ = fem.assemble(m)
    one = np.ones(K.shape[0])
    assert np.allclose(K @ one, 0.0, atol=1e-12)
    assert one @ (M @ one) == pytest.approx(1.0)
    assert abs(K - K.T).max() < 1e-14


def test_dirichlet_elimination(unit_square):
    m = fem.triangulate(unit_square, 0.25).with_tags(DIRICHLET)
    K, M, free = fem.assemble(m)
    assert K.shape[0] == len(free) == m.n_vertices - len(m.dirichlet_vertices())


def test_square_eigenvalues_converge(unit_square):
    exact = math.pi**2 * np.array([0, 1, 1, 2, 4])
    errs = []
    for h in (0.1, 0.05):
        vals = fem.mesh_eigenvalues(fem.triangulate(unit_square, h).with_tags(NEUMANN), 5)
        assert np.all(vals[1:] >= exact[1:] * (1 - 1e-12))  # conforming P1 is an upper bound
        errs.append(np.abs(vals - exact)[1:].max())
    assert errs[1] < errs[0] / 3


def test_solve_eigs_reproducible(lshape):
    m = fem.triangulate(lshape, 0.1).with_tags(NEUMANN)
    K, M, _ = fem.assemble(m)
    a = fem.solve_eigs(K, M, 6, seed=1)
    b = fem.solve_eigs(K, M, 6, seed=1)
    assert np.array_equal(a.raw, b.raw)
    assert np.all(a.residuals <= 1e-8 * np.maximum(a.raw, 1))
    assert '"residuals"' in a.to_json()


def test_richardson_exact_for_quadratic():
    c, f = np.array([1 + 0.04]), np.array([1 + 0.01])
    v, r = fem.richardson(c, f)
    assert v[0] == pytest.approx(1.0)
    assert r[0] == pytest.approx(0.01)


def test_triangle_lambda1(triangle_T):
    fs = fem.fem_spectra(triangle_T, 0.05, n_neumann=4)
    assert fs.lambda1 == pytest.approx(5 * math.pi**2, rel=5e-3)
    assert fs.neumann[0] == 0.0 and fs.neumann_radius[0] == 0.0


def test_square_count_flags_tie(unit_square):
    r = fem.count_N_fem(unit_square, 0.1)
    assert r.n_count == 4 and r.ambiguous
    assert r.details["n_strict"] <= 4


def test_rectangle_count():
    r = fem.count_N_fem(rectangle(0, 0, 1, 2), 0.1)
    assert r.n_count == 5


def test_mixed_square_one_dirichlet_side():
    p = Polygon.from_vertices([(0, 0), (1, 0), (1, 1), (0, 1)], tags=["D", "N", "N", "N"])
    assert fem.mixed_eigenvalue(p, 0.1) == pytest.approx(math.pi**2 / 4, rel=1e-4)


def test_mixed_rejects_all_neumann(unit_square):
    with pytest.raises(Exception):
        fem.mixed_eigenvalue(unit_square.with_tags(NEUMANN), 0.2)


def test_hole_mesh():
    p = Polygon.from_vertices([(0, 0), (4, 0), (4, 4), (0, 4)], holes=[[(1, 1), (3, 1), (3, 3), (1, 3)]])
    m = fem.triangulate(p, 0.25)
    assert m.area == pytest.approx(12.0, rel=1e-12)


def test_regular_polygon_close_to_disk():
    fs = fem.fem_spectra(regular_polygon(128), 0.08, n_neumann=4)
    j01 = 2.404825557695773
    assert fs.lambda1 == pytest.approx(j01**2, rel=2e-3)
