import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_count.collapse import random_box_partition, subadditivity
from spectral_count.geometry import Polygon, convex_decompose, convex_signed_distance, john_ellipse, \
    random_convex_polygon
from spectral_count.spectra import NEUMANN, BoxDomain, count_N_box

seeds = st.integers(0, 2**32 - 1)


def star_polygon(seed: int) -> Polygon:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 12))
    t = np.sort(rng.uniform(0, 2 * math.pi, n))
    t += np.arange(n) * 1e-3  # keep angles distinct
    r = rng.uniform(0.4, 1.0, n)
    return Polygon.from_vertices(np.column_stack([r * np.cos(t), r * np.sin(t)]))


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_decomposition_conserves_area(seed):
    try:
        p = star_polygon(seed)
    except ValueError:
        return
    pieces = convex_decompose(p)
    assert math.isclose(sum(q.area for q in pieces), p.area, rel_tol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(3, 10))
def test_john_ellipse_inside_and_double_contains(seed, n):
    p = random_convex_polygon(np.random.default_rng(seed), n)
    J = john_ellipse(p)
    diam = np.ptp(p.outer, axis=0).max()
    assert convex_signed_distance(p, J.boundary_points(256)).max() <= 1e-8 * diam
    # every vertex lies in the 2-fold dilate
    d = p.outer - J.center
    q = np.einsum("ij,jk,ik->i", d, np.linalg.inv(J.shape), d)
    assert q.max() <= 4 * (1 + 1e-7)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.3, 3.0), min_size=1, max_size=3), st.floats(0.2, 5.0))
def test_box_scaling_inverse_square(lengths, t):
    b = BoxDomain(tuple(lengths))
    cut = 8 * b.lambda1
    a = b.spectrum(NEUMANN, cut).expanded
    s = b.scaled(t).spectrum(NEUMANN, cut / t**2).expanded
    assert len(a) == len(s)
    assert np.allclose(s, a / t**2, rtol=1e-9, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 2), st.floats(0.5, 2), st.floats(0.5, 2))
def test_product_associativity(a, b, c):
    # (a x b) x c and a x (b x c) are the same box
    cut = 30.0
    sa, sb, sc = (BoxDomain((x,)).spectrum(NEUMANN, cut) for x in (a, b, c))
    from spectral_count.spectra import product_spectrum
    left = product_spectrum(product_spectrum(sa, sb, cut), sc, cut)
    right = product_spectrum(sa, product_spectrum(sb, sc, cut), cut)
    assert np.allclose(left.expanded, right.expanded)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_count_invariant_under_scaling(seed):
    rng = np.random.default_rng(seed)
    L = tuple(rng.uniform(0.5, 3.0, 2))
    assert count_N_box(BoxDomain(L)).n_count == count_N_box(BoxDomain(L).scaled(2.5)).n_count


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_subadditivity(seed):
    rng = np.random.default_rng(seed)
    L = tuple(rng.uniform(0.5, 3.0, 2))
    whole, parts = subadditivity(L, random_box_partition(rng, L, int(rng.integers(1, 6))))
    assert whole <= parts
