import math

import numpy as np
import pytest

from spectral_count import bounds, fem
from spectral_count.geometry import GeometryError, rectangle
from spectral_count.spectra import BoxDomain, count_N_box, unit_ball_volume


def test_convex_constants_closed_form():
    c1, c2 = bounds.convex_constants(2)
    assert c1 == pytest.approx(math.pi / 184**2 / 2**9, rel=1e-14)
    assert c2 == pytest.approx(92**2 * 2**8, rel=1e-14)
    assert c1 == pytest.approx(1.812e-7, rel=1e-3)
    assert c2 == 2166784


@pytest.mark.parametrize("n", [2, 3, 4])
def test_constants_through_E_agree(n):
    assert np.allclose(bounds.convex_constants(n), bounds.convex_constants_from_E(n), rtol=1e-13)


def test_cross_section_constants():
    c1, c2 = bounds.convex_constants(2)
    lo, hi = bounds.cross_section_constants(2)
    assert lo == pytest.approx(4 * c1)
    assert hi == pytest.approx(4**4 / unit_ball_volume(1) ** 2 * c2)
    assert hi == pytest.approx(64 * c2)


def test_polygon_constants():
    c1, c2 = bounds.polygon_constants(4)
    assert c1 == pytest.approx(2.404825557695773 / (4 * math.sqrt(2 * math.pi) * 12))
    assert c2 == 55 * 4
    with pytest.raises(ValueError):
        bounds.polygon_constants(2)


def test_sandwiches_on_square(unit_square):
    count = count_N_box(BoxDomain((1.0, 1.0)))
    reps = [*bounds.verify_convex_sandwich(unit_square, count=count),
            *bounds.verify_cross_section(unit_square, count=count),
            *bounds.verify_polygon_bounds(unit_square, count=count)]
    assert all(r.passed for r in reps)
    assert reps[1].lhs == 4 and reps[1].rhs == pytest.approx(bounds.convex_constants(2)[1] * 16)


def test_convex_required(lshape):
    with pytest.raises(GeometryError):
        bounds.verify_convex_sandwich(lshape)


def test_report_serialization():
    r = bounds.BoundReport("x", 1.0, 2.0, {"a": 1})
    d = r.to_dict()
    assert d["pass"] is True and d["ratio"] == 2.0
    assert bounds.reports_to_jsonl([r, r]).count("\n") == 2
    assert "NO" in bounds.render_table([bounds.BoundReport("y", 3.0, 1.0)])


def test_classical_on_triangle(triangle_T):
    fs = fem.fem_spectra(triangle_T, 0.05)
    assert bounds.payne_weinberger(triangle_T, fs).passed
    assert bounds.faber_krahn(triangle_T, fs).passed
    assert all(r.passed for r in bounds.funano_sandwich(triangle_T, spectra=fs))


def test_funano_rectangles_exact(unit_square):
    (r,) = bounds.funano_sandwich(unit_square)
    assert r.passed and r.name == "funano_R_Q"


def test_perimeter_and_iso(triangle_T):
    assert bounds.perimeter_chord(triangle_T).passed
    assert all(r.passed for r in bounds.iso_ratio_sandwich(triangle_T))


def test_mixed_fg_plane():
    L = np.ones(5)
    f, g = bounds.mixed_fg(L, 0.1)
    assert f == pytest.approx(math.log(1.1))
    assert g == pytest.approx((1.1**2 - 1) / 2)
    assert bounds.mixed_lower_bound(L, 0.1) == pytest.approx(1 / (f * g))


def test_mixed_fg_higher_dimension():
    f, g = bounds.mixed_fg(np.array([1.0]), 0.5, n=3)
    assert f == pytest.approx(1 - 1 / 1.5)
    assert g == pytest.approx((1.5**3 - 1) / 3)
    with pytest.raises(ValueError):
        bounds.mixed_fg(np.array([1.0]), -0.1)


def test_default_h_and_rect_count():
    p = rectangle(0, 0, 1, 3)
    assert bounds.default_h(p) <= 0.25
    assert bounds.polygon_count(p).n_count == count_N_box(BoxDomain((1.0, 3.0))).n_count
