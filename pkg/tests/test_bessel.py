import numpy as np
import pytest
from scipy import special

from spectral_count.bessel import (bessel_deriv_zero, bessel_zero, bessel_zeros_below, besselj, besselj_all,
                                   besselj_deriv)

from oracles import mp_bessel_zero

XS = [0.0, 0.3, 1.0, 2.404825557695773, 5.0, 11.9, 12.1, 20.0, 47.5, 120.0]


@pytest.mark.parametrize("n", [0, 1, 2, 5, 10, 30])
@pytest.mark.parametrize("x", XS)
def test_besselj_matches_scipy(n, x):
    assert besselj(n, x) == pytest.approx(special.jv(n, x), abs=1e-12)


@pytest.mark.parametrize("n", [0, 1, 3, 8])
@pytest.mark.parametrize("x", XS[1:])
def test_derivative_matches_scipy(n, x):
    assert besselj_deriv(n, x) == pytest.approx(special.jvp(n, x), abs=1e-12)


def test_all_orders():
    out = besselj_all(12, 25.0)
    assert np.allclose(out, special.jv(np.arange(13), 25.0), atol=1e-13)


def test_negative_order_and_argument():
    assert besselj(-3, 2.0) == pytest.approx(-special.jv(3, 2.0))
    assert besselj(2, -1.5) == pytest.approx(special.jv(2, 1.5))


@pytest.mark.parametrize("n,k", [(0, 1), (0, 2), (1, 1), (2, 3), (7, 1), (15, 4)])
def test_zeros_against_mpmath(n, k):
    assert bessel_zero(n, k) == pytest.approx(mp_bessel_zero(n, k), rel=1e-13)


@pytest.mark.parametrize("n,k", [(0, 1), (1, 1), (1, 2), (2, 1), (9, 2)])
def test_derivative_zeros_against_mpmath(n, k):
    # mpmath counts x = 0 as the first zero of J_0'
    kk = k + 1 if n == 0 else k
    assert bessel_deriv_zero(n, k) == pytest.approx(mp_bessel_zero(n, kk, derivative=True), rel=1e-12)


def test_zeros_below():
    z = bessel_zeros_below(0, 20.0)
    assert np.allclose(z, special.jn_zeros(0, len(z)), rtol=1e-13)
    assert special.jn_zeros(0, len(z) + 1)[-1] > 20.0
    assert bessel_zeros_below(10, 5.0) == []


def test_invalid():
    with pytest.raises(ValueError):
        bessel_zero(0, 0)
