"""Integer-order Bessel functions J_n and the zeros of J_n and J_n'.

Small arguments use the ascending power series; for x > 12 the whole
sequence J_0..J_n comes from Miller's backward recurrence normalized with
J_0 + 2 (J_2 + J_4 + ...) = 1.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

SERIES_LIMIT = 12.0


def _series(n: int, x: float) -> float:
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    half = 0.5 * x
    log_term = n * math.log(half) - math.lgamma(n + 1)
    term = math.exp(log_term)
    total = term
    q = -half * half
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + n))
        total += term
        if abs(term) < 1e-17 * abs(total) and k > half:
            return total


def _backward(nmax: int, x: float) -> np.ndarray:
    start = int(max(nmax, x) + 30 + 4 * math.sqrt(max(nmax, x)))
    start += start % 2
    out = np.zeros(nmax + 1)
    j_next, j_cur = 0.0, 1e-300
    norm = 0.0
    for k in range(start, 0, -1):
        j_prev = 2.0 * k / x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > 1e250:
            j_next *= 1e-250
            j_cur *= 1e-250
            out *= 1e-250
            norm *= 1e-250
        idx = k - 1
        if idx <= nmax:
            out[idx] = j_cur
        if idx % 2 == 0 and idx > 0:
            norm += 2.0 * j_cur
    norm += j_cur
    return out / norm


def besselj_all(nmax: int, x: float) -> np.ndarray:
    """J_0(x), ..., J_nmax(x) for x >= 0."""
    if x < 0:
        raise ValueError("x must be non-negative")
    if x <= SERIES_LIMIT:
        return np.array([_series(n, x) for n in range(nmax + 1)])
    return _backward(nmax, x)


def besselj(n: int, x: float) -> float:
    n = int(n)
    if n < 0:
        return (-1) ** n * besselj(-n, x)
    if x < 0:
        return (-1) ** n * besselj(n, -x)
    if x <= SERIES_LIMIT:
        return _series(n, x)
    return float(_backward(n, x)[n])


def besselj_deriv(n: int, x: float) -> float:
    """J_n'(x) = (J_{n-1}(x) - J_{n+1}(x)) / 2, with J_0' = -J_1."""
    if n == 0:
        return -besselj(1, x)
    if x <= SERIES_LIMIT:
        return 0.5 * (_series(n - 1, x) - _series(n + 1, x))
    j = _backward(n + 1, x)
    return 0.5 * (j[n - 1] - j[n + 1])


def _scan_zeros(f, start: float, stop: float | None, count: int | None, step: float = 0.2):
    zeros = []
    a, fa = start, f(start)
    while True:
        b = a + step
        if stop is not None and a > stop:
            break
        fb = f(b)
        if fa == 0.0:
            zeros.append(a)
        elif fa * fb < 0:
            zeros.append(brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
        if count is not None and len(zeros) >= count:
            break
        a, fa = b, fb
    if stop is not None:
        zeros = [z for z in zeros if z <= stop]
    return zeros


def _start(n: int) -> float:
    # first positive zeros of J_n and J_n' both exceed n (and 2.4 for n = 0)
    return max(float(n), 0.5)


@lru_cache(maxsize=4096)
def bessel_zero(n: int, k: int) -> float:
    """k-th positive zero j_{n,k} of J_n."""
    if k < 1 or n < 0:
        raise ValueError("need n >= 0 and k >= 1")
    return _scan_zeros(lambda x: besselj(n, x), _start(n), None, k)[k - 1]


@lru_cache(maxsize=4096)
def bessel_deriv_zero(n: int, k: int) -> float:
    """k-th positive zero j'_{n,k} of J_n' (x = 0 is not counted for n = 0)."""
    if k < 1 or n < 0:
        raise ValueError("need n >= 0 and k >= 1")
    return _scan_zeros(lambda x: besselj_deriv(n, x), _start(n), None, k)[k - 1]


def bessel_zeros_below(n: int, xmax: float, derivative: bool = False) -> list[float]:
    """All positive zeros of J_n (or J_n') not exceeding ``xmax``."""
    f = (lambda x: besselj_deriv(n, x)) if derivative else (lambda x: besselj(n, x))
    if _start(n) > xmax:
        return []
    return _scan_zeros(f, _start(n), xmax, None)
