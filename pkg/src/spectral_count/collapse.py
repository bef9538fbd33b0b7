"""Exact N for flat products M x eps F and the eps^-m leading asymptotic."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .spectra import (NEUMANN, BoxDomain, CountResult, DiskDomain, FlatModel, ProductDomain, count_N_box,
                      unit_ball_volume)

Fiber = (BoxDomain, DiskDomain)


class GuardError(ValueError):
    """eps is too large for fiber levels past N(F) to be ignored."""

    def __init__(self, message: str, eps0: float):
        super().__init__(message)
        self.eps0 = eps0


@dataclass(frozen=True, eq=False)
class FiberData:
    lambda1: float
    neumann: np.ndarray  # expanded, sorted, through the first value above lambda1
    n_count: int

    @property
    def gaps(self) -> np.ndarray:
        return self.lambda1 - self.neumann[:self.n_count]

    @property
    def next_above(self) -> float:
        return float(self.neumann[self.n_count])


def fiber_data(fiber) -> FiberData:
    lam = fiber.lambda1
    cut = 1.5 * lam
    while True:
        mu = fiber.spectrum(NEUMANN, cut).expanded
        n = int(np.sum(mu <= lam * (1 + 1e-10)))
        if n < len(mu) and mu[-1] > lam:
            return FiberData(lam, mu, n)
        cut *= 2


def eps0(pd_or_base, fiber=None) -> float:
    """Largest eps for which levels past N(F) cannot reach lambda_1(Omega_eps):
    eps0^2 = (mu_{N(F)+1}(F) - lambda_1(F)) / lambda_1(M), infinite if the
    base has no Dirichlet bottom."""
    base, fiber = (pd_or_base.base, pd_or_base.fiber) if fiber is None else (pd_or_base, fiber)
    fd = fiber_data(fiber)
    lam_m = base.lambda1
    if lam_m <= 0:
        return math.inf
    return math.sqrt((fd.next_above - fd.lambda1) / lam_m)


def collapse_lambda1(pd: ProductDomain) -> float:
    return pd.base.lambda1 + pd.fiber.lambda1 / pd.eps**2


def collapse_exact(pd: ProductDomain, check_guard: bool = True) -> CountResult:
    """N(M x eps F) = sum over fiber levels k <= N(F) of
    #{l : mu_l(M) + mu_k(F)/eps^2 <= lambda_1(M) + lambda_1(F)/eps^2}."""
    fd = fiber_data(pd.fiber)
    e0 = eps0(pd)
    if check_guard and not pd.eps < e0:
        raise GuardError(f"eps = {pd.eps} is not below eps0 = {e0:.6g}", e0)
    lam = collapse_lambda1(pd)
    base_lam = pd.base.lambda1
    per_level = []
    for mu in fd.neumann[:fd.n_count]:
        budget = base_lam + (fd.lambda1 - mu) / pd.eps**2
        per_level.append(pd.base.count(budget, NEUMANN))
    n = int(sum(per_level))
    return CountResult(n, lam, math.nan, False, {"per_level": per_level, "eps0": e0})


def collapse_asymptotic(pd: ProductDomain) -> float:
    """omega_m/(2 pi)^m |M| sum_{j <= N(F)} (lambda_1(F) - mu_j(F))^{m/2} eps^-m."""
    fd = fiber_data(pd.fiber)
    m = pd.m
    gaps = np.clip(fd.gaps, 0.0, None)
    s = float(np.sum(gaps ** (m / 2))) if m else float(fd.n_count)
    return unit_ball_volume(m) / (2 * math.pi) ** m * pd.base.volume * s * pd.eps**-m


@dataclass(frozen=True)
class ConvergenceRow:
    eps: float
    exact: int | None
    asymptotic: float
    rel_error: float | None
    error: str = ""


def collapse_convergence(base: FlatModel, fiber, eps_grid: Iterable[float]) -> list[ConvergenceRow]:
    """Exact count, leading term and |exact - leading| / exact per eps."""
    rows = []
    for eps in eps_grid:
        pd = ProductDomain(base, fiber, float(eps))
        asym = collapse_asymptotic(pd)
        try:
            exact = collapse_exact(pd).n_count
        except GuardError as exc:
            rows.append(ConvergenceRow(float(eps), None, asym, None, str(exc)))
            continue
        rows.append(ConvergenceRow(float(eps), exact, asym, abs(exact - asym) / exact))
    return rows


def convergence_improves(rows: Sequence[ConvergenceRow], threshold: float | None = None) -> bool:
    """Relative error strictly decreasing along the grid (and below
    ``threshold`` at the last row when given)."""
    errs = [r.rel_error for r in rows if r.rel_error is not None]
    if len(errs) < 2:
        return False
    ok = all(b < a for a, b in zip(errs, errs[1:]))
    return ok and (threshold is None or errs[-1] <= threshold)


def convergence_to_csv(rows: Sequence[ConvergenceRow]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["eps", "exact", "asymptotic", "rel_error"])
    for r in rows:
        w.writerow([repr(float(r.eps)), "" if r.exact is None else r.exact, repr(float(r.asymptotic)),
                     "" if r.rel_error is None else repr(float(r.rel_error))])
    return out.getvalue()


def collapse_iso_ratio(pd: ProductDomain) -> tuple[float, float]:
    """(|dO|^{n+m} / |O|^{n+m-1} exact, eps^-m |M| |dF|^{n+m} / |F|^{n+m-1})."""
    d = pd.n + pd.m
    exact = pd.boundary_volume**d / pd.volume ** (d - 1)
    f = pd.fiber
    leading = pd.eps ** -pd.m * pd.base.volume * f.boundary_volume**d / f.volume ** (d - 1)
    return exact, leading


def unit_ball_fiber(n: int):
    if n == 1:
        return BoxDomain((2.0,))
    if n == 2:
        return DiskDomain(1.0)
    raise ValueError("unit-ball fibers are available for n = 1, 2")


def tube_constant(n: int, m: int, vol_M: float) -> float:
    """Leading coefficient of eps^-m in N for an eps-tube around an
    m-dimensional M with unit-ball fibers of dimension n."""
    fd = fiber_data(unit_ball_fiber(n))
    if m == 0:
        return float(fd.n_count)
    gaps = np.clip(fd.gaps, 0.0, None)
    return unit_ball_volume(m) / (2 * math.pi) ** m * vol_M * float(np.sum(gaps ** (m / 2)))


# ---------------------------------------------------------------- subadditivity


def random_box_partition(rng: np.random.Generator, lengths: Sequence[float], n_cuts: int) -> list[tuple]:
    """Guillotine partition: repeatedly split a random piece across a random
    axis at a random interior point. Pieces are side-length tuples."""
    pieces = [tuple(float(l) for l in lengths)]
    for _ in range(n_cuts):
        i = int(rng.integers(len(pieces)))
        box = pieces.pop(i)
        ax = int(rng.integers(len(box)))
        t = rng.uniform(0.15, 0.85)
        a = list(box)
        b = list(box)
        a[ax] = box[ax] * t
        b[ax] = box[ax] * (1 - t)
        pieces += [tuple(a), tuple(b)]
    return pieces


def subadditivity(lengths: Sequence[float], pieces: Sequence[Sequence[float]]) -> tuple[int, int]:
    """(N(box), sum of N(piece)); disjoint pieces covering the box give <=."""
    whole = count_N_box(BoxDomain(tuple(lengths))).n_count
    parts = sum(count_N_box(BoxDomain(tuple(p))).n_count for p in pieces)
    return whole, parts
