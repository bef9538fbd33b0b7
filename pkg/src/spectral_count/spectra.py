"""Closed-form Laplacian spectra and exact eigenvalue counts for boxes,
flat tori, disks and Riemannian products of them."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bessel import bessel_zero, bessel_zeros_below

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
MIXED = "mixed"

DEFAULT_ENTRY_CAP = 10_000_000
MERGE_RTOL = 1e-10
AMBIGUITY_RTOL = 1e-9


class ResourceError(RuntimeError):
    """Enumeration would exceed the configured entry cap."""


class CompletenessError(ValueError):
    """A product or count would silently miss eigenvalues."""


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _merge(values: np.ndarray, mult: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(values) == 0:
        return np.zeros(0), np.zeros(0, dtype=int)
    order = np.argsort(values, kind="stable")
    values, mult = values[order], mult[order]
    out_v, out_m = [values[0]], [int(mult[0])]
    for v, m in zip(values[1:], mult[1:]):
        if v - out_v[-1] <= MERGE_RTOL * max(1.0, abs(v)):
            out_m[-1] += int(m)
        else:
            out_v.append(v)
            out_m.append(int(m))
    return np.array(out_v), np.array(out_m, dtype=int)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues up to ``cutoff`` with multiplicities, complete below it."""

    values: np.ndarray
    mult: np.ndarray
    cutoff: float
    bc: str
    provenance: str = "analytic"

    @classmethod
    def from_values(cls, values, cutoff, bc, provenance="analytic", mult=None) -> "Spectrum":
        values = np.asarray(values, dtype=float)
        mult = np.ones(len(values), dtype=int) if mult is None else np.asarray(mult, dtype=int)
        keep = values <= cutoff
        v, m = _merge(values[keep], mult[keep])
        return cls(v, m, float(cutoff), bc, provenance)

    def __len__(self) -> int:
        return int(self.mult.sum())

    @property
    def expanded(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.repeat(self.values, self.mult)

    @property
    def min(self) -> float:
        return float(self.values[0]) if len(self.values) else math.inf

    def count_le(self, x: float, rtol: float = MERGE_RTOL) -> int:
        if x > self.cutoff * (1 + rtol):
            raise CompletenessError(f"count at {x} exceeds spectrum cutoff {self.cutoff}")
        return int(self.mult[self.values <= x + rtol * max(1.0, abs(x))].sum())

    def truncate(self, cutoff: float) -> "Spectrum":
        keep = self.values <= cutoff
        return Spectrum(self.values[keep], self.mult[keep], min(cutoff, self.cutoff), self.bc, self.provenance)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# bc={self.bc} cutoff={self.cutoff!r} provenance={self.provenance}\n")
        buf.write("value,multiplicity\n")
        for v, m in zip(self.values, self.mult):
            buf.write(f"{float(v)!r},{int(m)}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class CountResult:
    """N = #{j : mu_j <= lambda_1} with the gap that certifies it."""

    n_count: int
    lambda1: float
    gap: float
    ambiguous: bool
    details: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.n_count < 1:
            raise ValueError("N is at least 1 (constants are Neumann eigenfunctions)")


def count_from_spectra(neumann: Spectrum, lambda1: float, radius: float = 0.0) -> CountResult:
    """Count Neumann eigenvalues <= lambda1 using a complete spectrum."""
    if neumann.cutoff < lambda1:
        raise CompletenessError("Neumann spectrum does not reach lambda_1")
    n = neumann.count_le(lambda1)
    gap = float(np.abs(neumann.values - lambda1).min())
    amb = gap < max(AMBIGUITY_RTOL * lambda1, radius)
    return CountResult(n, float(lambda1), gap, bool(amb))


# ---------------------------------------------------------------- boxes


@dataclass(frozen=True)
class BoxDomain:
    """Box [0, L_1] x ... x [0, L_n]."""

    lengths: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(l) if not isinstance(l, Fraction) else l
                                                  for l in self.lengths))
        if not self.lengths or any(l <= 0 for l in self.lengths):
            raise ValueError("box side lengths must be positive")

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def volume(self) -> float:
        return float(np.prod([float(l) for l in self.lengths]))

    @property
    def boundary_volume(self) -> float:
        L = [float(l) for l in self.lengths]
        if len(L) == 1:
            return 2.0
        return 2.0 * sum(float(np.prod(L[:i] + L[i + 1:])) for i in range(len(L)))

    @property
    def lambda1(self) -> float:
        return math.pi**2 * sum(1.0 / float(l) ** 2 for l in self.lengths)

    def scaled(self, t: float) -> "BoxDomain":
        return BoxDomain(tuple(float(l) * t for l in self.lengths))

    def spectrum(self, bc: str, cutoff: float, cap: int = DEFAULT_ENTRY_CAP) -> Spectrum:
        return box_spectrum(self, bc, cutoff, cap)


def _lattice_sums(coeffs: Sequence[float], start: int, limit: float, cap: int):
    """All (index vector, sum c_i j_i^2) with j_i >= start and sum <= limit."""
    idx = np.zeros((1, 0), dtype=np.int64)
    sums = np.zeros(1)
    for c in coeffs:
        jmax = int(math.floor(math.sqrt(max(limit, 0.0) / c))) + 1
        js = np.arange(start, jmax + 1)
        new = sums[:, None] + c * js[None, :] ** 2
        keep = new <= limit
        total = int(keep.sum())
        if total > cap:
            raise ResourceError(f"lattice enumeration exceeds cap ({total} > {cap})")
        rows, cols = np.nonzero(keep)
        idx = np.hstack([idx[rows], js[cols][:, None]])
        sums = new[rows, cols]
    return idx, sums


def box_spectrum(b: BoxDomain, bc: str, cutoff: float, cap: int = DEFAULT_ENTRY_CAP) -> Spectrum:
    """Eigenvalues pi^2 sum (j_i / L_i)^2 of the box, all those <= cutoff.

    Neumann indices start at 0, Dirichlet at 1.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    if bc not in (DIRICHLET, NEUMANN):
        raise ValueError("box spectra are Dirichlet or Neumann")
    coeffs = [math.pi**2 / float(l) ** 2 for l in b.lengths]
    slack = cutoff * (1 + MERGE_RTOL) + MERGE_RTOL
    _, sums = _lattice_sums(coeffs, 0 if bc == NEUMANN else 1, slack, cap)
    return Spectrum.from_values(np.minimum(sums, cutoff) if len(sums) else sums, cutoff, bc,
                                mult=np.ones(len(sums), dtype=int))


def count_N_box(b: BoxDomain, cap: int = DEFAULT_ENTRY_CAP) -> CountResult:
    """Exact N for a box.

    Candidates are enumerated in floating point with slack and then decided
    with exact rational arithmetic on sum (j_i / L_i)^2, so ties such as the
    unit square's mu = 2 pi^2 = lambda_1 are counted exactly.
    """
    L = [Fraction(l) for l in b.lengths]
    target = sum(1 / (l * l) for l in L)
    coeffs = [1.0 / float(l) ** 2 for l in L]
    idx, _ = _lattice_sums(coeffs, 0, 4.0 * float(target) * (1 + 1e-9), cap)
    exact = [sum(Fraction(int(j) ** 2) / (l * l) for j, l in zip(row, L)) for row in idx]
    n = sum(1 for e in exact if e <= target)
    gap_exact = min(abs(e - target) for e in exact)
    lam = math.pi**2 * float(target)
    gap = math.pi**2 * float(gap_exact)
    return CountResult(n, lam, gap, gap < AMBIGUITY_RTOL * lam, {"tie": gap_exact == 0})


# ---------------------------------------------------------------- disks


@dataclass(frozen=True)
class DiskDomain:
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    dim = 2

    @property
    def volume(self) -> float:
        return math.pi * self.radius**2

    @property
    def boundary_volume(self) -> float:
        return 2 * math.pi * self.radius

    @property
    def lambda1(self) -> float:
        return (bessel_zero(0, 1) / self.radius) ** 2

    def spectrum(self, bc: str, cutoff: float, cap: int = DEFAULT_ENTRY_CAP) -> Spectrum:
        return disk_spectrum(self.radius, bc, cutoff, cap)


def disk_spectrum(radius: float, bc: str, cutoff: float, cap: int = DEFAULT_ENTRY_CAP) -> Spectrum:
    """Dirichlet (j_{n,k}/r)^2 or Neumann (j'_{n,k}/r)^2 disk eigenvalues,
    multiplicity 2 for n >= 1; the Neumann spectrum also contains 0."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    if bc not in (DIRICHLET, NEUMANN):
        raise ValueError("disk spectra are Dirichlet or Neumann")
    xmax = radius * math.sqrt(max(cutoff, 0.0)) * (1 + MERGE_RTOL)
    vals, mult = [], []
    if bc == NEUMANN:
        vals.append(0.0)
        mult.append(1)
    n = 0
    while True:
        zeros = bessel_zeros_below(n, xmax, derivative=(bc == NEUMANN))
        # j'_{0,1} > j'_{1,1}, so an empty n = 0 Neumann level does not end the scan
        if not zeros and (n > 0 or bc == DIRICHLET):
            break
        vals.extend((z / radius) ** 2 for z in zeros)
        mult.extend([1 if n == 0 else 2] * len(zeros))
        if sum(mult) > cap:
            raise ResourceError("disk spectrum exceeds entry cap")
        n += 1
    vals = np.minimum(np.array(vals), cutoff)
    return Spectrum.from_values(vals, cutoff, bc, mult=np.array(mult, dtype=int))


# ---------------------------------------------------------------- products


def product_spectrum(a: Spectrum, b: Spectrum, cutoff: float) -> Spectrum:
    """Spectrum of a Riemannian product: pairwise sums, multiplicities multiplied."""
    if a.cutoff + b.min < cutoff * (1 - MERGE_RTOL) or b.cutoff + a.min < cutoff * (1 - MERGE_RTOL):
        raise CompletenessError("factor spectra are not complete up to the requested cutoff")
    s = a.values[:, None] + b.values[None, :]
    m = a.mult[:, None] * b.mult[None, :]
    keep = s <= cutoff * (1 + MERGE_RTOL)
    bc = a.bc if a.bc == b.bc else MIXED
    return Spectrum.from_values(np.minimum(s[keep], cutoff), cutoff, bc, mult=m[keep])


@dataclass(frozen=True)
class FlatModel:
    """Closed-form base manifold.

    kind:
      ``"point"``  zero-dimensional base;
      ``"torus"``  flat torus with the given periods (a circle when m = 1);
      ``"box"``    box with boundary.  ``ends`` fixes the condition used on
                   the base boundary: ``"natural"`` (Neumann for the Neumann
                   problem, Dirichlet for the Dirichlet problem),
                   ``"neumann"`` or ``"dirichlet"`` in both problems.
    """

    kind: str
    lengths: tuple[float, ...] = ()
    ends: str = "natural"

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(l) for l in self.lengths))
        if self.kind not in ("point", "torus", "box"):
            raise ValueError(f"unknown base kind {self.kind!r}")
        if self.kind == "point" and self.lengths:
            raise ValueError("a point has no lengths")
        if self.kind != "point" and (not self.lengths or any(l <= 0 for l in self.lengths)):
            raise ValueError("base lengths must be positive")
        if self.ends not in ("natural", "neumann", "dirichlet"):
            raise ValueError("ends must be natural, neumann or dirichlet")

    @classmethod
    def circle(cls, length: float) -> "FlatModel":
        return cls("torus", (length,))

    @classmethod
    def interval(cls, length: float, ends: str = "natural") -> "FlatModel":
        return cls("box", (length,), ends)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths)) if self.lengths else 1.0

    @property
    def boundary_volume(self) -> float:
        if self.kind != "box":
            return 0.0
        return BoxDomain(self.lengths).boundary_volume

    @property
    def has_boundary(self) -> bool:
        return self.kind == "box"

    def _coeffs_start(self, problem: str):
        if self.kind == "point":
            return [], 0
        if self.kind == "torus":
            return [(2 * math.pi / l) ** 2 for l in self.lengths], None
        bc = self.ends if self.ends != "natural" else problem
        return [(math.pi / l) ** 2 for l in self.lengths], (0 if bc == NEUMANN else 1)

    @property
    def lambda1(self) -> float:
        """Bottom of the Dirichlet-problem spectrum (0 without boundary)."""
        coeffs, start = self._coeffs_start(DIRICHLET)
        if self.kind == "torus" or start in (0, None):
            return 0.0
        return float(sum(coeffs))

    def count(self, lam: float, problem: str = NEUMANN) -> int:
        """Number of eigenvalues <= lam (ties counted) for the given problem."""
        if lam < 0:
            return 0
        coeffs, start = self._coeffs_start(problem)
        if self.kind == "point":
            return 1
        return _count_lattice(coeffs, start, lam * (1 + MERGE_RTOL) + MERGE_RTOL)

    def spectrum(self, bc: str, cutoff: float, cap: int = DEFAULT_ENTRY_CAP) -> Spectrum:
        coeffs, start = self._coeffs_start(bc)
        if self.kind == "point":
            return Spectrum.from_values([0.0], cutoff, bc)
        limit = cutoff * (1 + MERGE_RTOL) + MERGE_RTOL
        if start is None:
            idx, sums = _lattice_sums(coeffs, 0, limit, cap)
            mult = np.prod(np.where(idx > 0, 2, 1), axis=1)
        else:
            idx, sums = _lattice_sums(coeffs, start, limit, cap)
            mult = np.ones(len(sums), dtype=int)
        return Spectrum.from_values(np.minimum(sums, cutoff), cutoff, bc, mult=mult)


def _count_lattice(coeffs: Sequence[float], start: int | None, limit: float) -> int:
    """#{j : sum c_i j_i^2 <= limit}; j ranges over Z (start None) or j >= start."""
    if not coeffs:
        return 1 if limit >= 0 else 0
    if limit < 0:
        return 0
    c, rest = coeffs[0], coeffs[1:]
    jmax = int(math.floor(math.sqrt(limit / c)))
    while c * (jmax + 1) ** 2 <= limit:
        jmax += 1
    while jmax >= 0 and c * jmax**2 > limit:
        jmax -= 1
    if not rest:
        if start is None:
            return 2 * jmax + 1
        return max(0, jmax - start + 1)
    lo = 0 if start is None else start
    total = 0
    for j in range(lo, jmax + 1):
        k = _count_lattice(rest, start, limit - c * j * j)
        total += k if (start is not None or j == 0) else 2 * k
    return total


def weyl_leading(dim: int, volume: float, lam: float) -> float:
    if dim == 0:
        return 0.0
    return unit_ball_volume(dim) / (2 * math.pi) ** dim * volume * lam ** (dim / 2)


def weyl_count(base: FlatModel, lam: float) -> tuple[int, float]:
    """Exact eigenvalue count <= lam of the base and the Weyl leading term."""
    return base.count(lam, NEUMANN), weyl_leading(base.dim, base.volume, lam)


@dataclass(frozen=True)
class ProductDomain:
    """Product M x eps F with metric g_M + eps^2 g_F."""

    base: FlatModel
    fiber: BoxDomain | DiskDomain
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def m(self) -> int:
        return self.base.dim

    @property
    def n(self) -> int:
        return self.fiber.dim if isinstance(self.fiber, BoxDomain) else 2

    @property
    def volume(self) -> float:
        return self.base.volume * self.eps**self.n * self.fiber.volume

    @property
    def boundary_volume(self) -> float:
        return (self.base.boundary_volume * self.eps**self.n * self.fiber.volume
                + self.base.volume * self.eps ** (self.n - 1) * self.fiber.boundary_volume)
