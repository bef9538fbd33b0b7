"""Neumann eigenvalue counts below the first Dirichlet eigenvalue,
N = #{j : mu_j <= lambda_1}, with analytic spectra, P1 finite elements,
explicit bound checks, counterexample families and collapse asymptotics."""

from .geometry import Ellipse, GeometryError, Polygon, RectSandwich, john_ellipse, measures, rect_sandwich
from .spectra import BoxDomain, CountResult, DiskDomain, FlatModel, ProductDomain, Spectrum, count_N_box

__version__ = "0.1.0"

__all__ = [
    "BoxDomain", "CountResult", "DiskDomain", "Ellipse", "FlatModel", "GeometryError", "Polygon",
    "ProductDomain", "RectSandwich", "Spectrum", "count_N_box", "john_ellipse", "measures", "rect_sandwich",
]
