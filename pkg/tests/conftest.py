import math
import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from spectral_count import fem  # noqa: E402
from spectral_count.bounds import default_h  # noqa: E402
from spectral_count.geometry import Polygon, random_convex_polygon, rectangle, regular_polygon  # noqa: E402

CORPUS_SEED = 20240611
CORPUS_SIZE = 100

ACCEPTANCE_LINES: list[str] = []
SETUP_SECONDS: dict[str, float] = {}


def convex_corpus(n: int = CORPUS_SIZE, seed: int = CORPUS_SEED) -> list[Polygon]:
    rng = np.random.default_rng(seed)
    return [random_convex_polygon(rng, int(rng.integers(3, 11))) for _ in range(n)]


@pytest.fixture(scope="session")
def corpus():
    return convex_corpus()


@pytest.fixture(scope="session")
def corpus_spectra(corpus):
    """Extrapolated FEM spectra for the corpus, shared by the property suites."""
    t0 = time.perf_counter()
    out = [fem.fem_spectra(p, default_h(p)) for p in corpus]
    SETUP_SECONDS["corpus_spectra"] = time.perf_counter() - t0
    return out


@pytest.fixture
def unit_square():
    return rectangle(0, 0, 1, 1)


@pytest.fixture
def triangle_T():
    return Polygon.from_vertices([(-1, 0), (0, 0), (0, 1)])


@pytest.fixture
def lshape():
    return Polygon.from_vertices([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])


@pytest.fixture
def equilateral():
    return regular_polygon(3, 1 / math.sqrt(3), phase=math.pi / 2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
