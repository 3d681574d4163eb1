# tests/conftest.py
import numpy as np
import pytest

from services.kernel import Kernel
from services.logsupport import CPoint
from services.polytope import box, make_polytope, simplex
from services.search import SearchConfig


@pytest.fixture
def sigma2():
    return simplex(2)


@pytest.fixture
def box2():
    return box(2)


@pytest.fixture
def ex12():
    """ch{0, e1, e2, (3, 1)}: not a lower set."""
    return make_polytope(2, [(1.0, 0.0), (0.0, 1.0), (3.0, 1.0)])


@pytest.fixture
def perera():
    return make_polytope(2, [(1.0, 1.0), (1.0, 0.0)])


@pytest.fixture
def small_kernel():
    return Kernel("bump", n_radial=8, n_angular=16)


@pytest.fixture
def fast_search():
    return SearchConfig(coarse_grid=7, refine_iters=2, multistart=2)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def single_piece_grid():
    """Points where one piece of the tropical fixture dominates a whole δ = 1/4 neighbourhood."""
    return [
        CPoint.from_modulus([5.0, 0.5], [0.0, 0.0]),
        CPoint.from_modulus([0.5, 0.5], [1.0, 2.0]),
        CPoint.from_modulus([0.5, 8.0], [0.5, 3.0]),
        CPoint.from_modulus([4.0, 4.0], [2.0, 1.0]),
    ]
