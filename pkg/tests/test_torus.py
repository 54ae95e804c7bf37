import numpy as np
import pytest
from hypothesis import given, strategies as st

from torushomog import Torus, periodic_distance, wrap


def test_periods_positive_required():
    with pytest.raises(ValueError):
        Torus(np.array([1.0, -2.0]))


def test_wrap_basic():
    t = Torus(np.array([10.0, 10.0]))
    out = wrap(np.array([[10.3, -0.2]]), t)
    assert np.allclose(out, [[0.3, 9.8]])


def test_wrap_exact_multiples_land_on_zero():
    t = Torus(np.array([2.5]))
    for k in range(-4, 5):
        assert wrap(np.array([[k * 2.5]]), t)[0, 0] == 0.0


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=4),
       st.integers(-5, 5))
def test_wrap_lattice_invariant(coords, k):
    t = Torus(np.ones(len(coords)) * 3.5)
    x = np.array([coords])
    shifted = x + k * t.periods
    assert np.allclose(wrap(x, t), wrap(shifted, t), atol=1e-6)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=4))
def test_wrap_range_and_idempotent(coords):
    t = Torus(np.ones(len(coords)) * 7.0)
    w = wrap(np.array([coords]), t)
    assert np.all(w >= 0.0) and np.all(w < 7.0)
    assert np.array_equal(wrap(w, t), w)


def test_periodic_distance_wraps_shortest_way():
    t = Torus(np.array([10.0]))
    assert periodic_distance(np.array([[0.1]]), np.array([[9.9]]), t)[0] \
        == pytest.approx(0.2)


@given(st.lists(st.floats(0, 9.99), min_size=2, max_size=2),
       st.lists(st.floats(0, 9.99), min_size=2, max_size=2))
def test_periodic_distance_symmetric_and_bounded(a, b):
    t = Torus(np.array([10.0, 10.0]))
    x, y = np.array([a]), np.array([b])
    dxy = periodic_distance(x, y, t)[0]
    assert dxy == pytest.approx(periodic_distance(y, x, t)[0])
    # no distance can exceed half the cell diagonal
    assert dxy <= np.linalg.norm(t.periods / 2) + 1e-12


def test_cell_volume():
    assert Torus(np.array([2.0, 5.0])).cell_volume == pytest.approx(10.0)
