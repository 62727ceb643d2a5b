import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rte_integral.geometry import SQRT2, UNIT_SQUARE, Grid, angle_between, exit_distance


def test_domain_constants():
    assert UNIT_SQUARE.d == 2
    assert UNIT_SQUARE.diameter == pytest.approx(np.sqrt(2), abs=0)
    assert UNIT_SQUARE.max_exit_distance == UNIT_SQUARE.diameter


def test_grid_layout():
    g = Grid(4)
    assert g.N == 16 and g.h == 0.25 and g.volume == 0.0625
    i = g.index(3, 1)
    assert i == 7
    assert np.allclose(g.centers[i], [(3 + 0.5) * 0.25, (1 + 0.5) * 0.25])
    # x1 varies fastest
    assert g.centers[1, 0] > g.centers[0, 0] and g.centers[1, 1] == g.centers[0, 1]
    assert UNIT_SQUARE.contains(g.centers, closed=False).all()
    a, b = g.multi_index(np.array([0, 5, 15]))
    assert list(a) == [0, 1, 3] and list(b) == [0, 1, 3]


@pytest.mark.parametrize("n", [0, -2, 2.5])
def test_grid_rejects_bad_n(n):
    with pytest.raises(ValueError):
        Grid(n)


def test_nearest_cell_clamps():
    g = Grid(4)
    assert g.nearest_cell(np.array([0.1, 0.1])) == 0
    assert g.nearest_cell(np.array([1.0, 1.0])) == 15
    assert g.nearest_cell(np.array([0.3, 0.6])) == g.index(1, 2)


@pytest.mark.parametrize("x, v, expected", [
    ((0.5, 0.5), (1.0, 0.0), 0.5),
    ((0.5, 0.5), (1 / np.sqrt(2), 1 / np.sqrt(2)), np.sqrt(2) / 2),
    ((0.0, 0.5), (-1.0, 0.0), 1.0),
])
def test_exit_distance_examples(x, v, expected):
    assert exit_distance(np.array(x), np.array(v)) == pytest.approx(expected, abs=1e-15)


def test_exit_distance_rejects_non_unit():
    with pytest.raises(ValueError):
        exit_distance(np.array([0.5, 0.5]), np.array([1.0, 1.0]))


@pytest.mark.parametrize("x, y, expected", [
    ((1, 0), (0, 0), 0.0),
    ((0, 1), (0, 0), np.pi / 2),
    ((0, 0), (1, 1), -3 * np.pi / 4),
    ((-1, -0.0), (0, 0), np.pi),
])
def test_angle_between_examples(x, y, expected):
    assert angle_between(np.array(x, float), np.array(y, float)) == pytest.approx(expected, abs=1e-15)


def test_angle_between_coincident_points():
    with pytest.raises(ValueError):
        angle_between(np.array([0.2, 0.2]), np.array([0.2, 0.2]))


interior = st.floats(0.001, 0.999)
angles = st.floats(-np.pi, np.pi)


def _chord(x, v):
    # full chord through x along v: the forward and backward slab hits
    ts = []
    for sgn in (1, -1):
        w = sgn * v
        with np.errstate(divide="ignore", over="ignore"):
            s = np.where(w > 0, x / w, np.where(w < 0, (x - 1) / w, np.inf))
        ts.append(s.min())
    return sum(ts)


@settings(max_examples=200, deadline=None)
@given(interior, interior, angles)
def test_exit_distances_sum_to_chord(x1, x2, th):
    x = np.array([x1, x2])
    v = np.array([np.cos(th), np.sin(th)])
    total = exit_distance(x, v) + exit_distance(x, -v)
    assert total == pytest.approx(_chord(x, v), rel=1e-12)
    assert 0 <= exit_distance(x, v) <= SQRT2


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_angle_between_is_antisymmetric(a, b, c, d):
    x, y = np.array([a, b]), np.array([c, d])
    if np.all(x == y):
        return
    diff = angle_between(x, y) - angle_between(y, x)
    assert np.isclose(np.cos(diff), -1.0, atol=1e-12)
    assert -np.pi < angle_between(x, y) <= np.pi
