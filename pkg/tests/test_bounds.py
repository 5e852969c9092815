import math

import mpmath
import numpy as np
import pytest

from rlab.bounds import (BoundError, almost_closed_bound, detour_curve, detour_length_bound,
                         eps_two_point_bound, link_lower_bound, phi, phi_excess, polygon_cone_bound,
                         polygon_perimeter, qn, split_margin, suitability_margin)
from rlab.curves import point_curve_distance


def test_phi_values():
    assert phi(0.0) == 0.0
    assert phi(0.5) == pytest.approx(math.pi / 2 - 0.5, abs=1e-15)
    mpmath.mp.dps = 40
    oracle = float(mpmath.asin(mpmath.mpf("0.2")) - mpmath.mpf("0.1"))
    assert phi(0.1) == pytest.approx(oracle, abs=1e-15)
    assert phi(0.1) == pytest.approx(0.1013579, abs=1e-7)
    for bad in (-0.1, 0.51):
        with pytest.raises(BoundError):
            phi(bad)


def test_phi_excess_matches_high_precision():
    mpmath.mp.dps = 50
    for x in np.logspace(-8, math.log10(0.5), 60):
        exact = mpmath.asin(2 * mpmath.mpf(x)) - 2 * mpmath.mpf(x)
        assert phi_excess(x) == pytest.approx(float(exact), rel=1e-10)


def test_polygon_cone_bound_examples():
    assert polygon_cone_bound(1, [[0, 0, 0]]).value == pytest.approx(2 * math.pi)
    d = 1.7
    assert polygon_cone_bound(1, [[0, 0, 0], [d, 0, 0]]).value == pytest.approx(2 * math.pi + 2 * d)
    square = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    assert polygon_cone_bound(2, square).value == pytest.approx(4 * math.pi + 4)


def test_polygon_cone_bound_monotone():
    tri = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]])
    big = np.array([[0, 0, 0], [2, 0, 0], [0, 2, 0.0]])
    assert polygon_cone_bound(1.0, tri).value < polygon_cone_bound(1.5, tri).value
    assert polygon_cone_bound(1.0, tri).value < polygon_cone_bound(1.0, big).value


def test_polygon_errors():
    with pytest.raises(BoundError):
        polygon_perimeter([[0, 0, 0], [2, 0, 0], [2, 2, 0], [0, 2, 0], [1, 1.5, 0]])
    with pytest.raises(BoundError):
        polygon_perimeter([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(BoundError):
        polygon_cone_bound(-1, [[0, 0, 0]])


def test_qn_table():
    assert [qn(n) for n in (1, 2, 3, 4)] == [0, 2, 3, 4]
    with pytest.raises(BoundError, match="sqrt"):
        qn(5)
    with pytest.raises(BoundError):
        qn(0)


def test_link_lower_bound():
    assert link_lower_bound([1, 1]).value == pytest.approx(4 * math.pi)
    assert link_lower_bound([1, 2, 1]).value == pytest.approx(6 * math.pi + 2)
    assert link_lower_bound([2, 1, 1, 0]).value == pytest.approx(6 * math.pi + 2)


def test_eps_two_point_bound():
    assert eps_two_point_bound(2, 0).value == pytest.approx(2 * math.pi + 4, abs=1e-12)
    assert eps_two_point_bound(0, 0).value == pytest.approx(2 * math.pi, abs=1e-12)
    assert eps_two_point_bound(2, 0.01).value == pytest.approx((2 * math.pi + 4) * 0.99, abs=1e-12)
    with pytest.raises(BoundError):
        eps_two_point_bound(1, 1.5)


def test_split_margin():
    m = split_margin(31.1090)
    assert m.value == pytest.approx(0.0237, abs=1e-4)
    assert m.inputs["relative"] < 0.0008
    assert split_margin(8 * math.pi + 6).value == 0.0


def test_almost_closed_bound():
    assert almost_closed_bound(0.3, [0, 0]).value == pytest.approx(2 * math.pi + 0.6)
    assert almost_closed_bound(0, [0.1]).value == pytest.approx(2 * math.pi - phi(0.1))
    assert almost_closed_bound(0.2, [0.05] * 3).value == pytest.approx(2 * math.pi + 0.4 - 3 * phi(0.05))
    x, y = np.array([0, 0, 0.0]), np.array([0.7, 0.2, 0.0])
    d = float(np.linalg.norm(x - y))
    assert almost_closed_bound(d, []).value == pytest.approx(polygon_cone_bound(1, [x, y]).value)
    with pytest.raises(BoundError):
        almost_closed_bound(0.1, [0.6])


def test_suitability_margin():
    assert suitability_margin([(2, 3)] * 6) == pytest.approx(4 / 3)
    assert suitability_margin([(1, 2)] * 6) == 1.0
    assert suitability_margin([(1, 1)]) == 2.0
    with pytest.raises(BoundError):
        suitability_margin([(1, 0)])


def test_detour_trivial_cases():
    x, y, m = np.zeros(3), np.array([0.2, 0, 0]), np.array([0.1, 0.05, 0])
    a, b = np.array([0, 3, 0.0]), np.array([0.3, 3, 0.0])
    C = detour_curve(a, b, x, y, m)
    assert len(C.pieces) == 1 and C.length == pytest.approx(0.3)
    # a, b, m collinear: the segment is returned
    a2, b2 = np.array([-1.5, 0, 0.0]), np.array([-1.2, 0, 0.0])
    assert len(detour_curve(a2, b2, x, y, np.array([0.05, 0, 0])).pieces) == 1


def test_detour_around_a_ball():
    x = y = np.zeros(3)
    m = np.array([0, 0.1, 0])
    a = np.array([-0.2, 1.0, 0.0])
    a = a / np.linalg.norm(a) * 1.0001
    b = np.array([0.2, 1.0, 0.0])
    b = b / np.linalg.norm(b) * 1.0001
    C = detour_curve(a, b, x, y, m)
    assert any(p.kind == "arc" for p in C.pieces)
    assert np.allclose(C.start, a) and np.allclose(C.end, b)
    assert point_curve_distance(x, C) >= 1 - 1e-9
    assert C.length <= detour_length_bound(a, b) + 1e-9


def test_detour_preconditions():
    x, y, m = np.zeros(3), np.array([0.2, 0, 0]), np.array([0.1, 0.05, 0])
    with pytest.raises(BoundError):
        detour_curve([0, 0.5, 0], [0.2, 2, 0], x, y, m)
    with pytest.raises(BoundError):
        detour_curve([0, 3, 0], [0.1, 3, 0], x, [0.8, 0, 0], m)
    with pytest.raises(BoundError):
        detour_curve([0, 3, 0], [0.6, 3, 0], x, y, m)
