import math

import numpy as np
import pytest
from scipy.optimize import minimize

from rlab.constructions import build, build_gordian_split_link, build_hopf_minimal, main_curve
from rlab.curves import ArcPiece, PiecewiseCurve, SegmentPiece, circle, polyline_curve
from rlab.metrics import (UNKNOWN, Link, LinkingError, MetricError, crossing_linking_polyline,
                          doubly_critical_self_distance, gauss_linking_polyline, is_separated,
                          linking_matrix, linking_number, measure, min_distance, ropelength,
                          segment_distance, thickness, tube_thickness)

EX, EY, EZ = np.eye(3)


def unit_circle(center, u, v):
    return circle(center, u, v)


def brute_segment_distance(p0, p1, q0, q1, n=401):
    s = np.linspace(0, 1, n)
    P = p0 + s[:, None] * (p1 - p0)
    Q = q0 + s[:, None] * (q1 - q0)
    return np.linalg.norm(P[:, None] - Q[None], axis=-1).min()


def test_segment_distance_matches_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(40):
        p0, p1, q0, q1 = rng.normal(size=(4, 3))
        d = segment_distance(p0, p1, q0, q1)
        d = float(np.asarray(d).ravel()[0]) if np.ndim(d) else float(d)
        brute = brute_segment_distance(p0, p1, q0, q1)
        assert d <= brute + 1e-12
        assert brute - d < 1e-2


def test_min_distance_coplanar_circles():
    A1 = unit_circle((1.5, 0, 0), EX, EZ)
    A2 = unit_circle((-1.5, 0, 0), EX, EZ)
    iv = min_distance(A1, A2, tol=1e-9)
    assert iv.lo <= 1.0 <= iv.hi and iv.width <= 1e-9
    far = min_distance(unit_circle((0, 0, 0), EX, EY), unit_circle((10, 0, 0), EX, EY), tol=1e-9)
    assert far.lo <= 8.0 <= far.hi


def test_min_distance_hopf_against_grid():
    link = build_hopf_minimal()
    iv = min_distance(link[0], link[1], tol=1e-8)
    # 1e-3 grid, then local refinement of the best pair
    s = np.arange(0, 2 * math.pi, 1e-3)
    P, Q = link[0].points(s), link[1].points(s)
    best = np.inf
    for chunk in range(0, len(s), 1000):
        D = np.linalg.norm(P[chunk:chunk + 1000, None] - Q[None], axis=-1)
        best = min(best, D.min())
    res = minimize(lambda x: np.linalg.norm(link[0].points(x[0]) - link[1].points(x[1])),
                   [0.0, math.pi], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
    assert abs(best - 1.0) < 1e-6
    assert iv.lo <= 1.0 + 1e-12 and iv.hi >= 1.0 - 1e-12
    assert iv.lo <= res.fun + 1e-12


def test_thickness_hopf_and_scaling():
    link = build_hopf_minimal()
    assert thickness(link, 1e-8).contains(1.0)
    assert thickness(link.scaled(2.0), 1e-8).contains(2.0)
    with pytest.raises(MetricError):
        thickness(Link((link[0],)))


def grid_dcsd(C, h=4e-3, slack=0.02):
    """Brute-force doubly critical chord search on a parameter grid."""
    s = np.arange(0, C.length, h)
    P, T = C.points(s), C.tangents(s)
    D = P[:, None] - P[None]
    r1 = np.abs(np.einsum("ijk,ik->ij", D, T))
    r2 = np.abs(np.einsum("ijk,jk->ij", D, T))
    dist = np.linalg.norm(D, axis=-1)
    gap = np.abs(s[:, None] - s[None])
    gap = np.minimum(gap, C.length - gap)
    ok = (r1 < slack) & (r2 < slack) & (gap > 1.0)
    return dist[ok].min()


def test_dcsd_circle_and_stadium():
    assert doubly_critical_self_distance(unit_circle((0, 0, 0), EX, EY)).contains(2.0)
    stadium = PiecewiseCurve([
        SegmentPiece((-1, -1, 0), (1, -1, 0)),
        ArcPiece((1, 0, 0), EX, EY, 1.0, -math.pi / 2, math.pi),
        SegmentPiece((1, 1, 0), (-1, 1, 0)),
        ArcPiece((-1, 0, 0), EX, EY, 1.0, math.pi / 2, math.pi),
    ])
    iv = doubly_critical_self_distance(stadium)
    assert abs(grid_dcsd(stadium) - 2.0) < 1e-3
    assert iv.lo <= 2.0 + 1e-9 and iv.hi >= 2.0 - 1e-6


def test_dcsd_main_curve():
    M = main_curve()
    iv = doubly_critical_self_distance(M, tol=1e-7)
    oracle = grid_dcsd(M)
    assert iv.lo >= 1.0
    assert abs(iv.mid - oracle) < 1e-2
    assert iv.mid == pytest.approx(1.872983, abs=1e-6)


def test_tube_thickness_simple():
    assert tube_thickness(Link((unit_circle((0, 0, 0), EX, EY),))).tau_e.contains(2.0)
    small = Link((circle((0, 0, 0), EX, EY, radius=0.4),))
    rep = tube_thickness(small)
    assert rep.tau_e.lo <= 0.8 <= rep.tau_e.hi + 1e-12
    assert rep.limiting == "curvature"


def test_tube_thickness_rejects_kinks():
    square = polyline_curve([(0, 0, 0), (3, 0, 0), (3, 3, 0), (0, 3, 0)])
    with pytest.raises(MetricError):
        tube_thickness(Link((square,)))


def test_linking_numbers():
    hopf = build_hopf_minimal()
    assert abs(linking_number(hopf[0], hopf[1])) == 1
    assert linking_number(hopf[0], hopf[1].reversed()) == -linking_number(hopf[0], hopf[1])
    far = linking_number(unit_circle((0, 0, 0), EX, EY), unit_circle((5, 0, 0), EX, EZ))
    assert far == 0
    with pytest.raises(LinkingError):
        linking_number(unit_circle((0, 0, 0), EX, EY), unit_circle((1, 0, 0), EX, EY))


def test_gauss_and_crossing_agree_on_random_polygons():
    rng = np.random.default_rng(11)
    for _ in range(20):
        P = np.cumsum(rng.normal(size=(30, 3)), axis=0)
        P -= P.mean(0)
        Q = np.cumsum(rng.normal(size=(30, 3)), axis=0)
        Q -= Q.mean(0)
        Q += rng.normal(scale=0.5, size=3)
        g = gauss_linking_polyline(P, Q)
        try:
            x = crossing_linking_polyline(P, Q, rng.normal(size=3))
        except Exception:
            continue
        assert abs(g - x) < 1e-6


def test_is_separated():
    two = Link((unit_circle((0, 0, 0), EX, EY), unit_circle((10, 0, 0), EX, EY)))
    assert is_separated(two, [0]) is True
    hopf = build_hopf_minimal()
    assert is_separated(hopf, [0]) is False
    assert is_separated(hopf, [1]) is False
    gord = build_gordian_split_link()
    assert is_separated(gord, [0, 1, 2]) is False
    touching = Link((unit_circle((0, 0, 0), EX, EY), unit_circle((2.0005, 0, 0), EX, EY)))
    assert is_separated(touching, [0], tol=1e-3) is UNKNOWN


def test_ropelength_values():
    assert ropelength(build_hopf_minimal()).contains(4 * math.pi)
    assert ropelength(build("augmented-unlink-24pi")[0]).mid == pytest.approx(24 * math.pi, abs=1e-9)


def test_measure_report():
    rep = measure(build_hopf_minimal())
    assert set(rep) >= {"ropelength", "tau", "tau_e", "linking_matrix", "pairs", "curvature_max"}
    assert rep["tau"]["lo"] <= 1.0 <= rep["tau"]["hi"]
    assert abs(rep["linking_matrix"][0][1]) == 1
    square = Link((polyline_curve([(0, 0, 0), (3, 0, 0), (3, 3, 0), (0, 3, 0)]),))
    assert "error" in measure(square)["tau_e"]


def test_linking_matrix_symmetric():
    M = linking_matrix(build_gordian_split_link())
    M = np.array(M)
    assert np.array_equal(M, M.T)
    assert np.all(np.diag(M) == 0)
