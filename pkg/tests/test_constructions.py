import math

import numpy as np
import pytest

from rlab.constructions import (BLUE_CENTERS, RED_CENTERS, ConstructionError, build, build_gordian_split_link,
                                build_hopf_minimal, build_linking_n, construction_names, solve_tangent)
from rlab.metrics import linking_number, min_distance, thickness


@pytest.fixture(scope="module")
def gordian():
    return build_gordian_split_link()


def test_tangency_solution():
    sol = solve_tangent()
    assert sol.beta == pytest.approx(1.2554, abs=5e-4)
    assert sol.segment_length == pytest.approx(1.0925, abs=5e-4)
    assert max(abs(r) for r in sol.residuals) < 1e-10


def test_gordian_lengths(gordian):
    assert gordian.length == pytest.approx(31.1090, abs=1e-4)
    assert gordian.length < 8 * math.pi + 6
    assert gordian[3].length_interval().mid == pytest.approx(10.2380, abs=1e-4)
    for comp in gordian:
        assert np.linalg.norm(comp.end - comp.start) <= 1e-9


def test_gordian_pairwise_distances(gordian):
    for i in range(4):
        for j in range(i + 1, 4):
            d = min_distance(gordian[i], gordian[j], tol=1e-7)
            if (i, j) == (1, 2):
                assert d.lo == pytest.approx(1.0, abs=1e-6)
            else:
                assert d.lo >= 1 - 1e-6 and d.hi <= 1 + 1e-6, (i, j)


def test_gordian_distance_against_grid(gordian):
    # the torus-section arcs of C sit at distance exactly 1 from A1
    C, A1 = gordian[3], gordian[1]
    s = np.arange(0, C.length, 2e-3)
    t = np.arange(0, A1.length, 2e-3)
    D = np.linalg.norm(C.points(s)[:, None] - A1.points(t)[None], axis=-1)
    assert abs(D.min() - 1.0) < 1e-5


def test_hopf_minimal():
    hopf = build_hopf_minimal()
    assert hopf.length == pytest.approx(4 * math.pi)
    assert thickness(hopf, 1e-8).contains(1.0)


def test_conjoined_unlink_geometry():
    link, conj = build("conjoined-unlink-12pi")
    assert link.length == pytest.approx(12 * math.pi, abs=1e-9)
    assert np.allclose(np.linalg.norm(BLUE_CENTERS[1] - BLUE_CENTERS[0]), 2.0)
    assert np.allclose(RED_CENTERS[0], [1, 0, 0])
    d = min_distance(link[0], link[1], tol=1e-8)
    assert d.lo >= 1 - 1e-6 and d.hi <= 1 + 1e-6
    # red circles meet at the blue centers with a common vertical tangent
    red = link[1]
    s = np.linspace(0, red.length, 20001)
    P, T = red.points(s), red.tangents(s)
    for c in BLUE_CENTERS:
        near = np.linalg.norm(P - c, axis=1) < 1e-3
        assert near.any()
        assert np.all(np.abs(np.abs(T[near][:, 2]) - 1) < 1e-5)


def test_augmented_unlink():
    link, conj = build("augmented-unlink-24pi")
    assert link.length == pytest.approx(24 * math.pi, abs=1e-9)
    assert linking_number(link[0], link[1]) == 0
    assert conj.margin() == pytest.approx(4 / 3)


def test_linking_n_family():
    link, conj = build_linking_n(2, 3)
    assert linking_number(link[0], link[1]) == 3
    # measured length: k copies of each 12 pi curve, n + 1 extra unit turns
    assert link.length == pytest.approx((24 * 2 + 2 * 3 + 2) * math.pi, abs=1e-9)
    zero, _ = build_linking_n(2, 0)
    aug, _ = build("augmented-unlink-24pi")
    assert zero.length == pytest.approx(2 * aug.length + 2 * math.pi, abs=1e-9)


@pytest.mark.parametrize("k,n", [(1, 0), (2, 4), (3, 5), (2, -1)])
def test_linking_n_rejects_small_k(k, n):
    with pytest.raises(ConstructionError):
        build_linking_n(k, n)


def test_registry():
    names = construction_names()
    assert "gordian-split-4" in names and "augmented-unlink-24pi" in names
    link, conj = build("linking-n:k=2,n=1")
    assert conj is not None and linking_number(link[0], link[1]) == 1
    with pytest.raises(ConstructionError):
        build("trefoil")
