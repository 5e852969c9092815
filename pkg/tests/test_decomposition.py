import json
import math

import numpy as np
import pytest

from rlab.bounds import phi
from rlab.constructions import build, build_hopf_minimal
from rlab.curves import circle, polyline_curve, rotation_matrix
from rlab.decomposition import (CircleDecomposition, CircleGroup, ConjoinedDecomposition, DecompositionError,
                                conjoined_from_circles, default_windows, delta4, group_circle, linking_scheme,
                                min_diameter_points, perturbation_bound_report, single_circle_decomposition,
                                verify_circle_decomposition, verify_conjoined, verify_suitable)
from rlab.metrics import Link

EX, EY, EZ = np.eye(3)


@pytest.fixture(scope="module")
def augmented():
    return build("augmented-unlink-24pi")


@pytest.fixture(scope="module")
def hopf():
    link = build_hopf_minimal()
    return link, conjoined_from_circles(link)


def test_component_decompositions_pass(augmented):
    link, conj = augmented
    assert verify_circle_decomposition(link[0], conj.A).passed
    assert verify_circle_decomposition(link[1], conj.B).passed
    assert len(conj.A.groups) == len(conj.B.groups) == 6


def test_dropped_cluster_member_fails(augmented):
    link, conj = augmented
    dec = conj.A
    clusters = [list(c) for c in dec.clusters]
    clusters[0] = clusters[0][1:]
    broken = CircleDecomposition(dec.breaking_points, dec.groups, clusters)
    rep = verify_circle_decomposition(link[0], broken)
    assert rep.failed() == ["clusters"]


def test_scaled_circles_fail(augmented):
    link, conj = augmented
    big = link.scaled(1.1)
    rep = verify_circle_decomposition(big[0], conj.A)
    assert "unit circles" in rep.failed()


def test_malformed_partition_rejected():
    with pytest.raises(DecompositionError):
        CircleDecomposition([0.0, 1.0], [CircleGroup([0], [1])], [[0, 1]])
    with pytest.raises(DecompositionError):
        CircleDecomposition([0.0, 1.0], [CircleGroup([0, 1], [1, 1])], [[0], [0, 1]])
    with pytest.raises(DecompositionError):
        CircleGroup([0], [2])


def test_invariance_under_relabeling_and_rigid_motion(augmented):
    link, conj = augmented
    for shift in (1, 5):
        assert verify_circle_decomposition(link[0], conj.A.relabeled(shift)).passed
    R = rotation_matrix([1, 2, 3], 0.7)
    moved = link.transformed(R, (3.0, -1.0, 2.0))
    assert verify_circle_decomposition(moved[0], conj.A).passed
    assert verify_circle_decomposition(moved[1], conj.B).passed
    assert linking_scheme(moved, conj) == conj.linking


def test_circle_centers_are_cluster_points(augmented):
    link, conj = augmented
    for curve, dec, other, odec, h in ((link[0], conj.A, link[1], conj.B, conj.hB),
                                       (link[1], conj.B, link[0], conj.A, conj.hA)):
        for j in range(len(dec.groups)):
            _, fc = group_circle(curve, dec, j)
            z = other.points(odec.breaking_points[odec.clusters[h[j]][0]])
            assert np.linalg.norm(fc.center - z) < 1e-8


def test_conjoined_translation_breaks_distance(augmented):
    link, conj = augmented
    moved = Link((link[0], link[1].transformed(np.eye(3), (0.1, 0, 0))))
    rep = verify_conjoined(moved, conj)
    assert "distance" in rep.failed()


def test_hopf_conjoined_but_not_suitable(hopf):
    link, conj = hopf
    assert verify_conjoined(link, conj).passed
    assert conj.linking == ((True,),)
    rep = verify_suitable(link, conj)
    assert "linked to exactly two circles" in rep.failed()


def test_non_augmented_counting_fails():
    link, conj = build("conjoined-unlink-12pi")
    assert conj.cluster_counts("A") == [(1, 2)] * 3
    rep = verify_suitable(link, conj)
    assert {"counting A", "counting B"} <= set(rep.failed())
    assert "linked to exactly two circles" not in rep.failed()
    assert conj.margin() == 1.0


def test_augmented_linking_scheme(augmented):
    link, conj = augmented
    assert all(sum(row) >= 2 for row in conj.linking)
    assert conj.cluster_counts("A") == [(2, 3)] * 3
    assert conj.cluster_counts("B") == [(2, 3)] * 3


def test_distant_circles_scheme_all_false():
    link = Link((circle((0, 0, 0), EX, EY), circle((5, 0, 0), EX, EY)))
    conj = ConjoinedDecomposition(single_circle_decomposition(link[0]), single_circle_decomposition(link[1]),
                                  [0], [0], ())
    assert linking_scheme(link, conj) == ((False,),)


def test_json_roundtrip(augmented):
    _, conj = augmented
    again = ConjoinedDecomposition.from_dict(json.loads(json.dumps(conj.to_dict())))
    assert again == conj


def bowtie(lift):
    return polyline_curve([(0, 0, 0), (2, 2, 0), (2, 0, lift), (0, 2, lift)])


def test_min_diameter_crossing_segments():
    curve = bowtie(0.0)
    s1 = math.sqrt(2)
    s2 = 2 * math.sqrt(2) + 2 + math.sqrt(2)
    windows = [(s1 - 0.3, s1 + 0.3), (s2 - 0.3, s2 + 0.3)]
    t, pts, diam, lower = min_diameter_points(curve, windows)
    assert diam < 1e-9 and lower <= diam
    assert np.allclose(pts, [[1, 1, 0], [1, 1, 0]], atol=1e-6)


def test_min_diameter_translated_arc():
    delta = 0.01
    curve = bowtie(delta)
    s1 = math.sqrt(2)
    s2 = 2 * math.sqrt(2) + 2 + math.sqrt(2)
    windows = [(s1 - 0.3, s1 + 0.3), (s2 - 0.3, s2 + 0.3)]
    _, _, diam, lower = min_diameter_points(curve, windows)
    g1 = np.arange(windows[0][0], windows[0][1], 1e-4)
    g2 = np.arange(windows[1][0], windows[1][1], 1e-4)
    P, Q = curve.points(g1), curve.points(g2)
    oracle = min(np.linalg.norm(P[i:i + 500, None] - Q[None], axis=-1).min() for i in range(0, len(P), 500))
    assert abs(diam - oracle) <= 0.1 * delta
    assert abs(diam - delta) <= 0.1 * delta
    assert lower <= diam + 1e-12


def test_delta4():
    m = 4 / 3
    d = delta4(m)
    assert 0 < d <= 0.5
    assert phi(d) == pytest.approx(m * d, abs=1e-12)
    assert delta4(1.0) == 0.0
    # termwise nonnegativity below delta4 with (#h^-1, f) = (2, 3)
    for q in np.linspace(1e-6, d, 50):
        assert 2 * 2 * q - 3 * phi(q) >= 0


def test_default_windows_disjoint(augmented):
    link, conj = augmented
    w = default_windows(conj.A, link[0].length)
    w = sorted(w)
    assert all(a[1] < b[0] for a, b in zip(w, w[1:]))


def test_unperturbed_report_is_equality(augmented):
    link, conj = augmented
    rep = perturbation_bound_report(conj, link)
    assert all(c["q"] < 1e-9 for c in rep["clusters"])
    assert rep["rhs"] == pytest.approx(24 * math.pi, abs=1e-8)
    assert rep["measured"]["lo"] <= 24 * math.pi + 1e-9 <= rep["measured"]["hi"] + 2e-9
    assert rep["terms_nonnegative"] and rep["inequality_holds"]


def test_rigid_rotation_report(augmented):
    link, conj = augmented
    moved = link.transformed(rotation_matrix([0, 1, 1], 1.1), (0.5, 0.5, 0.5))
    rep = perturbation_bound_report(conj, moved)
    assert max(c["q"] for c in rep["clusters"]) < 1e-9
    assert moved.length == pytest.approx(24 * math.pi, abs=1e-9)
