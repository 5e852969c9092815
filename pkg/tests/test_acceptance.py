"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from rlab.bounds import (SPLIT_THRESHOLD, detour_curve, detour_length_bound, eps_two_point_bound,
                         link_lower_bound, phi, phi_excess, qn, split_margin)
from rlab.cones import splitting_hypotheses
from rlab.constructions import build, solve_tangent
from rlab.curves import ArcPiece, PiecewiseCurve, point_curve_distance
from rlab.decomposition import (perturbation_bound_report, verify_conjoined,
                                verify_suitable)
from rlab.experiments import DescentParams, ExperimentConfig, local_min_experiment, shortening_descent
from rlab.metrics import (crossing_linking_polyline, gauss_linking_polyline, linking_number,
                          linking_matrix, measure, min_distance, tube_thickness)

LEN_M = 6 * math.pi - 8 * math.atan(math.sqrt(15))


@contextmanager
def checking(criterion, number, title):
    checks = {}
    t0 = time.perf_counter()
    try:
        yield checks
    except Exception as exc:
        checks[f"raised {type(exc).__name__}: {exc}"] = False
    elapsed = time.perf_counter() - t0
    failed = [k for k, ok in checks.items() if not ok]
    detail = f"{elapsed:.1f}s" + (f"; failed: {', '.join(failed)}" if failed else "")
    criterion(number, title, not failed and bool(checks), detail)
    assert checks and not failed, failed


@pytest.fixture(scope="module")
def gordian():
    return build("gordian-split-4")[0]


def test_c01_ropelength_and_margin(criterion):
    with checking(criterion, 1, "split link ropelength and margin") as c:
        t0 = time.perf_counter()
        link, _ = build("gordian-split-4")
        rep = measure(link)
        rl = rep["ropelength"]
        c["ropelength in [31.107, 31.111]"] = 31.107 <= rl["lo"] and rl["hi"] <= 31.111
        c["len(M) closed form"] = abs(link[0].length_interval().mid - LEN_M) < 1e-9
        m = split_margin(rl["hi"])
        c["margin positive"] = m.value > 0
        c["margin < 0.08%"] = m.value < 0.0008 * rl["lo"]
        c["runtime < 10 s"] = time.perf_counter() - t0 < 10


def test_c02_tangency(criterion):
    with checking(criterion, 2, "tangency solve numerics") as c:
        t0 = time.perf_counter()
        sol = solve_tangent()
        C = build("gordian-split-4")[0][3]
        c["beta"] = 1.2549 <= sol.beta <= 1.2559
        c["|N-O|"] = 1.0920 <= sol.segment_length <= 1.0930
        arc_b = [p for p in C.pieces if p.kind == "torus_section"][0].length
        c["len(b)"] = 0.2111 <= arc_b <= 0.2121
        c["len(C)"] = 10.236 <= C.length_interval().mid <= 10.240
        c["runtime < 1 s"] = time.perf_counter() - t0 < 1


def test_c03_thickness(criterion):
    with checking(criterion, 3, "thickness certificates") as c:
        t0 = time.perf_counter()
        link, _ = build("gordian-split-4")
        rep = tube_thickness(link, tol=1e-7)
        c["tau within 1e-6 of 1"] = rep.tau.lo >= 1 - 1e-6 and rep.tau.hi <= 1 + 1e-6
        c["tau_e >= 1"] = rep.tau_e.lo >= 1 - 1e-6
        C = link[3]
        peaks = C.curvature_peaks()
        zs = sorted({round(float(C.points(np.array([s]))[0][2]), 6) for s, _ in peaks})
        zp = math.sqrt(7) / 2
        c["peaks at P and V"] = (len(zs) == 2 and abs(zs[0] + zp) < 1e-6 and abs(zs[1] - zp) < 1e-6)
        c["curvature max in [1.49, 1.53]"] = all(1.49 <= k <= 1.53 for _, k in peaks)
        c["runtime < 30 s"] = time.perf_counter() - t0 < 30


def test_c04_tables_and_bounds(criterion):
    with checking(criterion, 4, "Q-table and closed-form bounds") as c:
        c["Q_1..Q_4"] = [qn(n) for n in (1, 2, 3, 4)] == [0.0, 2.0, 3.0, 4.0]
        c["2 pi + 4"] = abs(eps_two_point_bound(2.0, 0.0).value - (2 * math.pi + 4)) < 1e-12
        c["8 pi + 6"] = abs(SPLIT_THRESHOLD - (8 * math.pi + 6)) < 1e-12 and abs(SPLIT_THRESHOLD - 31.1327) < 1e-4


def test_c05_splitting_hypotheses(criterion, gordian):
    with checking(criterion, 5, "splitting bound hypotheses") as c:
        hyp = splitting_hypotheses(gordian)
        c["two transverse intersections"] = hyp["two_transverse"] and len(hyp["intersections"]) == 2
        lk = np.abs(hyp.get("halves_linking", [[0, 0], [0, 0]]))
        # M1 is whichever half meets A1
        c["|lk(M1,A1)| = |lk(M2,A2)| = 1"] = (lk[0][0] == lk[1][1] == 1) or (lk[1][0] == lk[0][1] == 1)


def _unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def admissible_configuration(rng):
    """``a, b`` just outside two unit balls whose centers ``x, y`` and the
    projection center ``m`` are pairwise closer than 1/2."""
    while True:
        x = rng.normal(size=3)
        y = x + rng.uniform(0.0, 0.45) * _unit(rng)
        m = (x + y) / 2 + rng.uniform(0.0, 0.2) * _unit(rng)
        if max(np.linalg.norm(x - y), np.linalg.norm(x - m), np.linalg.norm(y - m)) >= 0.5:
            continue
        u = _unit(rng)
        w = _unit(rng)
        w -= (w @ u) * u
        w /= np.linalg.norm(w)
        th = rng.uniform(0.02, 0.48)
        c = (x + y) / 2
        a = c + rng.uniform(1.0, 1.03) * u
        b = c + rng.uniform(1.0, 1.03) * (math.cos(th) * u + math.sin(th) * w)
        if np.linalg.norm(b - a) >= 0.5:
            continue
        if min(np.linalg.norm(p - q) for p in (a, b) for q in (x, y)) < 1.0:
            continue
        return a, b, x, y, m


def test_c06_phi_and_detour(criterion):
    with checking(criterion, 6, "phi properties and detour lemma") as c:
        xs = np.logspace(-8, math.log10(0.5), 100)
        # phi(x) - x ~ 4x^3/3 falls below one ulp of x near 1e-8
        c["phi(x) > x"] = bool(np.all(phi_excess(xs) > 0)) and bool(np.all(phi(xs[xs > 1e-5]) > xs[xs > 1e-5]))
        small = xs[xs < 1e-4]
        c["phi(x)/x -> 1"] = bool(np.all(np.abs(phi(small) / small - 1) < 1e-3))
        rng = np.random.default_rng(2024)
        worst_len, worst_dist, detours = np.inf, np.inf, 0
        for _ in range(1000):
            a, b, x, y, m = admissible_configuration(rng)
            C = detour_curve(a, b, x, y, m)
            detours += any(p.kind == "arc" for p in C.pieces)
            worst_len = min(worst_len, detour_length_bound(a, b) + 1e-9 - C.length)
            worst_dist = min(worst_dist, point_curve_distance(x, C), point_curve_distance(y, C))
            if not (np.allclose(C.start, a) and np.allclose(C.end, b)):
                c["endpoints a and b"] = False
        c["length bound"] = worst_len >= 0
        c["avoids unit balls"] = worst_dist >= 1 - 1e-9
        c["sampler exercises detours"] = detours >= 100


def test_c07_augmented_unlink(criterion):
    with checking(criterion, 7, "augmented unlink suitability") as c:
        t0 = time.perf_counter()
        link, conj = build("augmented-unlink-24pi")
        c["ropelength 24 pi"] = abs(link.length - 24 * math.pi) < 1e-9
        c["linking number 0"] = linking_number(link[0], link[1]) == 0
        c["conjoined"] = verify_conjoined(link, conj).passed
        rep = verify_suitable(link, conj)
        c["suitable"] = rep.passed
        c["margin 4/3"] = abs(conj.margin() - 4 / 3) < 1e-12
        c["runtime < 10 s"] = time.perf_counter() - t0 < 10
        plain, pconj = build("conjoined-unlink-12pi")
        c["non-augmented margin exactly 1"] = pconj.margin() == 1.0
        c["non-augmented not suitable"] = not verify_suitable(plain, pconj).passed


def test_c08_local_minimum_experiment(criterion):
    with checking(criterion, 8, "local-minimum perturbation experiment") as c:
        t0 = time.perf_counter()
        cfg = ExperimentConfig(construction="augmented-unlink-24pi", eps=0.01, trials=200, seed=42,
                               with_inequality=True)
        rep = local_min_experiment(cfg)
        ref = 24 * math.pi
        c["no failed trials"] = not rep.failures and len(rep.lengths) == 200
        c["lengths >= 24 pi - 1e-6"] = min(rep.lengths) >= ref - 1e-6
        c["RHS >= 24 pi"] = all(r["rhs"] >= ref - 1e-9 for r in rep.inequalities)
        c["cluster terms >= 0"] = all(r["terms_nonnegative"] for r in rep.inequalities)
        c["length >= RHS"] = all(r["inequality_holds"] for r in rep.inequalities)
        c["runtime < 5 min"] = time.perf_counter() - t0 < 300


@pytest.mark.parametrize("k,n", [(2, 0), (2, 3), (4, 5)])
def test_c09_linking_n(criterion, k, n):
    with checking(criterion, 9, f"linking-n family k={k}, n={n}") as c:
        link, conj = build(f"linking-n:k={k},n={n}")
        c["linking number n"] = linking_number(link[0], link[1]) == n
        c["suitable"] = verify_suitable(link, conj).passed
        if n >= 1:
            c["exceeds class lower bound"] = link.length > link_lower_bound([1, 1]).value
        c["measured length (24k+2n+2) pi"] = abs(link.length - (24 * k + 2 * n + 2) * math.pi) < 1e-9


def _random_arc(rng, closed):
    center = rng.uniform(-1.5, 1.5, 3)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    r = rng.uniform(0.5, 1.5)
    sweep = 2 * math.pi if closed else rng.uniform(0.5, 5.0)
    return PiecewiseCurve([ArcPiece(center, q[:, 0], q[:, 1], r, rng.uniform(0, 2 * math.pi), sweep)],
                          closed=closed)


def grid_distance(A, B, h=1e-4, coarse=1e-2):
    """Minimum distance over ``h``-spaced arclength grids on both curves.

    A coarse all-pairs pass bounds the answer; only coarse cells that can
    still hold the fine minimum are refined, which gives the same value as
    the full fine grid.
    """
    sa = np.linspace(0.0, A.length, int(math.ceil(A.length / coarse)) + 1)
    sb = np.linspace(0.0, B.length, int(math.ceil(B.length / coarse)) + 1)
    D = np.linalg.norm(A.points(sa, wrap=False)[:, None] - B.points(sb, wrap=False)[None], axis=-1)
    ha, hb = sa[1] - sa[0], sb[1] - sb[0]
    best = D.min()
    # every point lies within half a coarse step of a coarse sample
    slack = (ha + hb) / 2
    cand = np.argwhere(D <= best + slack)
    for i, j in cand[np.argsort(D[cand[:, 0], cand[:, 1]])]:
        if D[i, j] > best + slack:
            break
        ta = np.arange(max(sa[i] - ha / 2, 0.0), min(sa[i] + ha / 2, A.length) + h / 2, h)
        tb = np.arange(max(sb[j] - hb / 2, 0.0), min(sb[j] + hb / 2, B.length) + h / 2, h)
        PA, PB = A.points(np.minimum(ta, A.length), wrap=False), B.points(np.minimum(tb, B.length), wrap=False)
        best = min(best, float(np.linalg.norm(PA[:, None] - PB[None], axis=-1).min()))
    return float(best)


def torus_pair(k, n=400, R=2.0, r=0.8, phase=0.0, rng=None):
    t = np.linspace(0, 2 * math.pi, n, endpoint=False)
    out = []
    for shift in (0.0, math.pi):
        w = k * t + shift + phase
        P = np.stack([(R + r * np.cos(w)) * np.cos(t), (R + r * np.cos(w)) * np.sin(t), r * np.sin(w)], 1)
        if rng is not None:
            P = P + rng.normal(scale=0.01, size=P.shape)
        out.append(P)
    return out


def test_c10_oracle_equivalence(criterion):
    with checking(criterion, 10, "distance and linking oracles agree") as c:
        rng = np.random.default_rng(10)
        worst, below = 0.0, 0.0
        for i in range(50):
            A = _random_arc(rng, closed=i % 2 == 0)
            B = _random_arc(rng, closed=i % 3 != 0)
            iv = min_distance(A, B, tol=1e-6)
            brute = grid_distance(A, B)
            worst = max(worst, abs(iv.lo - brute))
            below = max(below, iv.lo - brute)
        c["min_distance within 1e-3 of grid"] = worst < 1e-3
        c["certified lower bound below grid"] = below <= 1e-12
        mismatches = 0
        for i in range(50):
            k = 1 + i % 5
            P, Q = torus_pair(k, phase=rng.uniform(0, 1), rng=rng)
            if i % 2:
                Q = Q[::-1]
            g = gauss_linking_polyline(P, Q)
            x = crossing_linking_polyline(P, Q, rng.normal(size=3))
            if round(g) != x or abs(g - round(g)) > 0.1 or abs(x) != k:
                mismatches += 1
        c["Gauss and crossing agree on 50 linked pairs"] = mismatches == 0


def test_c11_descent_probes(criterion):
    with checking(criterion, 11, "descent probes (empirical evidence only)") as c:
        hopf = shortening_descent(build("hopf-minimal")[0], DescentParams(iterations=1000))
        aug = shortening_descent(build("augmented-unlink-24pi")[0], DescentParams(iterations=1000))
        circle = PiecewiseCurve([ArcPiece((0, 0, 0), (1, 0, 0), (0, 1, 0), 2.0, 0.0, 2 * math.pi)])
        from rlab.metrics import Link
        slack = shortening_descent(Link((circle,)), DescentParams(iterations=500, settle=0))
        c["hopf stalls"] = hopf.measured_decrease < 1e-6
        c["augmented stalls"] = aug.measured_decrease < 1e-5
        L = np.asarray(slack.lengths)
        c["radius-2 circle shortens monotonically"] = len(L) == 501 and bool(np.all(np.diff(L) < 0))
        c["labelled empirical"] = all("empirical" in t.note for t in (hopf, aug, slack))
