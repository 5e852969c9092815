"""Circle decompositions of closed curves, conjoined decompositions of
two-component links, their verifiers, and the perturbation inequality."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, least_squares, minimize, minimize_scalar

from .bounds import phi, suitability_margin
from .cones import ConeDisk, disk_curve_intersections
from .curves import PiecewiseCurve
from .intervals import IntervalValue
from .metrics import Link, linking_number, min_distance, ropelength
from .parallel import pmap

POINT_TOL = 1e-8
CIRCLE_TOL = 1e-6


class DecompositionError(ValueError):
    pass


@dataclass(frozen=True)
class CircleGroup:
    indices: Tuple[int, ...]
    signs: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if len(self.indices) != len(self.signs) or not self.indices:
            raise DecompositionError("group needs matching, nonempty indices and signs")
        if any(s not in (1, -1) for s in self.signs):
            raise DecompositionError("signs must be +1 or -1")


@dataclass(frozen=True)
class CircleDecomposition:
    """Breaking points ``a_i`` (arclengths), circle groups ``A_j`` over the
    intervals ``I_i = [a_i, a_{i+1}]`` and point clusters ``alpha_l``."""

    breaking_points: Tuple[float, ...]
    groups: Tuple[CircleGroup, ...]
    clusters: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "breaking_points", tuple(float(a) for a in self.breaking_points))
        object.__setattr__(self, "groups", tuple(
            g if isinstance(g, CircleGroup) else CircleGroup(g["indices"], g["signs"]) for g in self.groups))
        object.__setattr__(self, "clusters", tuple(tuple(int(i) for i in c) for c in self.clusters))
        n = len(self.breaking_points)
        if n == 0:
            raise DecompositionError("no breaking points")
        seen = sorted(i for g in self.groups for i in g.indices)
        if seen != list(range(n)):
            raise DecompositionError("circle groups do not partition the intervals")
        flat = [i for c in self.clusters for i in c]
        if len(flat) != len(set(flat)) or any(not 0 <= i < n for i in flat):
            raise DecompositionError("point clusters overlap or reference unknown breaking points")

    @property
    def n(self) -> int:
        return len(self.breaking_points)

    def interval(self, i: int, period: float) -> Tuple[float, float]:
        """``I_i`` as ``(a, b)`` with ``a < b``; ``b`` may exceed the period."""
        a = self.breaking_points[i]
        gap = (self.breaking_points[(i + 1) % self.n] - a) % period
        if gap == 0.0:
            gap = period if self.n == 1 else 0.0
        return a, a + gap

    def relabeled(self, shift: int) -> "CircleDecomposition":
        """Same decomposition with breaking point ``i`` renamed ``i - shift``."""
        n = self.n
        new = lambda i: (i - shift) % n
        bps = [self.breaking_points[(i + shift) % n] for i in range(n)]
        groups = [CircleGroup([new(i) for i in g.indices], g.signs) for g in self.groups]
        clusters = [[new(i) for i in c] for c in self.clusters]
        return CircleDecomposition(bps, groups, clusters)

    def cluster_of(self, i: int) -> Optional[int]:
        for l, c in enumerate(self.clusters):
            if i in c:
                return l
        return None

    def along(self, l: int) -> List[int]:
        """Groups ``j`` having a breaking point of cluster ``l`` on the
        boundary of one of their intervals."""
        members = set(self.clusters[l])
        out = []
        for j, g in enumerate(self.groups):
            ends = set()
            for i in g.indices:
                ends.update((i, (i + 1) % self.n))
            if ends & members:
                out.append(j)
        return out

    def group_curve(self, curve: PiecewiseCurve, j: int) -> PiecewiseCurve:
        pieces = []
        for i, s in zip(self.groups[j].indices, self.groups[j].signs):
            a, b = self.interval(i, curve.length)
            if b - a >= curve.length:
                part = _full_from(curve, a)
            else:
                part = curve.sub_curve(a % curve.length, b % curve.length)
            if s < 0:
                part = part.reversed()
            pieces.extend(part.pieces)
        return PiecewiseCurve(pieces, closed=False)

    def to_dict(self) -> dict:
        return {"breaking_points": list(self.breaking_points),
                "groups": [{"indices": list(g.indices), "signs": list(g.signs)} for g in self.groups],
                "clusters": [list(c) for c in self.clusters]}

    @classmethod
    def from_dict(cls, d: dict) -> "CircleDecomposition":
        return cls(d["breaking_points"], d["groups"], d["clusters"])


def _full_from(curve: PiecewiseCurve, a: float) -> PiecewiseCurve:
    a = a % curve.length
    if a < 1e-12:
        return PiecewiseCurve(curve.pieces, closed=False)
    first = curve.sub_curve(a, curve.length)
    second = curve.sub_curve(0.0, a)
    return PiecewiseCurve(first.pieces + second.pieces, closed=False)


@dataclass(frozen=True)
class ConjoinedDecomposition:
    """Decompositions of both components plus index functions.

    ``hA[j]`` is the A-cluster (first curve) located at the center of the
    B-circle ``j``; ``hB[j]`` the B-cluster at the center of A-circle ``j``.
    ``linking[j][k]`` records whether A-circle ``j`` and B-circle ``k`` are
    non-trivially linked.
    """

    A: CircleDecomposition
    B: CircleDecomposition
    hA: Tuple[int, ...]
    hB: Tuple[int, ...]
    linking: Tuple[Tuple[bool, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "hA", tuple(int(v) for v in self.hA))
        object.__setattr__(self, "hB", tuple(int(v) for v in self.hB))
        object.__setattr__(self, "linking", tuple(tuple(bool(x) for x in row) for row in self.linking))

    def h_inverse_counts(self, side: str) -> List[int]:
        if side == "A":
            return [sum(1 for v in self.hA if v == l) for l in range(len(self.A.clusters))]
        return [sum(1 for v in self.hB if v == l) for l in range(len(self.B.clusters))]

    def f_counts(self, side: str) -> List[int]:
        dec = self.A if side == "A" else self.B
        return [len(dec.along(l)) for l in range(len(dec.clusters))]

    def cluster_counts(self, side: str) -> List[Tuple[int, int]]:
        return list(zip(self.h_inverse_counts(side), self.f_counts(side)))

    def margin(self) -> float:
        return suitability_margin(self.cluster_counts("A") + self.cluster_counts("B"))

    def to_dict(self) -> dict:
        return {"A": self.A.to_dict(), "B": self.B.to_dict(),
                "hA": {str(j): l for j, l in enumerate(self.hA)},
                "hB": {str(j): l for j, l in enumerate(self.hB)},
                "linking": [list(r) for r in self.linking]}

    @classmethod
    def from_dict(cls, d: dict) -> "ConjoinedDecomposition":
        def seq(h):
            if isinstance(h, dict):
                return [h[k] for k in sorted(h, key=int)]
            return list(h)
        return cls(CircleDecomposition.from_dict(d["A"]), CircleDecomposition.from_dict(d["B"]),
                   seq(d["hA"]), seq(d["hB"]), d["linking"])


# ---------------------------------------------------------------------------
# circles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FittedCircle:
    center: np.ndarray
    normal: np.ndarray
    radius: float
    deviation: float

    def key(self, digits: int = 6) -> tuple:
        n = self.normal
        k = int(np.argmax(np.abs(n)))
        n = n if n[k] > 0 else -n
        return (tuple(np.round(self.center, digits) + 0.0), tuple(np.round(n, digits) + 0.0),
                round(self.radius, digits))


def fit_circle(points: np.ndarray) -> FittedCircle:
    """Best-fit circle: plane by SVD, algebraic (Kasa) fit in the plane,
    then geometric least squares."""
    P = np.asarray(points, dtype=float)
    c0 = P.mean(axis=0)
    _, _, vt = np.linalg.svd(P - c0)
    e1, e2, nrm = vt[0], vt[1], vt[2]
    xy = np.stack([(P - c0) @ e1, (P - c0) @ e2], axis=1)
    A = np.column_stack([2 * xy, np.ones(len(xy))])
    rhs = (xy ** 2).sum(axis=1)
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    cx, cy = sol[0], sol[1]
    r0 = math.sqrt(max(sol[2] + cx * cx + cy * cy, 0.0))
    center0 = c0 + cx * e1 + cy * e2

    def res(v):
        c = v[:3]
        n = v[3:6] / np.linalg.norm(v[3:6])
        d = P - c
        h = d @ n
        radial = np.linalg.norm(d - np.outer(h, n), axis=1)
        return np.concatenate([radial - v[6], h])

    fit = least_squares(res, np.concatenate([center0, nrm, [r0]]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    v = fit.x
    n = v[3:6] / np.linalg.norm(v[3:6])
    r = float(v[6])
    d = P - v[:3]
    dev = float(np.max(np.linalg.norm(d - np.outer(d @ n, n), axis=1) - r, initial=0.0))
    dev = max(dev, float(np.max(np.abs(res(v)))))
    return FittedCircle(v[:3], n, r, dev)


def group_circle(curve: PiecewiseCurve, dec: CircleDecomposition, j: int, samples: int = 256):
    gc = dec.group_curve(curve, j)
    s = np.linspace(0.0, gc.length, samples, endpoint=False)
    return gc, fit_circle(gc.points(s, wrap=False))


# ---------------------------------------------------------------------------
# construction helper
# ---------------------------------------------------------------------------

def _clusters_by_position(points: np.ndarray, tol: float = POINT_TOL) -> List[List[int]]:
    out: List[List[int]] = []
    reps: List[np.ndarray] = []
    for i, p in enumerate(points):
        for k, r in enumerate(reps):
            if np.linalg.norm(p - r) < tol:
                out[k].append(i)
                break
        else:
            reps.append(p)
            out.append([i])
    return out


def _decomposition_from_labels(curve: PiecewiseCurve, labels: Sequence[str]) -> CircleDecomposition:
    bps = [float(k) for k in curve.knots[:-1]]
    order: List[str] = []
    members: Dict[str, List[int]] = {}
    for i, lab in enumerate(labels):
        if lab not in members:
            order.append(lab)
            members[lab] = []
        members[lab].append(i)
    groups = []
    for lab in order:
        idx = members[lab]
        first = math.copysign(1.0, curve.pieces[idx[0]].dtheta)
        signs = [1 if math.copysign(1.0, curve.pieces[i].dtheta) == first else -1 for i in idx]
        groups.append(CircleGroup(idx, signs))
    pts = curve.points(np.array(bps), wrap=False)
    return CircleDecomposition(bps, groups, _clusters_by_position(pts))


def single_circle_decomposition(curve: PiecewiseCurve, start: float = 0.0) -> CircleDecomposition:
    """One breaking point, one group and one cluster: the whole curve."""
    return CircleDecomposition([start], [CircleGroup([0], [1])], [[0]])


def conjoined_from_circles(link: Link, seed: int = 0) -> ConjoinedDecomposition:
    """Conjoined decomposition of two round unit circles, each breaking at
    the point where it meets the other's center."""
    if len(link) != 2:
        raise DecompositionError("need a two-component link")
    decs = []
    for k in (0, 1):
        own, other = link[k], link[1 - k]
        pts = other.points(np.linspace(0, other.length, 256, endpoint=False), wrap=False)
        z = fit_circle(own.points(np.linspace(0, own.length, 256, endpoint=False), wrap=False)).center
        s0 = float(np.linspace(0, other.length, 256, endpoint=False)[np.argmin(np.linalg.norm(pts - z, axis=1))])
        res = minimize_scalar(lambda s: float(np.linalg.norm(other.points(s) - z)),
                              bounds=(s0 - other.length / 256, s0 + other.length / 256), method="bounded",
                              options={"xatol": 1e-13})
        decs.append(float(res.x % other.length))
    A = single_circle_decomposition(link[0], decs[1])
    B = single_circle_decomposition(link[1], decs[0])
    partial = ConjoinedDecomposition(A, B, [0], [0], ())
    return ConjoinedDecomposition(A, B, [0], [0], linking_scheme(link, partial, seed))


def decomposition_from_routes(link: Link, labels_a: Sequence[str], labels_b: Sequence[str],
                              seed: int = 0) -> ConjoinedDecomposition:
    """Conjoined decomposition of a two-component link made of unit arcs,
    grouping arcs by circle label.  Repeated traversals of a label are
    split into separate groups whenever the accumulated sweep reaches a full
    turn."""
    decs = []
    for comp, labels in zip(link.components, (labels_a, labels_b)):
        uniq, sweep, copy = [], {}, {}
        for lab, p in zip(labels, comp.pieces):
            c = copy.setdefault(lab, 0)
            uniq.append(f"{lab}#{c}")
            sweep[lab] = sweep.get(lab, 0.0) + abs(p.dtheta)
            if sweep[lab] >= 2 * math.pi - 1e-9:
                sweep[lab] = 0.0
                copy[lab] = c + 1
        decs.append(_decomposition_from_labels(comp, uniq))
    A, B = decs
    hB = _center_map(link[0], A, link[1], B)
    hA = _center_map(link[1], B, link[0], A)
    partial = ConjoinedDecomposition(A, B, hA, hB, ())
    return ConjoinedDecomposition(A, B, hA, hB, linking_scheme(link, partial, seed))


def _center_map(curve: PiecewiseCurve, dec: CircleDecomposition, other: PiecewiseCurve,
                other_dec: CircleDecomposition) -> List[int]:
    """For each circle of ``dec``, the cluster of ``other_dec`` at its center."""
    reps = [other.points(other_dec.breaking_points[c[0]]) for c in other_dec.clusters]
    out = []
    for j in range(len(dec.groups)):
        _, fc = group_circle(curve, dec, j)
        d = [np.linalg.norm(fc.center - r) for r in reps]
        k = int(np.argmin(d))
        if d[k] > 1e-6:
            raise DecompositionError(f"circle {j} has no cluster of the other curve at its center")
        out.append(k)
    return out


# ---------------------------------------------------------------------------
# verifiers
# ---------------------------------------------------------------------------

@dataclass
class Report:
    checks: List[dict] = field(default_factory=list)
    data: Dict = field(default_factory=dict)

    def add(self, name: str, passed: bool, detail: str = "", offending=None, status: Optional[str] = None):
        self.checks.append({"name": name, "passed": bool(passed),
                            "status": status or ("pass" if passed else "fail"),
                            "detail": detail, "offending": list(offending or [])})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    @property
    def inconclusive(self) -> bool:
        return any(c["status"] == "unknown" for c in self.checks)

    def failed(self) -> List[str]:
        return [c["name"] for c in self.checks if not c["passed"]]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": self.checks,
                **({"data": self.data} if self.data else {})}


def verify_circle_decomposition(curve: PiecewiseCurve, dec: CircleDecomposition,
                                tol: float = CIRCLE_TOL) -> Report:
    rep = Report()
    L = curve.length
    bp = np.array(dec.breaking_points)
    gaps = np.array([np.subtract(*dec.interval(i, L)[::-1]) for i in range(dec.n)])
    bad = [int(i) for i in np.nonzero(gaps <= 0)[0]]
    wraps = abs(gaps.sum() - L) <= 1e-9 * max(1.0, L)
    rep.add("intervals", not bad and wraps and bp.min() >= 0 and bp.max() < L,
            "intervals have positive length and breaking points are cyclically ordered", bad)
    bad_circ, details = [], []
    for j in range(len(dec.groups)):
        try:
            gc, fc = group_circle(curve, dec, j)
        except Exception as exc:  # noqa: BLE001 - reported, not raised
            bad_circ.append(j)
            details.append(f"group {j}: {exc}")
            continue
        closed = np.linalg.norm(gc.end - gc.start) < POINT_TOL
        ok = (abs(gc.length - 2 * math.pi) <= tol and abs(fc.radius - 1.0) <= tol
              and fc.deviation <= tol and closed)
        if not ok:
            bad_circ.append(j)
            details.append(f"group {j}: length {gc.length:.9f}, radius {fc.radius:.9f}, "
                           f"deviation {fc.deviation:.2e}, closed {closed}")
    rep.add("unit circles", not bad_circ, "; ".join(details) or "every group parametrizes a unit circle",
            bad_circ)
    pts = curve.points(bp, wrap=False)
    cl = [dec.cluster_of(i) for i in range(dec.n)]
    bad_pairs = []
    for i1 in range(dec.n):
        for i2 in range(i1 + 1, dec.n):
            same_pt = np.linalg.norm(pts[i1] - pts[i2]) < POINT_TOL
            same_cl = cl[i1] is not None and cl[i1] == cl[i2]
            if same_pt != same_cl:
                bad_pairs.append((i1, i2))
    rep.add("clusters", not bad_pairs, "C(a_i) = C(a_k) exactly when i and k share a cluster",
            bad_pairs)
    return rep


def _flat_disk(circle: PiecewiseCurve) -> ConeDisk:
    pts = circle.points(np.linspace(0, circle.length, 64, endpoint=False), wrap=False)
    return ConeDisk(PiecewiseCurve(circle.pieces, closed=True), fit_circle(pts).center)


def verify_conjoined(link: Link, conj: ConjoinedDecomposition, tol: float = CIRCLE_TOL) -> Report:
    rep = Report()
    if len(link) != 2:
        raise DecompositionError("a conjoined decomposition needs a two-component link")
    C1, C2 = link.components
    ra = verify_circle_decomposition(C1, conj.A, tol)
    rb = verify_circle_decomposition(C2, conj.B, tol)
    rep.add("decomposition A", ra.passed, ", ".join(ra.failed()))
    rep.add("decomposition B", rb.passed, ", ".join(rb.failed()))
    d = min_distance(C1, C2, tol=0.9 * tol)
    rep.add("distance", d.lo >= 1 - 1e-6 and d.hi <= 1 + 1e-6, f"dist in [{d.lo:.9f}, {d.hi:.9f}]")
    rep.data["distance"] = d.to_dict()
    bad = []
    unresolved = []
    for side, curve, dec, other, odec, h in (("A", C1, conj.A, C2, conj.B, conj.hB),
                                            ("B", C2, conj.B, C1, conj.A, conj.hA)):
        if len(h) != len(dec.groups):
            bad.append((side, "h", len(h)))
            continue
        cache = {}
        for j in range(len(dec.groups)):
            gc, fc = group_circle(curve, dec, j)
            l = h[j]
            if not 0 <= l < len(odec.clusters):
                bad.append((side, j, "cluster index"))
                continue
            z = other.points(odec.breaking_points[odec.clusters[l][0]])
            if np.linalg.norm(z - fc.center) > POINT_TOL * 100:
                bad.append((side, j, "center"))
            key = fc.key()
            if key not in cache:
                circ = PiecewiseCurve(gc.pieces, closed=True)
                res = disk_curve_intersections(_flat_disk(circ), other)
                cache[key] = res
            res = cache[key]
            if not res.resolved:
                unresolved.append((side, j))
            elif not res.records or not all(r.transverse for r in res.records):
                bad.append((side, j, "transversality"))
    rep.add("centers and transversality", not bad and not unresolved,
            "each circle center is a cluster point of the other curve, pierced transversely",
            bad + unresolved, status="unknown" if unresolved and not bad else None)
    return rep


def linking_scheme(link: Link, conj: ConjoinedDecomposition, seed: int = 0) -> Tuple[Tuple[bool, ...], ...]:
    """Pairwise linking (``|lk| >= 1``) of the circle images, computed once
    per distinct pair of images."""
    C1, C2 = link.components
    circ_a = [group_circle(C1, conj.A, j) for j in range(len(conj.A.groups))]
    circ_b = [group_circle(C2, conj.B, j) for j in range(len(conj.B.groups))]
    cache: Dict = {}
    rows = []
    for ga, fa in circ_a:
        row = []
        for gb, fb in circ_b:
            key = (fa.key(), fb.key())
            if key not in cache:
                cache[key] = abs(linking_number(PiecewiseCurve(ga.pieces, closed=True),
                                                PiecewiseCurve(gb.pieces, closed=True), seed)) >= 1
            row.append(cache[key])
        rows.append(tuple(row))
    return tuple(rows)


def _germs_distinguishable(curve: PiecewiseCurve, s1: float, s2: float, p: np.ndarray,
                           w: float) -> bool:
    L = curve.length
    for rho in (w / 2, w / 4, w / 8):
        for a, b in ((s1, s2), (s2, s1)):
            outer = [(a - w, a - rho), (a + rho, a + w)]
            for lo, hi in outer:
                d = min_distance(curve, curve, tol=1e-9, range_a=(lo, hi), range_b=(b - w, b + w))
                if not d.lo > 0:
                    return False
    return True


def verify_suitable(link: Link, conj: ConjoinedDecomposition, germ: float = 0.05) -> Report:
    rep = Report()
    C1, C2 = link.components
    lk = np.array(conj.linking, dtype=bool)
    keys_a = [group_circle(C1, conj.A, j)[1].key() for j in range(len(conj.A.groups))]
    keys_b = [group_circle(C2, conj.B, j)[1].key() for j in range(len(conj.B.groups))]
    bad = []
    for j in range(lk.shape[0]):
        imgs = {keys_b[k] for k in np.nonzero(lk[j])[0]}
        if len(imgs) != 2:
            bad.append(("A", j, len(imgs)))
    for k in range(lk.shape[1]):
        imgs = {keys_a[j] for j in np.nonzero(lk[:, k])[0]}
        if len(imgs) != 2:
            bad.append(("B", k, len(imgs)))
    rep.add("linked to exactly two circles", not bad, "", bad)
    for side in ("A", "B"):
        counts = conj.cluster_counts(side)
        off = [l for l, (h, f) in enumerate(counts) if not f < 2 * h]
        rep.add(f"counting {side}", not off, f"(#h^-1, f) per cluster: {counts}", off)
    for side, curve, dec in (("A", C1, conj.A), ("B", C2, conj.B)):
        off = []
        for l, members in enumerate(dec.clusters):
            p = curve.points(dec.breaking_points[members[0]])
            found = False
            for x in range(len(members)):
                for y in range(x + 1, len(members)):
                    if _germs_distinguishable(curve, dec.breaking_points[members[x]],
                                              dec.breaking_points[members[y]], p, germ):
                        found = True
                        break
                if found:
                    break
            if not found:
                off.append(l)
        rep.add(f"distinguishable {side}", not off, "two germs per cluster meet only at the cluster point",
                off)
    rep.data["margin"] = conj.margin()
    return rep


# ---------------------------------------------------------------------------
# perturbation inequality
# ---------------------------------------------------------------------------

def default_windows(dec: CircleDecomposition, period: float, fraction: float = 0.05) -> List[Tuple[float, float]]:
    """Closed windows ``H_i`` around each breaking point, shrunk by halving
    until pairwise disjoint."""
    r = fraction * period
    bp = np.array(dec.breaking_points)
    if dec.n > 1:
        gaps = np.diff(np.concatenate([bp, [bp[0] + period]]))
        while r >= 0.5 * gaps.min():
            r *= 0.5
    return [(float(a - r), float(a + r)) for a in bp]


def min_diameter_points(curve, windows: Sequence[Tuple[float, float]], grid: int = 64,
                        tol: float = 1e-6):
    """One parameter per window minimizing the diameter of the evaluated
    point set.

    Returns ``(params, points, diameter, lower_bound)``; the lower bound is
    the largest certified distance between two window images.
    """
    k = len(windows)
    grids = [np.linspace(lo, hi, grid + 1) for lo, hi in windows]
    gpts = [curve.points(g) for g in grids]
    if k == 1:
        t = np.array([0.5 * (windows[0][0] + windows[0][1])])
        return t, curve.points(t), 0.0, 0.0

    def diam_of(pts):
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        return float(d.max())

    # start: grid point of each window closest to the mean of window midpoints
    ref = np.mean([curve.points(0.5 * (lo + hi)) for lo, hi in windows], axis=0)
    idx = [int(np.argmin(np.linalg.norm(g - ref, axis=1))) for g in gpts]
    t = np.array([grids[i][idx[i]] for i in range(k)])
    pts = curve.points(t)
    best = diam_of(pts)
    for _ in range(50):
        improved = False
        for i in range(k):
            others = np.delete(pts, i, axis=0)
            cand = np.max(np.linalg.norm(gpts[i][:, None, :] - others[None, :, :], axis=-1), axis=1)
            m = int(np.argmin(cand))
            lo, hi = windows[i]
            a = grids[i][max(m - 1, 0)]
            b = grids[i][min(m + 1, grid)]
            f = lambda s: float(np.max(np.linalg.norm(curve.points(np.array([s]))[0] - others, axis=1)))
            r = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
            s_new = r.x if r.fun < cand[m] else grids[i][m]
            trial = pts.copy()
            trial[i] = curve.points(np.array([s_new]))[0]
            val = diam_of(trial)
            if val < best - 1e-15:
                best, pts, t[i] = val, trial, s_new
                improved = True
        if not improved:
            break
    iu = np.triu_indices(k, 1)
    bounds = (np.array([w[0] for w in windows]), np.array([w[1] for w in windows]))

    def consider(tt):
        nonlocal best, pts, t
        tt = np.clip(tt, *bounds)
        pp = curve.points(tt)
        val = diam_of(pp)
        if val < best:
            best, pts, t = val, pp, tt

    vel = getattr(curve, "derivatives", None) or curve.tangents
    rows = np.arange(len(iu[0]))

    if best > tol * 1e-3:
        # smooth surrogate: all pairwise differences in least squares
        def res(v):
            p = curve.points(v)
            return (p[iu[0]] - p[iu[1]]).ravel()

        def jac(v):
            d = vel(v)
            J = np.zeros((len(rows), 3, k))
            J[rows, :, iu[0]] = d[iu[0]]
            J[rows, :, iu[1]] = -d[iu[1]]
            return J.reshape(-1, k)

        ls = least_squares(res, t, jac=jac, bounds=bounds, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        consider(ls.x)
    if best > tol * 1e-3:
        # epigraph form of the minimax problem
        def cons(v):
            p = curve.points(v[:-1])
            return v[-1] - np.linalg.norm(p[iu[0]] - p[iu[1]], axis=1)

        def cons_jac(v):
            p = curve.points(v[:-1])
            d = vel(v[:-1])
            diff = p[iu[0]] - p[iu[1]]
            n = diff / np.maximum(np.linalg.norm(diff, axis=1, keepdims=True), 1e-300)
            J = np.zeros((len(rows), k + 1))
            J[rows, iu[0]] = -np.einsum("ij,ij->i", n, d[iu[0]])
            J[rows, iu[1]] = np.einsum("ij,ij->i", n, d[iu[1]])
            J[:, -1] = 1.0
            return J

        res = minimize(lambda v: v[-1], np.concatenate([t, [best]]), method="SLSQP",
                       jac=lambda v: np.eye(k + 1)[-1],
                       constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                       bounds=list(windows) + [(0, None)], options={"ftol": 1e-15, "maxiter": 100})
        consider(res.x[:-1])
    lower = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            d = min_distance(curve, curve, tol=max(tol, 1e-9), range_a=windows[i], range_b=windows[j])
            lower = max(lower, d.lo)
    return t, pts, best, lower


def delta4(m: float) -> float:
    """Largest ``x`` in ``(0, 1/2]`` with ``phi(x) <= m x``."""
    if m <= 1.0:
        return 0.0
    g = lambda x: phi(x) - m * x
    if g(0.5) <= 0:
        return 0.5
    return brentq(g, 1e-12, 0.5, xtol=1e-15)


def perturbation_bound_report(conj: ConjoinedDecomposition, perturbed: Link,
                              windows: Optional[Tuple[List, List]] = None,
                              tol: float = 1e-6) -> dict:
    """Evaluate the length lower bound for a perturbation of a link with
    a suitable conjoined decomposition.

    ``perturbed`` must share the reference parametrization (arclength of
    the reference components), as produced by
    :func:`rlab.experiments.random_thick_perturbation`.
    """
    C1, C2 = perturbed.components
    if windows is None:
        windows = (default_windows(conj.A, C1.length), default_windows(conj.B, C2.length))
    n_a, n_b = len(conj.A.groups), len(conj.B.groups)
    base = 2 * (n_a + n_b) * math.pi
    m = conj.margin()
    d4 = delta4(m)
    clusters = []
    total = 0.0
    for side, curve, dec, win in (("A", C1, conj.A, windows[0]), ("B", C2, conj.B, windows[1])):
        hinv = conj.h_inverse_counts(side)
        f = conj.f_counts(side)

        def one(l):
            ws = [win[i] for i in dec.clusters[l]]
            return min_diameter_points(curve, ws, tol=tol)

        results = pmap(one, range(len(dec.clusters)))
        for l, (t, pts, q, qlo) in enumerate(results):
            if q > 0.5:
                raise DecompositionError(f"window breakdown: cluster {side}{l} has diameter {q:.4f} > 1/2")
            term = 2 * hinv[l] * q - f[l] * phi(q)
            total += term
            clusters.append({"side": side, "cluster": l, "q": q, "q_lower": qlo, "h_inv": hinv[l],
                             "f": f[l], "term": term, "params": [float(v) for v in t]})
    rhs = base + total
    measured = ropelength(perturbed)
    return {
        "base": base,
        "rhs": rhs,
        "measured": measured.to_dict(),
        "margin_m": m,
        "delta4": d4,
        "all_q_below_delta4": all(c["q"] <= d4 for c in clusters),
        "terms_nonnegative": all(c["term"] >= -1e-15 for c in clusters),
        "inequality_holds": measured.hi >= rhs - 1e-6,
        "rhs_at_least_base": rhs >= base - 1e-12,
        "clusters": clusters,
    }
