"""Closed-form ropelength lower bounds and the detour construction behind
the ``phi`` correction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .curves import ArcPiece, PiecewiseCurve, SegmentPiece

TWO_PI = 2.0 * math.pi
SPLIT_THRESHOLD = 8.0 * math.pi + 6.0
Q_TABLE = {0: 0.0, 1: 0.0, 2: 2.0, 3: 3.0, 4: 4.0}


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class BoundResult:
    value: float
    formula: str
    inputs: Dict = field(default_factory=dict)

    def __float__(self):
        return self.value

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v
        return {"value": self.value, "formula": self.formula,
                "inputs": {k: clean(v) for k, v in self.inputs.items()}}


def phi(t):
    """``arcsin(2t) - t`` on ``[0, 1/2]``."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(arr > 0.5):
        raise BoundError("phi is defined on [0, 1/2]")
    out = np.arcsin(2 * arr) - arr
    return float(out) if out.ndim == 0 else out


def phi_excess(t):
    """``phi(t) - t = arcsin(2t) - 2t`` without cancellation for small ``t``."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(arr > 0.5):
        raise BoundError("phi is defined on [0, 1/2]")
    u = 2 * arr
    u2 = u * u
    series = u * u2 * (1 / 6 + u2 * (3 / 40 + u2 * (5 / 112 + u2 * 35 / 1152)))
    out = np.where(u < 1e-2, series, np.arcsin(np.minimum(u, 1.0)) - u)
    return float(out) if out.ndim == 0 else out


def _planar(points: np.ndarray) -> np.ndarray:
    if points.shape[1] == 2:
        return points
    c = points.mean(axis=0)
    _, sv, vt = np.linalg.svd(points - c)
    if len(sv) > 2 and sv[2] > 1e-9 * max(1.0, sv[0]):
        raise BoundError("polygon vertices are not coplanar")
    return (points - c) @ vt[:2].T


def polygon_perimeter(vertices) -> float:
    """Perimeter of a convex polygon; two points count as a doubled
    segment, one point as zero."""
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    if len(v) == 1:
        return 0.0
    if len(v) == 2:
        return 2.0 * float(np.linalg.norm(v[1] - v[0]))
    p = _planar(v)
    try:
        hull = ConvexHull(p)
    except QhullError:
        # collinear: the hull is a segment
        d = p - p[0]
        direction = d[np.argmax(np.linalg.norm(d, axis=1))]
        proj = d @ direction / np.linalg.norm(direction)
        return 2.0 * float(proj.max() - proj.min())
    if len(hull.vertices) != len(p):
        raise BoundError("vertex set is not in convex position")
    ring = p[hull.vertices]
    return float(np.sum(np.linalg.norm(ring - np.roll(ring, -1, axis=0), axis=1)))


def polygon_cone_bound(r: float, vertices) -> BoundResult:
    """``2 pi r + perimeter(P)`` for a curve avoiding radius-``r`` balls
    around the vertices of a convex polygon ``P`` it links."""
    if r < 0:
        raise BoundError("r must be nonnegative")
    per = polygon_perimeter(vertices)
    return BoundResult(TWO_PI * r + per, "2*pi*r + perimeter(P)",
                       {"r": r, "vertices": np.atleast_2d(vertices), "perimeter": per})


def qn(n: int) -> float:
    """Shortest closed planar curve surrounding ``n`` points pairwise at
    distance at least one; exact only for ``n <= 4``."""
    if n in Q_TABLE and n >= 1:
        return Q_TABLE[n]
    if n >= 5:
        raise BoundError(f"no exact value for Q_{n}; only the asymptotic Q_n ~ sqrt(n) is known")
    raise BoundError("Q_n needs n >= 1")


def link_lower_bound(degrees: Sequence[int]) -> BoundResult:
    """``2 n pi + sum Q_{k_i}`` over the components that link something."""
    linked = [int(k) for k in degrees if int(k) >= 1]
    q = [qn(k) for k in linked]
    value = len(linked) * TWO_PI + sum(q)
    return BoundResult(value, "2*n*pi + sum Q_k", {"degrees": list(degrees), "Q": q})


def eps_two_point_bound(dist_xy: float, eps: float) -> BoundResult:
    if not 0.0 <= eps <= 1.0:
        raise BoundError("eps must lie in [0, 1]")
    if dist_xy < 0:
        raise BoundError("distance must be nonnegative")
    value = TWO_PI + 2.0 * dist_xy - (TWO_PI + 4.0) * eps
    return BoundResult(value, "2*pi + 2*|x-y| - (2*pi + 4)*eps", {"dist": dist_xy, "eps": eps})


def split_margin(length: float) -> BoundResult:
    margin = SPLIT_THRESHOLD - float(length)
    return BoundResult(margin, "8*pi + 6 - len(L)",
                       {"threshold": SPLIT_THRESHOLD, "length": float(length),
                        "relative": margin / float(length)})


def almost_closed_bound(diam: float, gaps: Iterable[float]) -> BoundResult:
    gaps = [float(g) for g in gaps]
    if diam < 0:
        raise BoundError("diameter must be nonnegative")
    corr = sum(phi(g) for g in gaps)
    return BoundResult(TWO_PI + 2.0 * diam - corr, "2*pi + 2*diam - sum phi(gap)",
                       {"diam": diam, "gaps": gaps})


def suitability_margin(counts: Iterable[Tuple[int, int]]) -> float:
    """``min 2 #h^{-1}(l) / f(l)`` over clusters given as ``(#h^{-1}, f)``."""
    ratios = []
    for h, f in counts:
        if f < 1:
            raise BoundError("f(l) must be at least 1")
        ratios.append(2.0 * h / f)
    if not ratios:
        raise BoundError("no clusters")
    return min(ratios)


# ---------------------------------------------------------------------------
# detour curve
# ---------------------------------------------------------------------------

def _check(cond: bool, msg: str):
    if not cond:
        raise BoundError(msg)


def detour_curve(a, b, x, y, m, slack: float = 1e-12) -> PiecewiseCurve:
    """Curve from ``a`` to ``b`` in the plane through ``a, b, m`` avoiding
    the open unit balls around ``x`` and ``y``.

    The part of the segment ``ab`` between its first and last contact with
    the two plane disks is replaced by its radial projection from ``m`` onto
    the boundary of their union.
    """
    a, b, x, y, m = (np.asarray(v, dtype=float) for v in (a, b, x, y, m))
    ab = float(np.linalg.norm(b - a))
    _check(0 < ab < 0.5, "need 0 < |a-b| < 1/2")
    for name, d in (("|x-y|", np.linalg.norm(x - y)), ("|x-m|", np.linalg.norm(x - m)),
                    ("|y-m|", np.linalg.norm(y - m))):
        _check(d < 0.5, f"need {name} < 1/2")
    for p, pn in ((a, "a"), (b, "b")):
        for c, cn in ((x, "x"), (y, "y")):
            _check(np.linalg.norm(p - c) >= 1.0 - slack, f"{pn} lies inside the unit ball around {cn}")
    seg = PiecewiseCurve([SegmentPiece(a, b)], closed=False)
    e1 = (b - a) / ab
    w = m - a
    perp = w - (w @ e1) * e1
    if np.linalg.norm(perp) < 1e-12:
        return seg
    e2 = perp / np.linalg.norm(perp)
    to2 = lambda p: np.array([(p - a) @ e1, (p - a) @ e2])
    to3 = lambda q: a + q[0] * e1 + q[1] * e2
    disks = []
    for c in (x, y):
        h = (c - a) - ((c - a) @ e1) * e1 - ((c - a) @ e2) * e2
        r2 = 1.0 - h @ h
        disks.append((to2(c), math.sqrt(max(r2, 0.0))))
    A2, B2, M2 = to2(a), to2(b), to2(m)
    # contacts of the segment with the open disks
    hits = []
    for c, r in disks:
        d = B2 - A2
        f = A2 - c
        qa, qb, qc = d @ d, 2 * f @ d, f @ f - r * r
        disc = qb * qb - 4 * qa * qc
        if disc <= 0:
            continue
        sq = math.sqrt(disc)
        t0, t1 = (-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)
        t0, t1 = max(t0, 0.0), min(t1, 1.0)
        if t1 - t0 > 1e-15:
            hits.append((t0, t1))
    if not hits:
        return seg
    tf = min(h[0] for h in hits)
    tl = max(h[1] for h in hits)
    W1, W2 = A2 + tf * (B2 - A2), A2 + tl * (B2 - A2)
    ang = lambda q: math.atan2(q[1] - M2[1], q[0] - M2[0])
    phi1 = ang(W1)
    dphi = math.atan2(math.sin(ang(W2) - phi1), math.cos(ang(W2) - phi1))

    def ray_exit(c, r, th):
        u = np.array([math.cos(th), math.sin(th)])
        f = M2 - c
        bq = f @ u
        return -bq + math.sqrt(max(bq * bq - (f @ f - r * r), 0.0))

    def owner(th):
        rs = [ray_exit(c, r, th) for c, r in disks]
        return int(np.argmax(rs))

    # switching directions: where the two circles meet
    cuts = [0.0, 1.0]
    (c1, r1), (c2, r2) = disks
    dd = float(np.linalg.norm(c2 - c1))
    if 0 < dd < r1 + r2 and dd > abs(r1 - r2):
        along = (r1 * r1 - r2 * r2 + dd * dd) / (2 * dd)
        hgt = math.sqrt(max(r1 * r1 - along * along, 0.0))
        base = c1 + along * (c2 - c1) / dd
        nrm = np.array([-(c2 - c1)[1], (c2 - c1)[0]]) / dd
        for q in (base + hgt * nrm, base - hgt * nrm):
            lam = math.atan2(math.sin(ang(q) - phi1), math.cos(ang(q) - phi1)) / dphi
            if 0 < lam < 1:
                cuts.append(lam)
    cuts = sorted(cuts)
    pieces = []
    if tf > 0:
        pieces.append(SegmentPiece(a, to3(W1)))
    u3 = e1
    v3 = e2
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo < 1e-15:
            continue
        k = owner(phi1 + 0.5 * (lo + hi) * dphi)
        c, r = disks[k]
        pts = []
        for lam in (lo, hi):
            th = phi1 + lam * dphi
            pts.append(M2 + ray_exit(c, r, th) * np.array([math.cos(th), math.sin(th)]))
        t0 = math.atan2(pts[0][1] - c[1], pts[0][0] - c[0])
        t1 = math.atan2(pts[1][1] - c[1], pts[1][0] - c[0])
        if dphi > 0:
            dt = (t1 - t0) % (2 * math.pi)
        else:
            dt = -((t0 - t1) % (2 * math.pi))
        if abs(dt) < 1e-15 or abs(dt) > 2 * math.pi - 1e-15:
            continue
        pieces.append(ArcPiece(to3(c), u3, v3, r, t0, dt))
    if tl < 1:
        pieces.append(SegmentPiece(to3(W2), b))
    return PiecewiseCurve(pieces, closed=False)


def detour_length_bound(a, b) -> float:
    ab = float(np.linalg.norm(np.asarray(b, float) - np.asarray(a, float)))
    return math.asin(2 * ab) - ab
