"""Cone disks spanning a closed curve, Brouwer degrees of maps on 3-boxes
and classified disk/curve intersections."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .curves import PiecewiseCurve, _GL_W, _GL_X
from .metrics import min_distance


class DegreeError(ValueError):
    """The boundary of the box could not be certified zero-free."""


def center_of_mass(curve: PiecewiseCurve) -> np.ndarray:
    """Arclength-weighted mean position of a curve."""
    total = np.zeros(3)
    for p in curve.pieces:
        if p.kind == "segment":
            total += p.length * 0.5 * (p.a + p.b)
        elif p.kind == "arc":
            t0, t1 = p.theta0, p.theta0 + p.dtheta
            r = p.radius
            sg = math.copysign(1.0, p.dtheta)
            integ = sg * r * r * ((math.sin(t1) - math.sin(t0)) * p.u - (math.cos(t1) - math.cos(t0)) * p.v)
            total += p.length * p.center + integ
        else:
            nodes = p._nodes
            a, b = nodes[:-1], nodes[1:]
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            w = mid[:, None] + half[:, None] * _GL_X[None, :]
            wts = p._speed(w) * _GL_W[None, :] * half[:, None]
            pts = p.points_omega(w.ravel())
            total += (pts * wts.ravel()[:, None]).sum(axis=0)
    return total / curve.length


@dataclass(frozen=True)
class ConeDisk:
    """Disk ``K(x, y) = y C(x) + (1 - y) p`` coning ``base`` to ``apex``.

    Evaluated through the unit-disk chart ``(xi, eta)`` with radius ``y``
    and polar angle ``2 pi x / len(C)``; points outside the unit disk are
    clamped to its boundary.
    """

    base: PiecewiseCurve
    apex: np.ndarray

    @classmethod
    def center_of_mass_disk(cls, base: PiecewiseCurve) -> "ConeDisk":
        return cls(base, center_of_mass(base))

    def K(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)[..., None]
        return y * self.base.points(x) + (1.0 - y) * self.apex

    def chart(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        rho = np.minimum(np.hypot(xi, eta), 1.0)
        ang = np.mod(np.arctan2(eta, xi), 2 * np.pi)
        return self.K(ang * self.base.length / (2 * np.pi), rho)

    def chart_params(self, xi, eta) -> Tuple[float, float]:
        """Cone parameters ``(x, y)`` of a chart point."""
        rho = min(math.hypot(xi, eta), 1.0)
        ang = math.atan2(eta, xi) % (2 * math.pi)
        return ang * self.base.length / (2 * math.pi), rho

    @property
    def radius(self) -> float:
        pts = self.base.polygonalize(1e-3)
        return float(np.max(np.linalg.norm(pts - self.apex, axis=1))) + 1e-3

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant of the chart in the max-norm sense used by the
        subdivision (per unit of chart displacement)."""
        return self.radius + self.base.length / (2 * np.pi)


@dataclass(frozen=True)
class IntersectionRecord:
    point: np.ndarray
    t: float
    disk_params: Tuple[float, float]
    sign: int
    transverse: bool
    isolation_radius: float

    def to_dict(self) -> dict:
        return {"point": [float(v) for v in self.point], "t": self.t,
                "disk_params": list(self.disk_params), "sign": self.sign,
                "transverse": self.transverse, "isolation_radius": self.isolation_radius}


@dataclass(frozen=True)
class IntersectionResult:
    records: List[IntersectionRecord]
    unresolved: List[Tuple[Tuple[float, float], Tuple[float, float], Tuple[float, float]]] = field(
        default_factory=list)

    @property
    def resolved(self) -> bool:
        return not self.unresolved

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


# ---------------------------------------------------------------------------
# degree
# ---------------------------------------------------------------------------

def _box_surface(lo, hi, n):
    """Outward-oriented triangulation of the boundary of a 3-box."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    verts, tris = [], []
    g = np.linspace(0.0, 1.0, n + 1)
    for axis in range(3):
        a1, a2 = [k for k in range(3) if k != axis]
        for side, val in ((0, lo[axis]), (1, hi[axis])):
            base = len(verts)
            for i in range(n + 1):
                for j in range(n + 1):
                    v = np.empty(3)
                    v[axis] = val
                    v[a1] = lo[a1] + g[i] * (hi[a1] - lo[a1])
                    v[a2] = lo[a2] + g[j] * (hi[a2] - lo[a2])
                    verts.append(v)
            # (a1, a2, axis) is a right-handed frame iff axis order is cyclic
            cyclic = (a1 - axis) % 3 == 1
            outward_pos = (side == 1) == cyclic
            for i in range(n):
                for j in range(n):
                    v00 = base + i * (n + 1) + j
                    v10 = v00 + (n + 1)
                    v01 = v00 + 1
                    v11 = v10 + 1
                    if outward_pos:
                        tris += [(v00, v10, v11), (v00, v11, v01)]
                    else:
                        tris += [(v00, v11, v10), (v00, v01, v11)]
    return np.array(verts), np.array(tris)


def _solid_angle(a, b, c):
    num = np.einsum("ij,ij->i", a, np.cross(b, c))
    den = 1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(num, den)


def brouwer_degree_box(F: Callable, lo, hi, n: int = 8, lipschitz: Optional[float] = None,
                       max_depth: int = 12, max_triangles: int = 2_000_000) -> int:
    """Brouwer degree of ``F`` around 0 on the box ``[lo, hi]``.

    The image of the triangulated boundary is projected to the unit sphere
    and its signed solid angle summed.  Triangles whose vertex images are
    more than ``pi/2`` apart are split.  If ``lipschitz`` is given, the
    boundary is certified zero-free when ``min |F| > lipschitz * h`` at the
    final mesh size ``h``; otherwise :class:`DegreeError` is raised.
    ``F`` maps an ``(k, 3)`` array of points to an ``(k, 3)`` array.
    """
    verts, tris = _box_surface(lo, hi, n)
    vals = np.asarray(F(verts), dtype=float)
    span = float(np.max(np.asarray(hi, float) - np.asarray(lo, float)))
    edge = span / n * math.sqrt(2)
    total = 0.0
    pending = (verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]],
               vals[tris[:, 0]], vals[tris[:, 1]], vals[tris[:, 2]])
    depth = 0
    min_norm = float(np.min(np.linalg.norm(vals, axis=1)))
    while pending[0].shape[0]:
        P0, P1, P2, F0, F1, F2 = pending
        n0, n1, n2 = (np.linalg.norm(f, axis=1) for f in (F0, F1, F2))
        min_norm = min(min_norm, float(np.min(np.minimum(np.minimum(n0, n1), n2))))
        if min_norm == 0.0:
            raise DegreeError("F vanishes on the box boundary")
        u0, u1, u2 = F0 / n0[:, None], F1 / n1[:, None], F2 / n2[:, None]
        cmin = np.minimum(np.minimum(np.einsum("ij,ij->i", u0, u1), np.einsum("ij,ij->i", u1, u2)),
                          np.einsum("ij,ij->i", u2, u0))
        fine = cmin > 0.0  # all pairwise angles below pi/2
        lip_ok = True
        if lipschitz is not None:
            lip_ok = np.minimum(np.minimum(n0, n1), n2) > lipschitz * edge
            fine = fine & lip_ok
        total += float(np.sum(_solid_angle(u0[fine], u1[fine], u2[fine])))
        rest = ~fine
        if not rest.any():
            break
        depth += 1
        if depth > max_depth or rest.sum() * 4 > max_triangles:
            raise DegreeError("boundary could not be certified zero-free")
        P0, P1, P2 = P0[rest], P1[rest], P2[rest]
        F0, F1, F2 = F0[rest], F1[rest], F2[rest]
        M01, M12, M20 = 0.5 * (P0 + P1), 0.5 * (P1 + P2), 0.5 * (P2 + P0)
        G = np.asarray(F(np.concatenate([M01, M12, M20])), dtype=float)
        k = len(P0)
        G01, G12, G20 = G[:k], G[k:2 * k], G[2 * k:]
        pending = (np.concatenate([P0, M01, M20, M01]), np.concatenate([M01, P1, M12, M12]),
                   np.concatenate([M20, M12, P2, M20]),
                   np.concatenate([F0, G01, G20, G01]), np.concatenate([G01, F1, G12, G12]),
                   np.concatenate([G20, G12, F2, G20]))
        edge *= 0.5
    deg = total / (4 * np.pi)
    out = int(round(deg))
    if abs(deg - out) > 1e-6:
        raise DegreeError(f"non-integral winding {deg:.6f}")
    return out


# ---------------------------------------------------------------------------
# intersections
# ---------------------------------------------------------------------------

def disk_curve_intersections(disk: ConeDisk, curve: PiecewiseCurve, tol: float = 1e-9,
                             min_box: float = 1e-4, max_boxes: int = 2_000_000) -> IntersectionResult:
    """All intersections of ``curve`` with ``disk``, each with its local
    degree sign.

    Boxes ``(xi, eta, t)`` are discarded when ``|F(center)|`` exceeds the
    Lipschitz bound of ``F = K - curve`` over the box; surviving boxes are
    grouped, polished by least squares and classified by the degree of
    ``F`` on an isolating box.  Clusters that cannot be isolated are
    returned as unresolved parameter boxes.
    """
    for btol in (1e-2, 1e-4, 1e-6):
        bd = min_distance(disk.base, curve, tol=btol)
        if bd.lo > 0:
            break
    if not bd.lo > 0:
        raise ValueError("curve meets the boundary of the disk")
    Lk = disk.lipschitz
    T = curve.length
    # initial grid
    nxy = 8
    ht0 = min(0.25, T / 16)
    nt = int(math.ceil(T / ht0))
    gx = np.linspace(-1.0, 1.0, nxy + 1)
    gt = np.linspace(0.0, T, nt + 1)
    I, J, Kt = np.meshgrid(np.arange(nxy), np.arange(nxy), np.arange(nt), indexing="ij")
    x0, x1 = gx[I.ravel()], gx[I.ravel() + 1]
    y0, y1 = gx[J.ravel()], gx[J.ravel() + 1]
    t0, t1 = gt[Kt.ravel()], gt[Kt.ravel() + 1]
    # drop chart boxes entirely outside the unit disk
    near = np.hypot(np.maximum(0, np.maximum(x0, -x1)), np.maximum(0, np.maximum(y0, -y1))) <= 1.0
    x0, x1, y0, y1, t0, t1 = (a[near] for a in (x0, x1, y0, y1, t0, t1))

    def Fpts(xi, eta, t):
        return disk.chart(xi, eta) - curve.points(t)

    while True:
        hx, hy, ht = 0.5 * (x1 - x0), 0.5 * (y1 - y0), 0.5 * (t1 - t0)
        val = np.linalg.norm(Fpts(x0 + hx, y0 + hy, t0 + ht), axis=1)
        keep = val <= Lk * np.hypot(hx, hy) * 1.0000001 + ht + 1e-12
        x0, x1, y0, y1, t0, t1 = (a[keep] for a in (x0, x1, y0, y1, t0, t1))
        if x0.size == 0:
            return IntersectionResult([])
        size = max(float(np.max(x1 - x0)), float(np.max((t1 - t0) / Lk)))
        if size <= min_box or x0.size * 8 > max_boxes:
            break
        xm, ym, tm = 0.5 * (x0 + x1), 0.5 * (y0 + y1), 0.5 * (t0 + t1)
        parts = []
        for a, b in ((x0, xm), (xm, x1)):
            for c, d in ((y0, ym), (ym, y1)):
                for e, f in ((t0, tm), (tm, t1)):
                    parts.append((a, b, c, d, e, f))
        x0, x1, y0, y1, t0, t1 = (np.concatenate([p[k] for p in parts]) for k in range(6))

    # cluster surviving boxes by overlap in (xi, eta, t)
    boxes = np.stack([x0, x1, y0, y1, t0, t1], axis=1)
    order = np.lexsort((boxes[:, 0], boxes[:, 2], boxes[:, 4]))
    boxes = boxes[order]
    clusters = _cluster_boxes(boxes, T)
    records, unresolved = [], []
    for cl in clusters:
        rec = _classify(disk, curve, boxes[cl], Lk, T)
        if rec is None:
            b = boxes[cl]
            unresolved.append(((float(b[:, 0].min()), float(b[:, 1].max())),
                               (float(b[:, 2].min()), float(b[:, 3].max())),
                               (float(b[:, 4].min()), float(b[:, 5].max()))))
        else:
            records.append(rec)
    # merge duplicates (the angular seam of the chart can split one zero)
    uniq: List[IntersectionRecord] = []
    for r in sorted(records, key=lambda r: r.t):
        if any(min(abs(u.t - r.t), T - abs(u.t - r.t)) < 1e-7 and np.linalg.norm(u.point - r.point) < 1e-7
               for u in uniq):
            continue
        uniq.append(r)
    return IntersectionResult(uniq, unresolved)


def _cluster_boxes(boxes: np.ndarray, T: float) -> List[np.ndarray]:
    n = len(boxes)
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    eps = 1e-12
    # sweep along t
    order = np.argsort(boxes[:, 4], kind="stable")
    for a_idx in range(n):
        i = order[a_idx]
        for b_idx in range(a_idx + 1, n):
            j = order[b_idx]
            if boxes[j, 4] > boxes[i, 5] + eps:
                break
            if (boxes[j, 0] <= boxes[i, 1] + eps and boxes[i, 0] <= boxes[j, 1] + eps and
                    boxes[j, 2] <= boxes[i, 3] + eps and boxes[i, 2] <= boxes[j, 3] + eps):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(v) for v in groups.values()]


def _classify(disk: ConeDisk, curve: PiecewiseCurve, boxes: np.ndarray, Lk: float, T: float):
    c = np.array([0.5 * (boxes[:, 0].min() + boxes[:, 1].max()),
                  0.5 * (boxes[:, 2].min() + boxes[:, 3].max()),
                  0.5 * (boxes[:, 4].min() + boxes[:, 5].max())])

    def res(v):
        return (disk.chart(v[0], v[1]) - curve.points(v[2])).ravel()

    sol = least_squares(res, c, xtol=1e-15, ftol=1e-15, gtol=1e-15, method="lm")
    v = sol.x
    if np.linalg.norm(res(v)) > 1e-8:
        return None
    if math.hypot(v[0], v[1]) >= 1.0:
        return None
    extent = max(float(boxes[:, 1].max() - boxes[:, 0].min()), float(boxes[:, 3].max() - boxes[:, 2].min()),
                 float((boxes[:, 5].max() - boxes[:, 4].min()) / Lk))
    r = max(4 * extent, 1e-4)
    r = min(r, 0.5 * (1.0 - math.hypot(v[0], v[1])))
    if r <= 0:
        return None
    lo = np.array([v[0] - r, v[1] - r, v[2] - r * Lk])
    hi = np.array([v[0] + r, v[1] + r, v[2] + r * Lk])

    def F(pts):
        return disk.chart(pts[:, 0], pts[:, 1]) - curve.points(pts[:, 2])

    try:
        deg = brouwer_degree_box(F, lo, hi, n=6, lipschitz=Lk + 1.0)
    except Exception:
        return None
    if deg == 0:
        return None
    x, y = disk.chart_params(v[0], v[1])
    x = float(np.mod(x, disk.base.length))
    t = float(np.mod(v[2], T))
    if T - t < 1e-12:
        t = 0.0
    return IntersectionRecord(curve.points(t), t, (x, y), int(np.sign(deg)), abs(deg) == 1, float(r))


def splitting_hypotheses(link, main: int = 0, aux=(1, 2), center: int = 3, seed: int = 0) -> dict:
    """Hypotheses of the splitting bound for a four-component link.

    The curve ``main`` must meet the center-of-mass disk of ``center`` in
    exactly two transverse points; splitting ``main`` there and closing
    each half with the chord gives curves whose linking numbers with the
    two ``aux`` components are reported (best matching of halves).
    """
    from .curves import chord_closed
    from .metrics import linking_number

    M, C = link[main], link[center]
    res = disk_curve_intersections(ConeDisk.center_of_mass_disk(C), M)
    out = {"intersections": [r.to_dict() for r in res.records],
           "resolved": res.resolved,
           "two_transverse": res.resolved and len(res) == 2 and all(r.transverse for r in res.records)}
    if not out["two_transverse"]:
        out["halves_link"] = False
        return out
    t1, t2 = sorted(r.t for r in res.records)
    halves = (chord_closed(M, t1, t2), chord_closed(M, t2, t1))
    A1, A2 = link[aux[0]], link[aux[1]]
    lk = [[linking_number(h, a, seed) for a in (A1, A2)] for h in halves]
    straight = abs(lk[0][0]) == 1 and abs(lk[1][1]) == 1
    swapped = abs(lk[0][1]) == 1 and abs(lk[1][0]) == 1
    out["split_params"] = [t1, t2]
    out["halves_linking"] = lk
    out["halves_link"] = bool(straight or swapped)
    return out
