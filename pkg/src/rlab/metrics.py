"""Certified distances, thicknesses, linking numbers and separation tests
for links made of :class:`~rlab.curves.PiecewiseCurve` components."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from .curves import CurveError, PiecewiseCurve
from .intervals import IntervalValue, interval_min, interval_sum
from .parallel import pmap

UNKNOWN = "unknown"
JUNCTION_TOL = 1e-6
TUBE_CRITERION = "standard tube embedding"


class MetricError(ValueError):
    pass


class LinkingError(MetricError):
    pass


@dataclass(frozen=True)
class Link:
    components: Tuple[PiecewiseCurve, ...]
    name: str = ""

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise MetricError("a link needs at least one component")
        for i, c in enumerate(comps):
            if not c.closed:
                raise MetricError(f"component {i} is not closed")
        object.__setattr__(self, "components", comps)

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    @property
    def length(self) -> float:
        return sum(c.length_interval().mid for c in self.components)

    def transformed(self, rotation, translation=(0.0, 0.0, 0.0), scale: float = 1.0) -> "Link":
        return Link(tuple(c.transformed(rotation, translation, scale) for c in self.components),
                    self.name)

    def scaled(self, factor: float) -> "Link":
        return self.transformed(np.eye(3), np.zeros(3), factor)

    def to_dict(self) -> dict:
        out = {"components": [c.to_dict() for c in self.components]}
        if self.name:
            out = {"name": self.name, **out}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Link":
        def comp(c):
            if c.get("kind") == "perturbed":
                from .experiments import PerturbedCurve
                return PerturbedCurve.from_dict(c)
            return PiecewiseCurve.from_dict(c)
        return cls(tuple(comp(c) for c in data["components"]), data.get("name", ""))


# ---------------------------------------------------------------------------
# elementary geometry
# ---------------------------------------------------------------------------

def segment_distance(p0, p1, q0, q1):
    """Vectorized closest distance between segments ``p0p1`` and ``q0q1``.

    Returns ``(dist, u, v)`` with the closest points at ``p0 + u (p1-p0)``
    and ``q0 + v (q1-q0)``.
    """
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("...i,...i", d1, d1)
    e = np.einsum("...i,...i", d2, d2)
    f = np.einsum("...i,...i", d2, r)
    c = np.einsum("...i,...i", d1, r)
    b = np.einsum("...i,...i", d1, d2)
    denom = a * e - b * b
    a_safe = np.where(a > 0, a, 1.0)
    e_safe = np.where(e > 0, e, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / np.where(denom > 0, denom, 1.0), 0, 1), 0.0)
        v = (b * u + f) / e_safe
        lo = v < 0
        hi = v > 1
        u = np.where(lo, np.clip(-c / a_safe, 0, 1), np.where(hi, np.clip((b - c) / a_safe, 0, 1), u))
        v = np.clip(v, 0, 1)
    u = np.where(a > 0, u, 0.0)
    v = np.where(e > 0, v, 0.0)
    diff = (p0 + u[..., None] * d1) - (q0 + v[..., None] * d2)
    return np.linalg.norm(diff, axis=-1), u, v


def _rounded(lo: float, hi: float, scale: float, wit) -> IntervalValue:
    """Interval widened by the rounding error of evaluating points whose
    coordinates have magnitude up to ``scale``."""
    pad = 64 * np.finfo(float).eps * (scale + hi)
    return IntervalValue(max(0.0, lo - pad), hi + pad, wit)


def _sagitta(kappa, ell):
    """Bound on the distance from a sub-arc of length ``ell`` and curvature
    at most ``kappa`` to its chord."""
    bent = kappa * ell
    return np.where(bent <= 1.0, kappa * ell * ell / 8.0 * (1 + 1e-9), ell / 2.0)


def _elements(curve: PiecewiseCurve, h0: float, window=None):
    """Parameter elements ``[s0, s1]`` with a curvature bound each; with a
    ``window`` only that parameter range is covered."""
    if window is not None:
        lo, hi = float(window[0]), float(window[1])
        n = max(1, int(math.ceil((hi - lo) / h0)))
        edges = np.linspace(lo, hi, n + 1)
        return edges[:-1], edges[1:], np.full(n, curve.max_curvature)
    if hasattr(curve, "elements"):
        return curve.elements(h0)
    s0, s1, kap = [], [], []
    for k, p in enumerate(curve.pieces):
        n = max(1, int(math.ceil(p.length / h0)))
        edges = curve.knots[k] + np.linspace(0.0, p.length, n + 1)
        s0.append(edges[:-1])
        s1.append(edges[1:])
        kap.append(np.full(n, p.max_curvature))
    return np.concatenate(s0), np.concatenate(s1), np.concatenate(kap)


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def min_distance(A: PiecewiseCurve, B: PiecewiseCurve, tol: float = 1e-6,
                 max_pairs: int = 4_000_000, range_a=None, range_b=None) -> IntervalValue:
    """Certified enclosure of ``dist(A, B)`` by branch and bound.

    Sub-arcs are bounded by their chords plus a sagitta term; the upper
    bound is the distance of actual curve points.  The witness is the pair
    of parameters ``(s_A, s_B)`` realizing the upper bound.  ``range_a`` and
    ``range_b`` restrict the parameters (cyclically on closed curves).

    Curves not parametrized by arclength expose ``speed_bound``, an upper
    bound on ``|C'(s)|``.
    """
    h0 = min(0.1, max(A.length, B.length) / 32)
    if range_a is not None or range_b is not None:
        h0 = min(h0, max((r[1] - r[0]) / 4 for r in (range_a, range_b) if r is not None))
    a0, a1, ka = _elements(A, h0, range_a)
    b0, b1, kb = _elements(B, h0, range_b)
    wa, wb = A.closed, B.closed
    va, vb = getattr(A, "speed_bound", 1.0), getattr(B, "speed_bound", 1.0)
    ca = A.points(0.5 * (a0 + a1), wrap=wa)
    cb = B.points(0.5 * (b0 + b1), wrap=wb)
    ta, tb = cKDTree(ca), cKDTree(cb)
    dd, jj = tb.query(ca)
    i = int(np.argmin(dd))
    U = float(dd[i])
    wit = (0.5 * (a0[i] + a1[i]), 0.5 * (b0[jj[i]] + b1[jj[i]]))
    radius = U + 0.5 * (va * np.max(a1 - a0) + vb * np.max(b1 - b0)) + 1e-12
    sp = ta.sparse_distance_matrix(tb, radius, output_type="ndarray")
    ia, ib = sp["i"], sp["j"]
    if ia.size == 0:
        ia, ib = np.array([i]), np.array([jj[i]])
    sa0, sa1, sk_a = a0[ia], a1[ia], ka[ia]
    sb0, sb1, sk_b = b0[ib], b1[ib], kb[ib]
    # endpoint positions travel with the elements; each split evaluates only
    # the new midpoints
    pa, pb = A.points(np.concatenate([a0, a1]), wrap=wa), B.points(np.concatenate([b0, b1]), wrap=wb)
    P0, P1 = pa[: len(a0)][ia], pa[len(a0):][ia]
    Q0, Q1 = pb[: len(b0)][ib], pb[len(b0):][ib]
    dropped_lo = math.inf
    while True:
        dist, u, v = segment_distance(P0, P1, Q0, Q1)
        sa = sa0 + u * (sa1 - sa0)
        sb = sb0 + v * (sb1 - sb0)
        true = np.linalg.norm(A.points(sa, wrap=wa) - B.points(sb, wrap=wb), axis=-1)
        k = int(np.argmin(true))
        if true[k] < U:
            U = float(true[k])
            wit = (float(sa[k]), float(sb[k]))
        sag_a = _sagitta(sk_a, va * (sa1 - sa0))
        sag_b = _sagitta(sk_b, vb * (sb1 - sb0))
        lb = dist - sag_a - sag_b - 1e-13 * (1.0 + dist)
        live = lb <= U
        lo = min(dropped_lo, float(lb[live].min()) if live.any() else U)
        if U - lo <= tol:
            break
        active = live & (lb < U - tol)
        settled = live & ~active
        if settled.any():
            dropped_lo = min(dropped_lo, float(lb[settled].min()))
        if not active.any():
            lo = min(dropped_lo, U)
            break
        if active.sum() * 2 > max_pairs:
            lo = min(lo, float(lb[active].min()))
            break
        sa0, sa1, sk_a = sa0[active], sa1[active], sk_a[active]
        sb0, sb1, sk_b = sb0[active], sb1[active], sk_b[active]
        P0, P1, Q0, Q1 = P0[active], P1[active], Q0[active], Q1[active]
        split_a = sag_a[active] >= sag_b[active]
        # children: split A on pairs flagged split_a, otherwise split B
        sa_split, sb_split = split_a, ~split_a
        m = np.where(split_a, 0.5 * (sa0 + sa1), 0.5 * (sb0 + sb1))
        Mp = np.empty_like(P0)
        if sa_split.any():
            Mp[sa_split] = A.points(m[sa_split], wrap=wa)
        if sb_split.any():
            Mp[sb_split] = B.points(m[sb_split], wrap=wb)
        sa_, sb_ = split_a[:, None], ~split_a[:, None]
        nsa0 = np.concatenate([sa0, np.where(split_a, m, sa0)])
        nsa1 = np.concatenate([np.where(split_a, m, sa1), sa1])
        nsb0 = np.concatenate([sb0, np.where(split_a, sb0, m)])
        nsb1 = np.concatenate([np.where(split_a, sb1, m), sb1])
        nP0 = np.concatenate([P0, np.where(sa_, Mp, P0)])
        nP1 = np.concatenate([np.where(sa_, Mp, P1), P1])
        nQ0 = np.concatenate([Q0, np.where(sb_, Mp, Q0)])
        nQ1 = np.concatenate([np.where(sb_, Mp, Q1), Q1])
        sa0, sa1, sb0, sb1 = nsa0, nsa1, nsb0, nsb1
        P0, P1, Q0, Q1 = nP0, nP1, nQ0, nQ1
        sk_a = np.concatenate([sk_a, sk_a])
        sk_b = np.concatenate([sk_b, sk_b])
    scale = float(max(np.abs(pa).max(), np.abs(pb).max()))
    return _rounded(min(lo, U), U, scale, wit)


def pair_distances(link: Link, tol: float = 1e-6) -> List[dict]:
    pairs = [(i, j) for i in range(len(link)) for j in range(i + 1, len(link))]
    vals = pmap(lambda ij: min_distance(link[ij[0]], link[ij[1]], tol), pairs)
    return [{"i": i, "j": j, "dist": v} for (i, j), v in zip(pairs, vals)]


def thickness(link: Link, tol: float = 1e-6) -> IntervalValue:
    """``tau(L)``: the smallest distance between distinct components."""
    if len(link) < 2:
        raise MetricError("thickness between components needs at least two components")
    return interval_min(p["dist"] for p in pair_distances(link, tol))


# ---------------------------------------------------------------------------
# self distance
# ---------------------------------------------------------------------------

def _cyc(x, L):
    x = np.mod(x, L)
    return np.minimum(x, L - x)


def _second_derivative(C: PiecewiseCurve, s, eps=1e-6):
    return (C.tangents(s + eps) - C.tangents(s - eps)) / (2 * eps)


def _newton_critical(C: PiecewiseCurve, s, t, iters: int = 12):
    for _ in range(iters):
        P, Q = C.points(s), C.points(t)
        Ts, Tt = C.tangents(s), C.tangents(t)
        r = P - Q
        g1 = np.einsum("ij,ij->i", r, Ts)
        g2 = np.einsum("ij,ij->i", r, Tt)
        c = np.einsum("ij,ij->i", Ts, Tt)
        j11 = 1.0 + np.einsum("ij,ij->i", r, _second_derivative(C, s))
        j22 = -1.0 + np.einsum("ij,ij->i", r, _second_derivative(C, t))
        j12, j21 = -c, c
        det = j11 * j22 - j12 * j21
        det = np.where(np.abs(det) > 1e-14, det, np.nan)
        ds = (-g1 * j22 + g2 * j12) / det
        dt = (-g2 * j11 + g1 * j21) / det
        s = s + np.clip(np.nan_to_num(ds), -0.2, 0.2)
        t = t + np.clip(np.nan_to_num(dt), -0.2, 0.2)
    P, Q = C.points(s), C.points(t)
    r = P - Q
    g = np.hypot(np.einsum("ij,ij->i", r, C.tangents(s)), np.einsum("ij,ij->i", r, C.tangents(t)))
    return s, t, g, np.linalg.norm(r, axis=1)


def doubly_critical_self_distance(C: PiecewiseCurve, tol: float = 1e-6,
                                  max_boxes: int = 3_000_000) -> IntervalValue:
    """Smallest chord ``|C(s) - C(t)|`` perpendicular to both tangents.

    Branch and bound over parameter boxes.  The band ``|s - t| < pi/(2k)``
    (``k`` the maximal curvature) is excluded since a doubly critical chord
    needs a turn of at least ``pi`` between its ends.  Boxes are discarded
    when a Lipschitz bound shows one of the residuals
    ``(C(s)-C(t)).T(s)`` or ``(C(s)-C(t)).T(t)`` cannot vanish, or when a
    second-order lower bound on the distance exceeds the best value found.
    """
    if not C.closed:
        raise MetricError("doubly-critical self-distance needs a closed curve")
    L = C.length
    kap = C.max_curvature
    poly = C.polygonalize(1e-3)
    D = float(np.linalg.norm(poly.max(axis=0) - poly.min(axis=0))) + 2e-3
    band = math.pi / (2 * kap) if kap > 0 else L / 4
    L1 = 1.0 + D * kap
    h0 = min(0.25, L / 16, band / 2)
    n0 = int(math.ceil(L / h0))
    edges = np.linspace(0.0, L, n0 + 1)
    I, J = np.triu_indices(n0, 1)
    s0, s1 = edges[I], edges[I + 1]
    t0, t1 = edges[J], edges[J + 1]
    U, wit = math.inf, None
    dropped_lo = math.inf
    lo = 0.0
    for _ in range(80):
        # max cyclic separation over each box
        dmin, dmax = t0 - s1, t1 - s0
        sep_max = np.maximum(_cyc(dmin, L), _cyc(dmax, L))
        sep_max = np.where((dmin <= L / 2) & (dmax >= L / 2), L / 2, sep_max)
        keep = sep_max >= band
        s0, s1, t0, t1 = s0[keep], s1[keep], t0[keep], t1[keep]
        if s0.size == 0:
            lo = min(dropped_lo, U)
            break
        a, b = 0.5 * (s1 - s0), 0.5 * (t1 - t0)
        sc, tc = s0 + a, t0 + b
        P, Q = C.points(sc), C.points(tc)
        r = P - Q
        g1 = np.einsum("ij,ij->i", r, C.tangents(sc))
        g2 = np.einsum("ij,ij->i", r, C.tangents(tc))
        dc = np.linalg.norm(r, axis=1)
        feasible = (np.abs(g1) <= L1 * a + b) & (np.abs(g2) <= a + L1 * b)
        f_lo = 0.5 * dc * dc - np.abs(g1) * a - np.abs(g2) * b - 0.5 * (L1 * (a * a + b * b) + 2 * a * b)
        lb = np.maximum(np.sqrt(2 * np.maximum(f_lo, 0.0)), dc - a - b) - 1e-12
        small = feasible & (np.maximum(a, b) <= 0.05)
        if small.any():
            idx = np.nonzero(small)[0]
            if idx.size > 20000:
                idx = idx[np.argsort(lb[idx], kind="stable")[:20000]]
            ns, nt, g, dn = _newton_critical(C, sc[idx], tc[idx])
            ok = (g < 1e-11) & (_cyc(ns - nt, L) >= band)
            if ok.any():
                k = np.nonzero(ok)[0][np.argmin(dn[ok])]
                if dn[k] < U:
                    U = float(dn[k])
                    wit = (float(np.mod(ns[k], L)), float(np.mod(nt[k], L)))
        live = feasible & (lb <= U)
        lo = min(dropped_lo, float(lb[live].min()) if live.any() else U)
        if U - lo <= tol:
            break
        active = live & (lb < U - tol)
        settled = live & ~active
        if settled.any():
            dropped_lo = min(dropped_lo, float(lb[settled].min()))
        if not active.any():
            lo = min(dropped_lo, U)
            break
        if active.sum() * 4 > max_boxes:
            lo = min(lo, float(lb[active].min()))
            break
        s0, s1, t0, t1 = s0[active], s1[active], t0[active], t1[active]
        sm, tm = 0.5 * (s0 + s1), 0.5 * (t0 + t1)
        s0, s1, t0, t1 = (np.concatenate([s0, sm, s0, sm]), np.concatenate([sm, s1, sm, s1]),
                          np.concatenate([t0, t0, tm, tm]), np.concatenate([tm, tm, t1, t1]))
    if not math.isfinite(U):
        raise MetricError("no doubly-critical pair located")
    scale = float(np.abs(C.points(np.linspace(0.0, C.length, 64))).max())
    return _rounded(min(lo, U), U, scale, wit)


# ---------------------------------------------------------------------------
# tube thickness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThicknessReport:
    tau: Optional[IntervalValue]
    tau_e: IntervalValue
    limiting: str
    pairs: List[dict] = field(default_factory=list)
    curvature: Tuple[float, float] = (0.0, 0.0)
    self_distances: List[IntervalValue] = field(default_factory=list)
    criterion: str = TUBE_CRITERION

    def to_dict(self) -> dict:
        return {
            "tau": None if self.tau is None else self.tau.to_dict(),
            "tau_e": {**self.tau_e.to_dict(), "limiting": self.limiting},
            "curvature_max": {"sampled": self.curvature[0], "bound": self.curvature[1]},
            "self_distances": [d.to_dict() for d in self.self_distances],
            "criterion": self.criterion,
        }


def check_c1(link: Link) -> None:
    for ci, comp in enumerate(link.components):
        if not isinstance(comp, PiecewiseCurve):
            raise MetricError(f"component {ci} is not a piecewise arc/segment/torus curve")
        for j, defect in comp.junction_defects():
            if defect > JUNCTION_TOL:
                raise MetricError(
                    f"component {ci} has a tangent jump of {defect:.3e} rad at junction {j}"
                    f" (s = {comp.knots[j]:.9f})")


def tube_thickness(link: Link, tol: float = 1e-6) -> ThicknessReport:
    """``tau_e`` from the tube criterion: the minimum of ``2/kappa_max``,
    the doubly-critical self-distances and the inter-component distances."""
    check_c1(link)
    k_lo, k_hi = 0.0, 0.0
    for comp in link.components:
        a, b = comp.curvature_bounds()
        k_lo, k_hi = max(k_lo, a), max(k_hi, b)
    terms = []
    if k_hi > 0:
        terms.append(("curvature", IntervalValue(2.0 / k_hi, 2.0 / k_lo)))
    selfd = pmap(lambda c: doubly_critical_self_distance(c, tol), link.components)
    terms.append(("doubly-critical self-distance", interval_min(selfd)))
    pairs, tau = [], None
    if len(link) > 1:
        pairs = pair_distances(link, tol)
        tau = interval_min(p["dist"] for p in pairs)
        terms.append(("inter-component distance", tau))
    name, _ = min(terms, key=lambda kv: (kv[1].hi, kv[1].lo))
    tau_e = interval_min(v for _, v in terms)
    return ThicknessReport(tau, tau_e, name, pairs, (k_lo, k_hi), list(selfd))


# ---------------------------------------------------------------------------
# linking numbers
# ---------------------------------------------------------------------------

def gauss_linking_polyline(P: np.ndarray, Q: np.ndarray, chunk: int = 512) -> float:
    """Gauss linking integral of two closed polylines (vertices without a
    repeated endpoint), evaluated exactly as a sum of solid angles."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    p0, p1 = P, np.roll(P, -1, axis=0)
    total = 0.0
    for start in range(0, len(Q), chunk):
        q0 = Q[start:start + chunk]
        q1 = np.roll(Q, -1, axis=0)[start:start + chunk]
        a = p0[None, :, :] - q0[:, None, :]
        b = p0[None, :, :] - q1[:, None, :]
        c = p1[None, :, :] - q1[:, None, :]
        d = p1[None, :, :] - q0[:, None, :]
        dot = lambda x, y: np.einsum("...i,...i", x, y)
        p = dot(a, np.cross(b, c))
        an, bn, cn, dn = (np.linalg.norm(x, axis=-1) for x in (a, b, c, d))
        d1 = an * bn * cn + dot(a, b) * cn + dot(b, c) * an + dot(c, a) * bn
        d2 = an * dn * cn + dot(a, d) * cn + dot(d, c) * an + dot(c, a) * dn
        total += float(np.sum(np.arctan2(p, d1) + np.arctan2(p, d2)))
    return total / (2 * np.pi)


class _Degenerate(Exception):
    pass


def crossing_linking_polyline(P: np.ndarray, Q: np.ndarray, direction, chunk: int = 512,
                              eps: float = 1e-9) -> int:
    """Half the signed crossing count of the projections along ``direction``."""
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    e1 = np.cross(w, [1.0, 0.0, 0.0])
    if np.linalg.norm(e1) < 0.5:
        e1 = np.cross(w, [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(w, e1)
    B = np.stack([e1, e2], axis=1)
    p0, p1 = P, np.roll(P, -1, axis=0)
    q0all, q1all = Q, np.roll(Q, -1, axis=0)
    P2a, P2b = p0 @ B, p1 @ B
    total = 0
    for start in range(0, len(Q), chunk):
        q0, q1 = q0all[start:start + chunk], q1all[start:start + chunk]
        Q2a, Q2b = q0 @ B, q1 @ B
        r = P2b - P2a
        s = Q2b - Q2a
        cross = r[None, :, 0] * s[:, None, 1] - r[None, :, 1] * s[:, None, 0]
        qp = P2a[None, :, :] - Q2a[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (s[:, None, 0] * qp[..., 1] - s[:, None, 1] * qp[..., 0]) / cross
            v = (r[None, :, 0] * qp[..., 1] - r[None, :, 1] * qp[..., 0]) / cross
        scale = np.linalg.norm(r, axis=-1)[None, :] * np.linalg.norm(s, axis=-1)[:, None]
        near = (u > -eps) & (u < 1 + eps) & (v > -eps) & (v < 1 + eps)
        if np.any(near & (np.abs(cross) < eps * scale)):
            raise _Degenerate()
        hit = (u >= 0) & (u < 1) & (v >= 0) & (v < 1)
        edge = near & ~((u > eps) & (u < 1 - eps) & (v > eps) & (v < 1 - eps))
        if np.any(edge):
            raise _Degenerate()
        if not hit.any():
            continue
        jq, ip = np.nonzero(hit)
        dp = (p1 - p0)[ip]
        dq = (q1 - q0)[jq]
        xp = p0[ip] + u[jq, ip][:, None] * dp
        xq = q0[jq] + v[jq, ip][:, None] * dq
        sgn = np.sign(np.einsum("ij,ij->i", xp - xq, np.cross(dp, dq)))
        total += int(sgn.sum())
    if total % 2:
        raise _Degenerate()
    return total // 2


def _polylines_for_linking(A: PiecewiseCurve, B: PiecewiseCurve):
    d = min_distance(A, B, tol=1e-3)
    if not d.lo > 1e-9:
        raise LinkingError(f"curves are too close to certify disjointness (dist lo {d.lo:.3e})")
    tol = min(0.05, d.lo / 4)
    return A.polygonalize(tol), B.polygonalize(tol)


def linking_number_polyline(P, Q, seed: int = 0, max_draws: int = 32) -> int:
    g = gauss_linking_polyline(P, Q)
    n = int(round(g))
    if abs(g - n) >= 0.1:
        raise LinkingError(f"Gauss integral {g:.6f} is not near an integer")
    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        try:
            c = crossing_linking_polyline(P, Q, rng.normal(size=3))
        except _Degenerate:
            continue
        if c != n:
            raise LinkingError(f"crossing count {c} disagrees with Gauss integral {g:.6f}")
        return n
    raise LinkingError("no non-degenerate projection direction found")


def linking_number(A: PiecewiseCurve, B: PiecewiseCurve, seed: int = 0) -> int:
    """Linking number computed by the Gauss integral and by signed crossings
    of a projection; the two must agree."""
    P, Q = _polylines_for_linking(A, B)
    return linking_number_polyline(P, Q, seed)


def linking_matrix(link: Link, seed: int = 0) -> List[List[int]]:
    n = len(link)
    out = [[0] * n for _ in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    vals = pmap(lambda ij: linking_number(link[ij[0]], link[ij[1]], seed), pairs)
    for (i, j), v in zip(pairs, vals):
        out[i][j] = out[j][i] = v
    return out


# ---------------------------------------------------------------------------
# separation and length
# ---------------------------------------------------------------------------

def separating_margin(X: np.ndarray, Y: np.ndarray):
    """Strict linear separation of two point sets.

    Solves ``min |w|_1`` subject to ``w.x - b >= 1`` on X and
    ``w.y - b <= -1`` on Y.  Returns ``None`` when infeasible (the convex
    hulls meet), otherwise ``(gap, w, b)`` where ``gap = 2/|w|`` is the
    width of the separating slab found.
    """
    nx, ny = len(X), len(Y)
    # variables: w+ (3), w- (3), b
    A = np.zeros((nx + ny, 7))
    A[:nx, :3], A[:nx, 3:6], A[:nx, 6] = -X, X, 1.0
    A[nx:, :3], A[nx:, 3:6], A[nx:, 6] = Y, -Y, -1.0
    res = linprog(c=[1.0] * 6 + [0.0], A_ub=A, b_ub=-np.ones(nx + ny),
                  bounds=[(0, None)] * 6 + [(None, None)], method="highs")
    if res.status == 2:
        return None
    if not res.success:
        raise MetricError(f"separation LP failed: {res.message}")
    w = res.x[:3] - res.x[3:6]
    return 2.0 / float(np.linalg.norm(w)), w, float(res.x[6])


def is_separated(link: Link, part: Sequence[int], tol: float = 1e-3):
    """Whether the components in ``part`` and the rest have disjoint convex
    hulls.  Returns ``True``, ``False`` or :data:`UNKNOWN`.

    The polygons are inscribed, so their hulls lie inside the hulls of the
    curves: meeting polygon hulls prove ``False``.  ``True`` needs a slab
    wider than ``2*tol`` between the polygons.
    """
    part = sorted(set(int(i) for i in part))
    rest = [i for i in range(len(link)) if i not in part]
    if not part or not rest:
        raise MetricError("partition must be nonempty and proper")
    X = np.concatenate([link[i].polygonalize(tol) for i in part])
    Y = np.concatenate([link[i].polygonalize(tol) for i in rest])
    sep = separating_margin(X, Y)
    if sep is None:
        return False
    if sep[0] > 2 * tol:
        return True
    return UNKNOWN


def ropelength(link: Link) -> IntervalValue:
    return interval_sum(c.length_interval() for c in link.components)


def measure(link: Link, tol: float = 1e-6, seed: int = 0) -> dict:
    """Full measurement report as a JSON-ready dict."""
    rl = ropelength(link)
    out: Dict = {"link": link.name, "ropelength": rl.to_dict()}
    try:
        rep = tube_thickness(link, tol)
        out["tau_e"] = {**rep.tau_e.to_dict(), "limiting": rep.limiting,
                        "criterion": rep.criterion}
        out["curvature_max"] = {"sampled": rep.curvature[0], "bound": rep.curvature[1]}
        pairs = rep.pairs
    except MetricError as exc:
        out["tau_e"] = {"error": str(exc)}
        pairs = pair_distances(link, tol) if len(link) > 1 else []
    if pairs:
        tau = interval_min(p["dist"] for p in pairs)
        out["tau"] = tau.to_dict()
    else:
        out["tau"] = None
    out["linking_matrix"] = linking_matrix(link, seed) if len(link) > 1 else [[0]]
    out["pairs"] = [{"i": p["i"], "j": p["j"], "dist": {"lo": p["dist"].lo, "hi": p["dist"].hi},
                     "witness": list(p["dist"].witness or ())} for p in pairs]
    return out
