"""Exact piecewise curves built from circular arcs, segments and
torus sections.

All curve queries use arclength.  Pieces are immutable; a
:class:`PiecewiseCurve` validates endpoint continuity on construction and
never snaps endpoints together.

The torus-section piece lives on the boundary of the slice ``x = 0`` of the
solid unit torus around a unit circle in the XZ plane centered at
``(d, 0, 0)``::

    (d^2 + z^2 + y^2)^2 - 4 (d^2 + z^2) = 0

It is described by a ``z`` range and the sign of ``y``; internally it is
evaluated through the polar angle around the origin, which is a regular
parametrization of the whole closed curve (the ``z`` chart is singular
where ``y = 0``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .intervals import IntervalValue, interval_sum

CLOSURE_TOL = 1e-9
FRAME_TOL = 1e-12
IMPLICIT_TOL = 1e-10
CURVATURE_STEP = 1e-5

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class CurveError(ValueError):
    """Invalid piece description or curve query."""


def _vec(x) -> np.ndarray:
    a = np.asarray(x, dtype=float).reshape(3)
    a.setflags(write=False)
    return a


def _as_list(a) -> list:
    return [float(x) for x in a]


# ---------------------------------------------------------------------------
# torus section helpers
# ---------------------------------------------------------------------------

def torus_section_zmax(d: float) -> float:
    return math.sqrt(max(4.0 - d * d, 0.0))


def torus_section_point(d: float, z: float, branch: int = 1) -> np.ndarray:
    """Point ``(0, branch*y(z), z)`` of the torus-section boundary.

    Raises :class:`CurveError` when ``d^2 + z^2 > 4`` (no real branch).
    """
    rho2 = d * d + z * z
    if rho2 > 4.0 + 1e-12:
        raise CurveError(f"z={z} outside the real branch for d={d}")
    rho = math.sqrt(rho2)
    y2 = max(2.0 * rho - rho2, 0.0)
    return np.array([0.0, math.copysign(math.sqrt(y2), branch), z])


def implicit_residual(d: float, y, z):
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    q = d * d + z * z
    return (q + y * y) ** 2 - 4.0 * q


def _polar_radius(d: float, w):
    """Radius of the boundary curve along polar angle ``w`` (YZ plane)."""
    s2 = np.sin(w) ** 2
    b = 2.0 * d * d - 4.0 * s2
    c = d ** 4 - 4.0 * d * d
    big_r = 0.5 * (-b + np.sqrt(b * b - 4.0 * c))
    return np.sqrt(big_r), big_r, s2


def _polar_point(d: float, w):
    r, _, _ = _polar_radius(d, w)
    return r * np.cos(w), r * np.sin(w)


def _polar_derivative(d: float, w):
    r, big_r, s2 = _polar_radius(d, w)
    sn, cs = np.sin(w), np.cos(w)
    dbig = 8.0 * sn * cs * big_r / (2.0 * big_r + 2.0 * d * d - 4.0 * s2)
    dr = dbig / (2.0 * r)
    return dr * cs - r * sn, dr * sn + r * cs


def _omega_of(z: float, branch: int, d: float) -> float:
    p = torus_section_point(d, z, 1)
    base = math.atan2(z, p[1])
    return base if branch > 0 else math.pi - base


# ---------------------------------------------------------------------------
# pieces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArcPiece:
    """Circular arc ``center + radius*(cos t * u + sin t * v)``, ``t`` from
    ``theta0`` to ``theta0 + dtheta``."""

    center: np.ndarray
    u: np.ndarray
    v: np.ndarray
    radius: float
    theta0: float
    dtheta: float
    kind = "arc"

    def __post_init__(self):
        for name in ("center", "u", "v"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "theta0", float(self.theta0))
        object.__setattr__(self, "dtheta", float(self.dtheta))
        if abs(np.linalg.norm(self.u) - 1) > FRAME_TOL or abs(np.linalg.norm(self.v) - 1) > FRAME_TOL \
                or abs(self.u @ self.v) > FRAME_TOL:
            raise CurveError("arc frame (u, v) is not orthonormal")
        if not self.radius > 0:
            raise CurveError("arc radius must be positive")
        if self.dtheta == 0 or abs(self.dtheta) > 2 * math.pi + 1e-12:
            raise CurveError("arc sweep must be nonzero and at most 2*pi")

    @property
    def length(self) -> float:
        return self.radius * abs(self.dtheta)

    def length_interval(self) -> IntervalValue:
        return IntervalValue.exact(self.length)

    @property
    def max_curvature(self) -> float:
        return 1.0 / self.radius

    def _theta(self, s):
        return self.theta0 + math.copysign(1.0, self.dtheta) * np.asarray(s, dtype=float) / self.radius

    def points(self, s):
        t = self._theta(s)[..., None]
        return self.center + self.radius * (np.cos(t) * self.u + np.sin(t) * self.v)

    def tangents(self, s):
        t = self._theta(s)[..., None]
        sg = math.copysign(1.0, self.dtheta)
        return sg * (-np.sin(t) * self.u + np.cos(t) * self.v)

    def curvatures(self, s):
        return np.full(np.shape(s), 1.0 / self.radius)

    @property
    def start(self):
        return self.points(0.0)

    @property
    def end(self):
        return self.points(self.length)

    @property
    def normal(self):
        return np.cross(self.u, self.v)

    def reversed(self) -> "ArcPiece":
        return ArcPiece(self.center, self.u, self.v, self.radius, self.theta0 + self.dtheta, -self.dtheta)

    def sub(self, s0: float, s1: float) -> "ArcPiece":
        t0 = float(self._theta(s0))
        t1 = float(self._theta(s1))
        return ArcPiece(self.center, self.u, self.v, self.radius, t0, t1 - t0)

    def transformed(self, rotation, translation, scale: float = 1.0) -> "ArcPiece":
        R = np.asarray(rotation, dtype=float)
        return ArcPiece(scale * R @ self.center + translation, R @ self.u, R @ self.v,
                        scale * self.radius, self.theta0, self.dtheta)

    def polygon_params(self, tol: float) -> np.ndarray:
        half = math.acos(max(1.0 - tol / self.radius, -1.0)) if tol < self.radius else math.pi / 2
        n = max(2, int(math.ceil(abs(self.dtheta) / (2.0 * half))))
        return np.linspace(0.0, self.length, n + 1)

    def to_dict(self) -> dict:
        return {"type": "arc", "center": _as_list(self.center), "u": _as_list(self.u),
                "v": _as_list(self.v), "radius": self.radius, "theta0": self.theta0,
                "dtheta": self.dtheta}


@dataclass(frozen=True)
class SegmentPiece:
    a: np.ndarray
    b: np.ndarray
    kind = "segment"

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a))
        object.__setattr__(self, "b", _vec(self.b))
        if not np.linalg.norm(self.b - self.a) > 0:
            raise CurveError("segment endpoints coincide")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))

    def length_interval(self) -> IntervalValue:
        return IntervalValue.exact(self.length)

    max_curvature = 0.0

    @property
    def direction(self):
        return (self.b - self.a) / self.length

    def points(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        return self.a + s * self.direction

    def tangents(self, s):
        return np.broadcast_to(self.direction, np.shape(s) + (3,)).copy()

    def curvatures(self, s):
        return np.zeros(np.shape(s))

    @property
    def start(self):
        return self.a

    @property
    def end(self):
        return self.b

    def reversed(self) -> "SegmentPiece":
        return SegmentPiece(self.b, self.a)

    def sub(self, s0, s1) -> "SegmentPiece":
        return SegmentPiece(self.points(s0), self.points(s1))

    def transformed(self, rotation, translation, scale: float = 1.0) -> "SegmentPiece":
        R = np.asarray(rotation, dtype=float)
        return SegmentPiece(scale * R @ self.a + translation, scale * R @ self.b + translation)

    def polygon_params(self, tol: float) -> np.ndarray:
        return np.array([0.0, self.length])

    def to_dict(self) -> dict:
        return {"type": "segment", "a": _as_list(self.a), "b": _as_list(self.b)}


@dataclass(frozen=True)
class TorusSectionPiece:
    """Sub-arc of the torus-section boundary between heights ``z0`` and
    ``z1`` on the branch ``sign(y) == branch``.

    ``origin``, ``ey``, ``ez`` and ``scale`` place the YZ-plane model in
    space; the defaults put it in the YZ plane itself.
    """

    d: float
    z0: float
    z1: float
    branch: int = 1
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ey: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    ez: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    scale: float = 1.0
    kind = "torus_section"
    table_size: int = field(default=1024, compare=False)

    def __post_init__(self):
        for name in ("origin", "ey", "ez"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "z0", float(self.z0))
        object.__setattr__(self, "z1", float(self.z1))
        object.__setattr__(self, "branch", 1 if self.branch >= 0 else -1)
        if not 0.0 < self.d < 2.0:
            raise CurveError("torus-section offset d must lie in (0, 2)")
        zmax = torus_section_zmax(self.d)
        for z in (self.z0, self.z1):
            if abs(z) > zmax + 1e-12:
                raise CurveError(f"z={z} outside [-{zmax}, {zmax}]")
        if self.z0 == self.z1:
            raise CurveError("torus-section piece has zero extent")
        if abs(np.linalg.norm(self.ey) - 1) > FRAME_TOL or abs(np.linalg.norm(self.ez) - 1) > FRAME_TOL \
                or abs(self.ey @ self.ez) > FRAME_TOL:
            raise CurveError("torus-section frame is not orthonormal")
        w0 = _omega_of(self.z0, self.branch, self.d)
        w1 = _omega_of(self.z1, self.branch, self.d)
        object.__setattr__(self, "_w0", w0)
        object.__setattr__(self, "_w1", w1)
        self._build_table(self.table_size)

    def _build_table(self, n: int):
        lo, hi = min(self._w0, self._w1), max(self._w0, self._w1)
        k = np.arange(n + 1)
        nodes = 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(np.pi * k / n)
        nodes[0], nodes[-1] = lo, hi
        a, b = nodes[:-1], nodes[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        w = mid[:, None] + half[:, None] * _GL_X[None, :]
        seg = (self._speed(w) * _GL_W[None, :]).sum(axis=1) * half
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_cum", cum)
        object.__setattr__(self, "_length", float(cum[-1]))
        kap = self._curv_omega(nodes)
        if np.any(kap <= 0):
            raise CurveError("torus section lost convexity; chart assumption violated")
        object.__setattr__(self, "_ksample", float(kap.max()))
        object.__setattr__(self, "_kmax", float(kap.max()) * (1.0 + 1e-3))

    # --- raw chart in omega -------------------------------------------------
    def _speed(self, w):
        dy, dz = _polar_derivative(self.d, w)
        return self.scale * np.hypot(dy, dz)

    def _embed(self, y, z):
        y = np.asarray(y)[..., None]
        z = np.asarray(z)[..., None]
        return self.origin + self.scale * (y * self.ey + z * self.ez)

    def _curv_omega(self, w):
        h = CURVATURE_STEP
        dy, dz = _polar_derivative(self.d, w)
        y_p, z_p = _polar_derivative(self.d, w + h)
        y_m, z_m = _polar_derivative(self.d, w - h)
        ddy, ddz = (y_p - y_m) / (2 * h), (z_p - z_m) / (2 * h)
        return (dy * ddz - dz * ddy) / np.hypot(dy, dz) ** 3 / self.scale

    def _cum_at(self, w):
        """Arclength from the lower end of the omega range to ``w``."""
        w = np.asarray(w, dtype=float)
        k = np.clip(np.searchsorted(self._nodes, w, side="right") - 1, 0, len(self._nodes) - 2)
        a = self._nodes[k]
        half = 0.5 * (w - a)
        pts = (a + half)[..., None] + half[..., None] * _GL_X
        return self._cum[k] + (self._speed(pts) * _GL_W).sum(axis=-1) * half

    def _omega(self, s):
        """Omega at local arclength ``s`` measured from the piece start."""
        s = np.asarray(s, dtype=float)
        forward = self._w1 > self._w0
        sf = s if forward else self._length - s
        sf = np.clip(sf, 0.0, self._length)
        w = np.interp(sf, self._cum, self._nodes)
        lo, hi = self._nodes[0], self._nodes[-1]
        for _ in range(4):
            w = np.clip(w - (self._cum_at(w) - sf) / self._speed(w), lo, hi)
        return w

    # --- piece protocol --------------------------------------------------------
    @property
    def length(self) -> float:
        return self._length

    def length_interval(self) -> IntervalValue:
        """Enclosure from inscribed chords (lower) and the tangent-deviation
        bound ``chord / cos(dev)`` on each convex sub-arc (upper)."""
        n = self.table_size
        while True:
            lo_w, hi_w = self._nodes[0], self._nodes[-1]
            w = np.linspace(lo_w, hi_w, n + 1)
            y, z = _polar_point(self.d, w)
            dy, dz = _polar_derivative(self.d, w)
            chord_y, chord_z = np.diff(y), np.diff(z)
            chords = np.hypot(chord_y, chord_z)
            ang_c = np.arctan2(chord_z, chord_y)
            ang_t = np.arctan2(dz, dy)
            dev0 = np.abs(np.angle(np.exp(1j * (ang_t[:-1] - ang_c))))
            dev1 = np.abs(np.angle(np.exp(1j * (ang_t[1:] - ang_c))))
            dev = np.maximum(dev0, dev1)
            lower = float(np.sum(chords)) * self.scale
            upper = float(np.sum(chords / np.cos(dev))) * self.scale
            if upper - lower <= 1e-8 or n > 1 << 20:
                break
            n *= 4
        lower -= _ulp_pad(lower)
        upper += _ulp_pad(upper)
        v = self._length
        return IntervalValue(min(lower, v), max(upper, v))

    @property
    def max_curvature(self) -> float:
        return self._kmax

    def curvature_bounds(self) -> Tuple[float, float]:
        """(largest sampled curvature, upper bound)."""
        return self._ksample, self._kmax

    def curvature_peak(self) -> Tuple[float, float]:
        """Local arclength and value of the largest curvature."""
        s = np.linspace(0.0, self._length, 2049)
        k = self.curvatures(s)
        i = int(np.argmax(k))
        return float(s[i]), float(k[i])

    def points(self, s):
        y, z = _polar_point(self.d, self._omega(s))
        return self._embed(y, z)

    def tangents(self, s):
        dy, dz = _polar_derivative(self.d, self._omega(s))
        sg = 1.0 if self._w1 > self._w0 else -1.0
        t = sg * (np.asarray(dy)[..., None] * self.ey + np.asarray(dz)[..., None] * self.ez)
        return t / np.linalg.norm(t, axis=-1, keepdims=True)

    def curvatures(self, s):
        return np.abs(self._curv_omega(self._omega(s)))

    def points_omega(self, w):
        y, z = _polar_point(self.d, w)
        return self._embed(y, z)

    def curvature_omega(self, w):
        return self._curv_omega(np.asarray(w, dtype=float))

    @property
    def omega_range(self) -> Tuple[float, float]:
        return self._w0, self._w1

    @property
    def start(self):
        return self.points_omega(self._w0)

    @property
    def end(self):
        return self.points_omega(self._w1)

    def reversed(self) -> "TorusSectionPiece":
        return TorusSectionPiece(self.d, self.z1, self.z0, self.branch, self.origin, self.ey,
                                 self.ez, self.scale)

    def sub(self, s0, s1) -> "TorusSectionPiece":
        w0, w1 = float(self._omega(s0)), float(self._omega(s1))
        z0 = float(_polar_point(self.d, w0)[1])
        z1 = float(_polar_point(self.d, w1)[1])
        return TorusSectionPiece(self.d, z0, z1, self.branch, self.origin, self.ey, self.ez, self.scale)

    def transformed(self, rotation, translation, scale: float = 1.0) -> "TorusSectionPiece":
        R = np.asarray(rotation, dtype=float)
        return TorusSectionPiece(self.d, self.z0, self.z1, self.branch,
                                 scale * R @ self.origin + translation, R @ self.ey, R @ self.ez,
                                 self.scale * scale)

    def polygon_params(self, tol: float) -> np.ndarray:
        h = math.sqrt(8.0 * tol / self._kmax)
        n = max(2, int(math.ceil(self._length / h)))
        return np.linspace(0.0, self._length, n + 1)

    def implicit_residuals(self, s):
        """Residual of the implicit equation at local arclengths ``s``
        (in model coordinates)."""
        y, z = _polar_point(self.d, self._omega(s))
        return implicit_residual(self.d, y, z)

    def to_dict(self) -> dict:
        out = {"type": "torus_section", "d": self.d, "z0": self.z0, "z1": self.z1,
               "branch": self.branch}
        if np.any(self.origin != 0):
            out["origin"] = _as_list(self.origin)
        if np.any(self.ey != [0, 1, 0]) or np.any(self.ez != [0, 0, 1]):
            out["ey"], out["ez"] = _as_list(self.ey), _as_list(self.ez)
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out


def _ulp_pad(x: float) -> float:
    return 64 * math.ulp(max(abs(x), 1e-300))


Piece = (ArcPiece, SegmentPiece, TorusSectionPiece)


def make_piece(spec: dict):
    """Build a validated piece from its JSON description."""
    kind = spec.get("type")
    if kind == "arc":
        return ArcPiece(spec["center"], spec["u"], spec["v"], spec["radius"], spec["theta0"],
                        spec["dtheta"])
    if kind == "segment":
        return SegmentPiece(spec["a"], spec["b"])
    if kind == "torus_section":
        return TorusSectionPiece(spec.get("d", 1.5), spec["z0"], spec["z1"], spec.get("branch", 1),
                                 spec.get("origin", (0, 0, 0)), spec.get("ey", (0, 1, 0)),
                                 spec.get("ez", (0, 0, 1)), spec.get("scale", 1.0))
    raise CurveError(f"unknown piece type {kind!r}")


def circle(center, normal_u, normal_v, radius: float = 1.0, theta0: float = 0.0,
           sweep: float = 2 * math.pi) -> "PiecewiseCurve":
    return PiecewiseCurve([ArcPiece(center, normal_u, normal_v, radius, theta0, sweep)])


# ---------------------------------------------------------------------------
# piecewise curves
# ---------------------------------------------------------------------------

class PiecewiseCurve:
    """Ordered pieces joined end to start, optionally closed.

    The curve is parametrized by arclength ``s`` in ``[0, length]``.
    """

    def __init__(self, pieces: Sequence, closed: bool = True):
        pieces = tuple(pieces)
        if not pieces:
            raise CurveError("a curve needs at least one piece")
        for i in range(len(pieces) - 1):
            gap = np.linalg.norm(pieces[i].end - pieces[i + 1].start)
            if gap > CLOSURE_TOL:
                raise CurveError(f"pieces {i} and {i + 1} do not meet (gap {gap:.3e})")
        if closed:
            gap = np.linalg.norm(pieces[-1].end - pieces[0].start)
            if gap > CLOSURE_TOL:
                raise CurveError(f"curve is not closed (gap {gap:.3e})")
        self.pieces = pieces
        self.closed = bool(closed)
        self.knots = np.concatenate([[0.0], np.cumsum([p.length for p in pieces])])
        self.knots.setflags(write=False)

    def __len__(self):
        return len(self.pieces)

    def __repr__(self):
        kinds = ",".join(p.kind for p in self.pieces[:4])
        more = "..." if len(self.pieces) > 4 else ""
        return f"PiecewiseCurve([{kinds}{more}], closed={self.closed}, length={self.length:.6f})"

    @property
    def length(self) -> float:
        return float(self.knots[-1])

    def length_interval(self) -> IntervalValue:
        return interval_sum(p.length_interval() for p in self.pieces)

    @property
    def max_curvature(self) -> float:
        return max(p.max_curvature for p in self.pieces)

    def curvature_bounds(self) -> Tuple[float, float]:
        """(largest sampled curvature, certified-by-design upper bound)."""
        lo = hi = 0.0
        for p in self.pieces:
            a, b = p.curvature_bounds() if hasattr(p, "curvature_bounds") else (p.max_curvature,) * 2
            lo, hi = max(lo, a), max(hi, b)
        return lo, hi

    def curvature_peaks(self, rel: float = 1e-6) -> List[Tuple[float, float]]:
        """Global arclengths where the curvature reaches its sampled maximum
        (within relative tolerance ``rel``); one entry per piece."""
        found = []
        for k, p in enumerate(self.pieces):
            if hasattr(p, "curvature_peak"):
                s, val = p.curvature_peak()
            else:
                s, val = 0.5 * p.length, p.max_curvature
            found.append((float(self.knots[k] + s), val))
        top = max(v for _, v in found)
        return [(s, v) for s, v in found if v >= top * (1 - rel)]

    def _normalize(self, s, wrap: bool):
        s = np.asarray(s, dtype=float)
        if wrap and self.closed:
            s = np.mod(s, self.length)
        return s

    def locate(self, s, wrap: bool = True):
        s = self._normalize(s, wrap)
        idx = np.clip(np.searchsorted(self.knots, s, side="right") - 1, 0, len(self.pieces) - 1)
        local = np.clip(s - self.knots[idx], 0.0, None)
        return idx, local

    def _tables(self):
        tab = self.__dict__.get("_tab")
        if tab is None:
            n = len(self.pieces)
            kind = np.array([{"arc": 0, "segment": 1}.get(p.kind, 2) for p in self.pieces])
            center = np.zeros((n, 3)); u = np.zeros((n, 3)); v = np.zeros((n, 3))
            radius = np.ones(n); theta0 = np.zeros(n); sign = np.ones(n)
            a = np.zeros((n, 3)); direc = np.zeros((n, 3))
            for i, p in enumerate(self.pieces):
                if p.kind == "arc":
                    center[i], u[i], v[i] = p.center, p.u, p.v
                    radius[i], theta0[i], sign[i] = p.radius, p.theta0, math.copysign(1.0, p.dtheta)
                elif p.kind == "segment":
                    a[i], direc[i] = p.a, p.direction
            lengths = np.diff(self.knots)
            tab = dict(kind=kind, center=center, u=u, v=v, radius=radius, theta0=theta0,
                       sign=sign, a=a, dir=direc, lengths=lengths)
            self.__dict__["_tab"] = tab
        return tab

    def _gather(self, s, attr: str, width: int, wrap: bool):
        s = np.asarray(s, dtype=float)
        idx, local = self.locate(s, wrap)
        idx = np.atleast_1d(idx).reshape(-1)
        tab = self._tables()
        local = np.minimum(np.atleast_1d(local).reshape(-1), tab["lengths"][idx])
        out = np.empty((idx.size, width) if width else (idx.size,))
        kind = tab["kind"][idx]
        m = kind == 0
        if m.any():
            k = idx[m]
            t = (tab["theta0"][k] + tab["sign"][k] * local[m] / tab["radius"][k])[:, None]
            if attr == "points":
                out[m] = tab["center"][k] + tab["radius"][k][:, None] * (
                    np.cos(t) * tab["u"][k] + np.sin(t) * tab["v"][k])
            elif attr == "tangents":
                out[m] = tab["sign"][k][:, None] * (-np.sin(t) * tab["u"][k] + np.cos(t) * tab["v"][k])
            else:
                out[m] = 1.0 / tab["radius"][k]
        m = kind == 1
        if m.any():
            k = idx[m]
            if attr == "points":
                out[m] = tab["a"][k] + local[m][:, None] * tab["dir"][k]
            elif attr == "tangents":
                out[m] = tab["dir"][k]
            else:
                out[m] = 0.0
        m = kind == 2
        if m.any():
            for k in np.unique(idx[m]):
                mk = idx == k
                out[mk] = getattr(self.pieces[k], attr)(local[mk])
        return out.reshape(s.shape + ((width,) if width else ()))

    def points(self, s, wrap: bool = True):
        return self._gather(s, "points", 3, wrap)

    def tangents(self, s, wrap: bool = True):
        return self._gather(s, "tangents", 3, wrap)

    def curvatures(self, s, wrap: bool = True):
        return self._gather(s, "curvatures", 0, wrap)

    def evaluate(self, s: float):
        """Point, unit tangent and curvature at arclength ``s``.

        At a junction between pieces the curvature is the larger of the two
        one-sided values.
        """
        s = float(s)
        if s < -CLOSURE_TOL or s > self.length + CLOSURE_TOL:
            raise CurveError(f"arclength {s} outside [0, {self.length}]")
        s = min(max(s, 0.0), self.length)
        p = self.points(s, wrap=False)
        t = self.tangents(s, wrap=False)
        k = float(self.curvatures(s, wrap=False))
        j = int(np.searchsorted(self.knots, s))
        if j < len(self.knots) and abs(self.knots[j] - s) <= 1e-12:
            before = j - 1 if j > 0 else (len(self.pieces) - 1 if self.closed else None)
            after = j if j < len(self.pieces) else (0 if self.closed else None)
            for q, loc in ((before, "end"), (after, "start")):
                if q is None:
                    continue
                piece = self.pieces[q]
                k = max(k, float(piece.curvatures(piece.length if loc == "end" else 0.0)))
        return p, t, k

    @property
    def start(self):
        return self.pieces[0].start

    @property
    def end(self):
        return self.pieces[-1].end

    def reversed(self) -> "PiecewiseCurve":
        return PiecewiseCurve([p.reversed() for p in reversed(self.pieces)], self.closed)

    def transformed(self, rotation, translation=(0.0, 0.0, 0.0), scale: float = 1.0) -> "PiecewiseCurve":
        t = np.asarray(translation, dtype=float)
        return PiecewiseCurve([p.transformed(rotation, t, scale) for p in self.pieces], self.closed)

    def scaled(self, factor: float) -> "PiecewiseCurve":
        return self.transformed(np.eye(3), np.zeros(3), factor)

    def sub_curve(self, s0: float, s1: float) -> "PiecewiseCurve":
        """Open sub-curve from ``s0`` to ``s1`` (wrapping past the start when
        ``s1 < s0`` on a closed curve)."""
        if s1 < s0:
            if not self.closed:
                raise CurveError("reverse sub-curve on an open curve")
            s1 += self.length
        out = []
        span = [(s0, s1)] if s1 <= self.length else [(s0, self.length), (0.0, s1 - self.length)]
        for a, b in span:
            for k, piece in enumerate(self.pieces):
                lo, hi = self.knots[k], self.knots[k + 1]
                x0, x1 = max(a, lo), min(b, hi)
                if x1 - x0 > 1e-12:
                    out.append(piece.sub(x0 - lo, x1 - lo))
        return PiecewiseCurve(out, closed=False)

    def junction_defects(self) -> List[Tuple[int, float]]:
        """Angle (rad) between incoming and outgoing tangents at each joint."""
        out = []
        n = len(self.pieces)
        last = n if self.closed else n - 1
        for i in range(last):
            a, b = self.pieces[i], self.pieces[(i + 1) % n]
            ta = a.tangents(a.length)
            tb = b.tangents(0.0)
            ang = math.atan2(float(np.linalg.norm(np.cross(ta, tb))), float(ta @ tb))
            out.append(((i + 1) % n, ang))
        return out

    def polygonalize(self, tol: float, return_params: bool = False):
        """Inscribed polyline whose distance to the curve is at most ``tol``.

        For closed curves the starting vertex is not repeated.
        """
        if not tol > 0:
            raise CurveError("polygonalization tolerance must be positive")
        params = []
        for k, piece in enumerate(self.pieces):
            loc = piece.polygon_params(tol)
            params.append(self.knots[k] + loc[:-1])
        params.append([self.length])
        s = np.concatenate(params)
        if self.closed:
            s = s[:-1]
        pts = self.points(s, wrap=False)
        return (pts, s) if return_params else pts

    def to_dict(self) -> dict:
        out = {"pieces": [p.to_dict() for p in self.pieces]}
        if not self.closed:
            out["closed"] = False
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PiecewiseCurve":
        return cls([make_piece(p) for p in data["pieces"]], data.get("closed", True))


def concatenate(curves: Iterable[PiecewiseCurve], closed: bool = True) -> PiecewiseCurve:
    pieces = []
    for c in curves:
        pieces.extend(c.pieces)
    return PiecewiseCurve(pieces, closed)


def evaluate(curve: PiecewiseCurve, s: float):
    return curve.evaluate(s)


def length(obj) -> IntervalValue:
    return obj.length_interval()


def polygonalize(curve: PiecewiseCurve, tol: float):
    return curve.polygonalize(tol)


def rotation_matrix(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K


def chord_closed(curve: PiecewiseCurve, s0: float, s1: float) -> PiecewiseCurve:
    """Closed curve made of the sub-curve from ``s0`` to ``s1`` and the
    straight chord back to its start."""
    part = curve.sub_curve(s0, s1)
    pieces = list(part.pieces)
    if np.linalg.norm(part.end - part.start) > CLOSURE_TOL:
        pieces.append(SegmentPiece(part.end, part.start))
    return PiecewiseCurve(pieces, closed=True)


def polyline_curve(vertices, closed: bool = True) -> PiecewiseCurve:
    """Curve made of straight segments through ``vertices``."""
    v = np.asarray(vertices, dtype=float)
    nxt = np.roll(v, -1, axis=0) if closed else v[1:]
    cur = v if closed else v[:-1]
    return PiecewiseCurve([SegmentPiece(a, b) for a, b in zip(cur, nxt)], closed)


def point_piece_distance(p, piece) -> float:
    """Exact distance from ``p`` to an arc or segment piece."""
    p = np.asarray(p, dtype=float)
    if piece.kind == "segment":
        d = piece.b - piece.a
        u = float(np.clip((p - piece.a) @ d / (d @ d), 0.0, 1.0))
        return float(np.linalg.norm(p - (piece.a + u * d)))
    if piece.kind == "arc":
        rel = p - piece.center
        x, y = rel @ piece.u, rel @ piece.v
        cands = [piece.start, piece.end]
        if math.hypot(x, y) > 0:
            ang = math.atan2(y, x)
            lo = min(piece.theta0, piece.theta0 + piece.dtheta)
            k = math.ceil((lo - ang) / (2 * math.pi))
            ang += 2 * math.pi * k
            if ang <= lo + abs(piece.dtheta):
                cands.append(piece.center + piece.radius * (math.cos(ang) * piece.u + math.sin(ang) * piece.v))
        return float(min(np.linalg.norm(p - c) for c in cands))
    s = np.linspace(0.0, piece.length, 4097)
    return float(np.min(np.linalg.norm(piece.points(s) - p, axis=1)))


def point_curve_distance(p, curve: PiecewiseCurve) -> float:
    return min(point_piece_distance(p, q) for q in curve.pieces)
