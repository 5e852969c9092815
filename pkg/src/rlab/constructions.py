"""Builders for the named link configurations."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .curves import (ArcPiece, PiecewiseCurve, SegmentPiece, TorusSectionPiece, _polar_derivative,
                     _polar_point)
from .metrics import Link

D_AUX = 1.5
SQ15 = math.sqrt(15.0)
ALPHA = math.pi / 2 - math.atan(SQ15)
G_OFFSET = SQ15 / 2 - 1.0
P_HEIGHT = math.sqrt(7.0) / 2

EX = np.array([1.0, 0.0, 0.0])
EY = np.array([0.0, 1.0, 0.0])
EZ = np.array([0.0, 0.0, 1.0])


class ConstructionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Gordian split link
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TangencySolution:
    """Common tangent segment from the unit circle around ``G`` to the
    torus-section boundary, in the quadrant ``y, z >= 0`` of the YZ plane."""

    N: np.ndarray
    O: np.ndarray
    beta: float
    omega: float
    residuals: Tuple[float, float]

    @property
    def segment_length(self) -> float:
        return float(np.linalg.norm(self.N - self.O))


def _outward_normal(w: float):
    dy, dz = _polar_derivative(D_AUX, w)
    n = np.array([dz, -dy]) / math.hypot(dy, dz)
    return n


def _tangency_residual(w: float) -> float:
    y, z = _polar_point(D_AUX, w)
    n = _outward_normal(w)
    return 1.0 + n @ (np.array([G_OFFSET, 0.0]) - np.array([y, z]))


def solve_tangent() -> TangencySolution:
    """Locate the segment tangent to both the unit circle around
    ``G = (0, sqrt(15)/2 - 1, 0)`` and the torus-section boundary.

    The tangent line at a boundary point ``O(w)`` is tangent to the unit
    circle around ``G`` exactly when ``G`` lies at distance one from it on
    the inner side, which leaves a scalar equation in the polar angle
    ``w``.  Uniqueness in the quadrant is checked by a sign scan.
    """
    grid = np.linspace(0.0, math.pi / 2, 257)
    vals = np.array([_tangency_residual(w) for w in grid])
    changes = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if len(changes) != 1:
        raise ConstructionError(f"expected one bracket, found {len(changes)}")
    k = int(changes[0])
    w = brentq(_tangency_residual, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps,
               maxiter=200)
    y, z = _polar_point(D_AUX, w)
    O2 = np.array([float(y), float(z)])
    n = _outward_normal(w)
    N2 = np.array([G_OFFSET, 0.0]) + n
    beta = math.atan2(n[1], n[0])
    dy, dz = _polar_derivative(D_AUX, w)
    tang = np.array([dy, dz]) / math.hypot(dy, dz)
    s = N2 - O2
    r1 = float(s @ (N2 - np.array([G_OFFSET, 0.0])))
    r2 = float(s[0] * tang[1] - s[1] * tang[0])
    return TangencySolution(np.array([0.0, N2[0], N2[1]]), np.array([0.0, O2[0], O2[1]]),
                            beta, float(w), (r1, r2))


def main_curve() -> PiecewiseCurve:
    """Four tangent unit arcs in the XY plane (two convex, two concave)."""
    t = math.atan(SQ15)
    sweep = 2 * (math.pi - t)
    return PiecewiseCurve([
        ArcPiece((0.5, 0, 0), EX, EY, 1.0, math.pi - t, -sweep),
        ArcPiece((0, -SQ15 / 2, 0), EX, EY, 1.0, math.pi / 2 - ALPHA, 2 * ALPHA),
        ArcPiece((-0.5, 0, 0), EX, EY, 1.0, -t, -sweep),
        ArcPiece((0, SQ15 / 2, 0), EX, EY, 1.0, -math.pi / 2 - ALPHA, 2 * ALPHA),
    ])


def auxiliary_circle(sign: int) -> PiecewiseCurve:
    return PiecewiseCurve([ArcPiece((sign * D_AUX, 0, 0), EX, EZ, 1.0, 0.0, 2 * math.pi)])


def center_curve(sol: Optional[TangencySolution] = None) -> PiecewiseCurve:
    """Closed curve in the YZ plane: per quarter an arc around ``(0, +-g, 0)``,
    the tangent segment and a torus-section piece, mirrored in both axes."""
    sol = sol or solve_tangent()
    b = sol.beta
    Ny, Nz = sol.N[1], sol.N[2]
    Oy, Oz = sol.O[1], sol.O[2]
    g = G_OFFSET
    pt = lambda y, z: np.array([0.0, y, z])
    pieces = [
        ArcPiece((0, g, 0), EY, EZ, 1.0, 0.0, b),
        SegmentPiece(pt(Ny, Nz), pt(Oy, Oz)),
        TorusSectionPiece(D_AUX, Oz, P_HEIGHT, 1),
        TorusSectionPiece(D_AUX, P_HEIGHT, Oz, -1),
        SegmentPiece(pt(-Oy, Oz), pt(-Ny, Nz)),
        ArcPiece((0, -g, 0), -EY, EZ, 1.0, b, -b),
        ArcPiece((0, -g, 0), -EY, EZ, 1.0, 0.0, -b),
        SegmentPiece(pt(-Ny, -Nz), pt(-Oy, -Oz)),
        TorusSectionPiece(D_AUX, -Oz, -P_HEIGHT, -1),
        TorusSectionPiece(D_AUX, -P_HEIGHT, -Oz, 1),
        SegmentPiece(pt(Oy, -Oz), pt(Ny, -Nz)),
        ArcPiece((0, g, 0), EY, EZ, 1.0, -b, b),
    ]
    return PiecewiseCurve(pieces)


def build_gordian_split_link() -> Link:
    """Link ``(M, A1, A2, C)``."""
    sol = solve_tangent()
    return Link((main_curve(), auxiliary_circle(1), auxiliary_circle(-1), center_curve(sol)),
                "gordian-split-4")


def build_hopf_minimal() -> Link:
    return Link((PiecewiseCurve([ArcPiece((0, 0, 0), EX, EY, 1.0, 0.0, 2 * math.pi)]),
                 PiecewiseCurve([ArcPiece((1, 0, 0), -EX, EZ, 1.0, 0.0, 2 * math.pi)])),
                "hopf-minimal")


# ---------------------------------------------------------------------------
# six-circle unlink family
# ---------------------------------------------------------------------------

SQ3 = math.sqrt(3.0)
BLUE_CENTERS = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, SQ3, 0.0]])
RED_PAIRS = ((0, 1), (1, 2), (0, 2))
RED_CENTERS = np.array([(BLUE_CENTERS[i] + BLUE_CENTERS[j]) / 2 for i, j in RED_PAIRS])


def _blue_arc(c: int, deg0: float, ddeg: float) -> ArcPiece:
    return ArcPiece(BLUE_CENTERS[c], EX, EY, 1.0, math.radians(deg0), math.radians(ddeg))


def _red_arc(r: int, start_vertex: int, upper: bool) -> ArcPiece:
    """Half of red circle ``r`` from blue center ``start_vertex`` to the
    other blue center it passes through, over the top or bottom."""
    i, j = RED_PAIRS[r]
    other = j if start_vertex == i else i
    u = BLUE_CENTERS[start_vertex] - RED_CENTERS[r]
    assert np.allclose(BLUE_CENTERS[other] - RED_CENTERS[r], -u)
    return ArcPiece(RED_CENTERS[r], u, EZ, 1.0, 0.0, math.pi if upper else -math.pi)


def _blue_route() -> List[Tuple[str, ArcPiece]]:
    return [
        ("b0", _blue_arc(0, 0, 60)),
        ("b2", _blue_arc(2, 240, -300)),
        ("b1", _blue_arc(1, 120, 60)),
        ("b0", _blue_arc(0, 0, -300)),
        ("b2", _blue_arc(2, 240, 60)),
        ("b1", _blue_arc(1, 120, -300)),
    ]


def _red_route() -> List[Tuple[str, ArcPiece]]:
    return [
        ("r01", _red_arc(0, 0, True)),
        ("r12", _red_arc(1, 1, False)),
        ("r02", _red_arc(2, 2, True)),
        ("r01", _red_arc(0, 0, False)),
        ("r12", _red_arc(1, 1, True)),
        ("r02", _red_arc(2, 2, False)),
    ]


def _insert_loop(route, label: str, at_point, which: int = 0) -> list:
    """Insert a full traversal of circle ``label`` before the ``which``-th
    piece on that circle starting at ``at_point``; the loop inherits the
    direction of that piece."""
    at_point = np.asarray(at_point, dtype=float)
    hits = [k for k, (lab, piece) in enumerate(route)
            if lab == label and np.linalg.norm(piece.start - at_point) < 1e-12]
    if len(hits) <= which:
        raise ConstructionError(f"circle {label} does not start a piece at {at_point}")
    k = hits[which]
    piece = route[k][1]
    sign = math.copysign(1.0, piece.dtheta)
    loop = ArcPiece(piece.center, piece.u, piece.v, 1.0, piece.theta0, sign * 2 * math.pi)
    return route[:k] + [(label + "*", loop)] + route[k:]


def _augmented_routes():
    blue = _blue_route()
    blue = _insert_loop(blue, "b0", RED_CENTERS[0])
    blue = _insert_loop(blue, "b1", RED_CENTERS[1])
    # loop orientations chosen so that the loops cancel in the linking number
    blue = _insert_loop(blue, "b2", RED_CENTERS[2], which=1)
    red = _red_route()
    red = _insert_loop(red, "r01", BLUE_CENTERS[0])
    red = _insert_loop(red, "r12", BLUE_CENTERS[1])
    red = _insert_loop(red, "r02", BLUE_CENTERS[2])
    return blue, red


def _rotate_to(route, label: str):
    for k, (lab, _) in enumerate(route):
        if lab == label:
            return route[k:] + route[:k]
    raise ConstructionError(f"no piece labelled {label}")


def _reverse_route(route):
    return [(lab, p.reversed()) for lab, p in reversed(route)]


def _route_curve(route) -> PiecewiseCurve:
    return PiecewiseCurve([p for _, p in route])


def _finish(blue, red, name: str):
    from .decomposition import decomposition_from_routes
    link = Link((_route_curve(blue), _route_curve(red)), name)
    conj = decomposition_from_routes(link, [lab for lab, _ in blue], [lab for lab, _ in red])
    return link, conj


def build_conjoined_unlink():
    """Six unit circles traversed once each by two C^1 curves (12 pi)."""
    return _finish(_blue_route(), _red_route(), "conjoined-unlink-12pi")


def build_augmented_unlink():
    """Same circle images with every circle traversed twice (24 pi)."""
    blue, red = _augmented_routes()
    return _finish(blue, red, "augmented-unlink-24pi")


def build_linking_n(k: int, n: int):
    """``k`` copies of the augmented first curve followed by ``n`` turns
    around its first circle, against ``k`` copies of the second curve and
    one turn around its first circle."""
    if n < 0:
        raise ConstructionError("n must be nonnegative")
    if k < max(2, n - 1):
        raise ConstructionError(f"k={k} is below max(2, n-1) = {max(2, n - 1)}; the decomposition "
                                "would not be suitable")
    from .metrics import linking_number
    blue, red = _augmented_routes()
    blue = _rotate_to(blue, "b0*")
    red = _rotate_to(red, "r01*")
    s1 = ("b0", blue[0][1])
    s2 = ("r01", red[0][1])
    lk = linking_number(PiecewiseCurve([s1[1]]), PiecewiseCurve([s2[1]]))
    if lk < 0:
        # reverse the second curve so that the turns link positively
        red = _rotate_to(_reverse_route(red), "r01*")
        s2 = ("r01", red[0][1])
    c1 = blue * k + [s1] * n
    c2 = red * k + [s2]
    return _finish(c1, c2, f"linking-n:k={k},n={n}")


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

REGISTRY: Dict[str, Callable] = {
    "gordian-split-4": lambda: (build_gordian_split_link(), None),
    "hopf-minimal": lambda: (build_hopf_minimal(), None),
    "conjoined-unlink-12pi": build_conjoined_unlink,
    "augmented-unlink-24pi": build_augmented_unlink,
}

_LINKING_RE = re.compile(r"^linking-n:k=(\d+),n=(\d+)$")


def build(name: str):
    """Build a named construction; returns ``(link, decomposition or None)``."""
    if name in REGISTRY:
        return REGISTRY[name]()
    m = _LINKING_RE.match(name)
    if m:
        return build_linking_n(int(m.group(1)), int(m.group(2)))
    raise ConstructionError(f"unknown construction {name!r}; known: {sorted(REGISTRY)} "
                            "and linking-n:k=<k>,n=<n>")


def construction_names() -> List[str]:
    return sorted(REGISTRY) + ["linking-n:k=<k>,n=<n>"]
