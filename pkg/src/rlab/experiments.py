"""Random thick perturbations, the local-minimum experiment and a
constrained shortening descent on polygonal models."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .constructions import build
from .curves import CurveError, PiecewiseCurve, _GL_W, _GL_X
from .decomposition import DecompositionError, perturbation_bound_report
from .intervals import IntervalValue
from .metrics import Link, _elements, linking_matrix, ropelength, segment_distance, thickness
from .parallel import pmap

N_MODES = 8
MAX_ATTEMPTS = 1000


class ExperimentError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# perturbed curves
# ---------------------------------------------------------------------------

class PerturbedCurve:
    """``c + scale * (C(s) + d(s) - c)`` for a closed reference curve ``C``
    and a trigonometric displacement ``d`` with ``N_MODES`` modes.

    The parameter is the arclength of ``C``; ``length`` is therefore the
    parameter period and the true length comes from :meth:`length_interval`.
    """

    closed = True

    def __init__(self, base: PiecewiseCurve, coef, center=(0.0, 0.0, 0.0), scale: float = 1.0):
        self.base = base
        self.coef = np.asarray(coef, dtype=float).reshape(-1, 2, 3)
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.length = base.length
        k = np.arange(len(self.coef))
        self._w = 2 * math.pi * k / self.length
        amp = np.linalg.norm(self.coef, axis=2).sum(axis=1)
        self.disp_bound = float(amp.sum())
        self._d1 = float((self._w * amp).sum())
        self._d2 = float((self._w ** 2 * amp).sum())
        if self._d1 >= 1:
            raise CurveError("displacement too steep: the perturbed curve may not be regular")
        self.speed_bound = self.scale * (1 + self._d1)
        self.max_curvature = (base.max_curvature + self._d2) / (self.scale * (1 - self._d1) ** 2)

    def _disp(self, s, order: int = 0):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        ph = np.outer(s, self._w)
        c, sn = np.cos(ph), np.sin(ph)
        if order == 0:
            a, b = c, sn
        else:
            a, b = -sn * self._w, c * self._w
        return a @ self.coef[:, 0, :] + b @ self.coef[:, 1, :]

    def points(self, s, wrap: bool = True):
        s = np.asarray(s, dtype=float)
        flat = np.mod(s.reshape(-1), self.length)
        p = self.base.points(flat, wrap=False) + self._disp(flat)
        out = self.center + self.scale * (p - self.center)
        return out.reshape(s.shape + (3,))

    def derivatives(self, s):
        flat = np.mod(np.asarray(s, dtype=float).reshape(-1), self.length)
        return self.scale * (self.base.tangents(flat, wrap=False) + self._disp(flat, 1))

    def tangents(self, s, wrap: bool = True):
        d = self.derivatives(s)
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def elements(self, h0: float):
        a0, a1, _ = _elements(self.base, h0)
        return a0, a1, np.full(a0.shape, self.max_curvature)

    def length_interval(self) -> IntervalValue:
        """Gauss-Legendre quadrature of the speed; the enclosure width is the
        difference between two refinement levels (an estimate, not a proof)."""
        vals = []
        for per in (16, 32):
            total = 0.0
            for k in range(len(self.base.pieces)):
                a, b = self.base.knots[k], self.base.knots[k + 1]
                n = max(1, int(math.ceil((b - a) * per / 4)))
                e = np.linspace(a, b, n + 1)
                mid, half = 0.5 * (e[1:] + e[:-1]), 0.5 * (e[1:] - e[:-1])
                s = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
                w = (half[:, None] * _GL_W[None, :]).ravel()
                total += float(np.sum(w * np.linalg.norm(self.derivatives(s), axis=1)))
            vals.append(total)
        err = abs(vals[1] - vals[0]) + 1e-13 * vals[1]
        return IntervalValue(vals[1] - err, vals[1] + err)

    def polygonalize(self, tol: float, return_params: bool = False):
        h = math.sqrt(8 * tol / max(self.max_curvature, 1e-12)) / self.speed_bound
        n = max(16, int(math.ceil(self.length / h)))
        s = np.linspace(0.0, self.length, n, endpoint=False)
        pts = self.points(s)
        return (pts, s) if return_params else pts

    def displacement_sup(self, samples: int = 8192) -> float:
        s = np.linspace(0.0, self.length, samples, endpoint=False)
        return float(np.max(np.linalg.norm(self.points(s) - self.base.points(s, wrap=False), axis=1)))

    def to_dict(self) -> dict:
        return {"kind": "perturbed", "base": self.base.to_dict(), "coef": self.coef.tolist(),
                "center": self.center.tolist(), "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbedCurve":
        return cls(PiecewiseCurve.from_dict(d["base"]), d["coef"], d["center"], d["scale"])


def _draw_coef(rng: np.random.Generator, period: float, amplitude: float) -> np.ndarray:
    coef = rng.normal(size=(N_MODES, 2, 3))
    coef[0, 1] = 0.0
    # low modes dominate: smooth fields
    coef /= (1.0 + np.arange(N_MODES))[:, None, None] ** 2
    coef *= amplitude / np.linalg.norm(coef, axis=2).sum()
    return coef


def random_thick_perturbation(link: Link, eps: float, seed, tol: float = 1e-6,
                              return_info: bool = False):
    """A link within sup-distance ``eps`` of ``link`` with thickness at
    least one.

    Each component receives a random low-frequency displacement bounded by
    about ``eps / 6``; the result is dilated about the centroid by the
    inverse of its certified thickness, and rejected if the certified bound
    on the total displacement reaches ``eps``.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        if not return_info:
            return link
        tau = thickness(link, tol).lo if len(link) > 1 else math.inf
        return link, {"attempts": 0, "sup_bound": 0.0, "scale": 1.0, "thickness": tau}
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    grid = [c.points(np.linspace(0, c.length, 2048, endpoint=False), wrap=False) for c in link]
    center = np.concatenate(grid).mean(axis=0)
    reach = max(float(np.max(np.linalg.norm(g - center, axis=1))) for g in grid) + 1e-9
    for attempt in range(1, MAX_ATTEMPTS + 1):
        amp = eps / 6 * rng.uniform(0.25, 1.0)
        coefs = [_draw_coef(rng, c.length, amp) for c in link]
        comps = [PerturbedCurve(c, k, center) for c, k in zip(link, coefs)]
        raw = Link(tuple(comps), link.name)
        tau = thickness(raw, tol).lo
        if not tau > 0:
            continue
        lam = max(1.0, 1.0 / tau)
        bound = lam * max(cp.disp_bound for cp in comps) + (lam - 1) * reach
        if bound >= eps:
            continue
        out = Link(tuple(PerturbedCurve(c, k, center, lam) for c, k in zip(link, coefs)), link.name)
        # distances scale exactly under the dilation
        info = {"attempts": attempt, "sup_bound": bound, "scale": lam, "thickness_raw": tau,
                "thickness": tau * lam}
        return (out, info) if return_info else out
    raise ExperimentError(f"no thick perturbation found in {MAX_ATTEMPTS} attempts")


# ---------------------------------------------------------------------------
# local minimum experiment
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    construction: str = "augmented-unlink-24pi"
    eps: float = 0.01
    trials: int = 200
    seed: int = 42
    with_inequality: bool = True
    tol: float = 1e-6
    step: float = 1e-3
    iterations: int = 1000
    thickness_floor: float = 1.0

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentReport:
    config: dict
    reference_length: float
    lengths: List[float] = field(default_factory=list)
    thickness: List[float] = field(default_factory=list)
    sup_bounds: List[float] = field(default_factory=list)
    inequalities: List[dict] = field(default_factory=list)
    failures: List[dict] = field(default_factory=list)

    @property
    def min_length(self) -> float:
        return min(self.lengths) if self.lengths else math.nan

    def to_dict(self) -> dict:
        out = asdict(self)
        out["min_length"] = self.min_length
        return out


def _trial(link, conj, cfg: ExperimentConfig, ss: np.random.SeedSequence, index: int) -> dict:
    try:
        pert, info = random_thick_perturbation(link, cfg.eps, ss, cfg.tol, return_info=True)
    except ExperimentError as exc:
        return {"trial": index, "error": str(exc)}
    length = ropelength(pert)
    row = {"trial": index, "length": length.lo, "thickness": info["thickness"], "sup_bound": info["sup_bound"]}
    if conj is not None and cfg.with_inequality:
        try:
            rep = perturbation_bound_report(conj, pert, tol=cfg.tol)
            row["inequality"] = {k: rep[k] for k in ("base", "rhs", "delta4", "inequality_holds",
                                                     "rhs_at_least_base", "terms_nonnegative",
                                                     "all_q_below_delta4")}
            row["inequality"]["terms"] = [c["term"] for c in rep["clusters"]]
            row["inequality"]["q"] = [c["q"] for c in rep["clusters"]]
        except DecompositionError as exc:
            row["error"] = str(exc)
    return row


def local_min_experiment(cfg: ExperimentConfig, progress: Optional[Callable[[int], None]] = None) -> ExperimentReport:
    link, conj = build(cfg.construction)
    rep = ExperimentReport(cfg.to_dict(), ropelength(link).mid)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)

    def run(i):
        row = _trial(link, conj, cfg, seeds[i], i)
        if progress is not None:
            progress(i)
        return row

    for row in pmap(run, range(cfg.trials)):
        if "length" in row:
            rep.lengths.append(row["length"])
            rep.thickness.append(row["thickness"])
            rep.sup_bounds.append(row["sup_bound"])
        if "inequality" in row:
            rep.inequalities.append({"trial": row["trial"], **row["inequality"]})
        if "error" in row:
            rep.failures.append({"trial": row["trial"], "error": row["error"]})
    return rep


# ---------------------------------------------------------------------------
# shortening descent on polygons
# ---------------------------------------------------------------------------

@dataclass
class DescentParams:
    iterations: int = 1000
    step: float = 0.02
    min_step: float = 1e-9
    vertices_per_2pi: int = 64
    floor: float = 1.0
    pushes: int = 3
    settle: int = 100
    stall_tol: float = 1e-5


@dataclass
class DescentTrajectory:
    lengths: List[float]
    steps: List[float]
    thickness: List[float]
    accepted: int
    rejected: int
    stalled: bool
    relative_decrease: float
    measured_decrease: float
    settle: int
    note: str = "empirical: descent stall is evidence, not a certificate"

    def to_dict(self) -> dict:
        return asdict(self)


def polygon_model(link: Link, vertices_per_2pi: int = 64) -> List[np.ndarray]:
    out = []
    for c in link:
        L = c.length_interval().mid
        n = max(8, int(math.ceil(vertices_per_2pi * L / (2 * math.pi))))
        s = np.linspace(0.0, c.length, n, endpoint=False)
        out.append(c.points(s))
    return out


def polygon_length(polys: Sequence[np.ndarray]) -> float:
    return float(sum(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1).sum() for p in polys))


def _close_pairs(polys, limit: float):
    """Segment pairs of distinct components closer than ``limit``."""
    segs = [(p, np.roll(p, -1, axis=0)) for p in polys]
    out = []
    for a in range(len(polys)):
        for b in range(a + 1, len(polys)):
            pa0, pa1 = segs[a]
            pb0, pb1 = segs[b]
            ha = float(np.max(np.linalg.norm(pa1 - pa0, axis=1)))
            hb = float(np.max(np.linalg.norm(pb1 - pb0, axis=1)))
            ta, tb = cKDTree(0.5 * (pa0 + pa1)), cKDTree(0.5 * (pb0 + pb1))
            sp = ta.sparse_distance_matrix(tb, limit + 0.5 * (ha + hb), output_type="ndarray")
            i, j = sp["i"], sp["j"]
            if i.size == 0:
                continue
            d, u, v = segment_distance(pa0[i], pa1[i], pb0[j], pb1[j])
            m = d < limit
            out.append((a, b, i[m], j[m], d[m], u[m], v[m]))
    return out


def polygon_thickness(polys) -> float:
    if len(polys) < 2:
        return math.inf
    best = math.inf
    probe = 1.1
    while math.isinf(best):
        for a, b, i, j, d, u, v in _close_pairs(polys, probe):
            if d.size:
                best = min(best, float(d.min()))
        probe *= 2
        if probe > 1e6:
            break
    return best


def _push_out(polys, floor: float, sweeps: int):
    polys = [p.copy() for p in polys]
    for _ in range(sweeps):
        pairs = _close_pairs(polys, floor)
        if not any(len(x[4]) for x in pairs):
            return polys, True
        moves = [np.zeros_like(p) for p in polys]
        for a, b, i, j, d, u, v in pairs:
            if not len(d):
                continue
            na, nb = len(polys[a]), len(polys[b])
            xa = polys[a][i] + u[:, None] * (polys[a][(i + 1) % na] - polys[a][i])
            xb = polys[b][j] + v[:, None] * (polys[b][(j + 1) % nb] - polys[b][j])
            n = xa - xb
            n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)
            push = 0.5 * (floor - d + 1e-12)[:, None] * n
            wa = 1.0 / ((1 - u) ** 2 + u ** 2)
            wb = 1.0 / ((1 - v) ** 2 + v ** 2)
            for tgt, idx, w, sgn, nn in ((a, i, (1 - u) * wa, 1, na), (a, (i + 1) % na, u * wa, 1, na),
                                         (b, j, (1 - v) * wb, -1, nb), (b, (j + 1) % nb, v * wb, -1, nb)):
                delta = sgn * w[:, None] * push
                # keep the largest push per vertex and direction component
                np.maximum.at(moves[tgt], idx, np.where(delta > 0, delta, 0))
                np.minimum.at(moves[tgt], idx, np.where(delta < 0, delta, 0))
        for p, m in zip(polys, moves):
            p += m
    return polys, polygon_thickness(polys) >= floor


def _dilate(polys, factor: float):
    c = np.concatenate(polys).mean(axis=0)
    return [c + factor * (p - c) for p in polys]


def _project(polys, floor: float, sweeps: int):
    if len(polys) < 2:
        return polys, math.inf
    tau = polygon_thickness(polys)
    if tau >= floor:
        return polys, tau
    pushed, _ = _push_out(polys, floor, sweeps)
    tau = polygon_thickness(pushed)
    if tau < floor:
        # fall back to a dilation, which restores the constraint exactly
        pushed = _dilate(pushed, floor / tau * (1 + 1e-12))
        tau = polygon_thickness(pushed)
    return pushed, tau


def shortening_descent(link_or_polys, params: DescentParams = DescentParams()) -> DescentTrajectory:
    """Projected gradient descent of polygonal length under the constraint
    that distinct components stay at distance at least ``floor``.

    Steps that fail to decrease the length are rejected and the step is
    halved.  The first phase lets the polygonal model relax onto its own
    discretization; it ends after ``settle`` steps or at the first step
    below ``min_step``, whichever comes first.  The step is then reset and
    up to ``iterations`` further steps are taken, stopping early once no
    step above ``min_step`` decreases the length.  The stall test uses the
    relative decrease over this second phase.
    """
    if isinstance(link_or_polys, Link):
        polys = polygon_model(link_or_polys, params.vertices_per_2pi)
    else:
        polys = [np.asarray(p, dtype=float).copy() for p in link_or_polys]
    for p in polys:
        L = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1).sum()
        if len(p) < params.vertices_per_2pi * L / (2 * math.pi) - 1e-9:
            raise ValueError("polygonal model needs at least the configured vertices per 2*pi of length")
    # initial feasibility by dilation keeps the shape of the model
    tau = polygon_thickness(polys)
    if tau < params.floor:
        polys = _dilate(polys, params.floor / tau * (1 + 1e-12))
        tau = polygon_thickness(polys)
    length = polygon_length(polys)
    lengths, steps, taus = [length], [], [tau]
    step = params.step
    acc = rej = 0
    settled, done = None, 0
    while done < params.iterations:
        if settled is None and len(steps) >= params.settle:
            settled, step = len(lengths) - 1, params.step
        grads = []
        for p in polys:
            e = np.roll(p, -1, axis=0) - p
            e /= np.linalg.norm(e, axis=1, keepdims=True)
            grads.append(np.roll(e, 1, axis=0) - e)
        trial, t_tau = _project([p - step * g for p, g in zip(polys, grads)], params.floor, params.pushes)
        t_len = polygon_length(trial)
        if t_len < length and t_tau >= params.floor * (1 - 1e-9):
            polys, length, tau = trial, t_len, t_tau
            acc += 1
        else:
            rej += 1
            step *= 0.5
        lengths.append(length)
        steps.append(step)
        taus.append(tau)
        if settled is not None:
            done += 1
        if step < params.min_step:
            if settled is not None:
                break
            # the model has relaxed onto its discretization; restart the step
            settled, step = len(lengths) - 1, params.step
    if settled is None:
        settled = len(lengths) - 1
    rel = (lengths[0] - lengths[-1]) / lengths[0]
    ref = lengths[settled]
    measured = (ref - lengths[-1]) / ref
    return DescentTrajectory(lengths, steps, taus, acc, rej, stalled=measured < params.stall_tol,
                             relative_decrease=rel, measured_decrease=measured, settle=settled)
