"""Constraint generation and vertex optimization on the sphere.

The constraint model works on boundary points: the tile vertices plus a fixed
number of samples on every unit-circle arc.  Samples are recomputed from their
arc's endpoints and center at every evaluation, so they always lie exactly on
the unit circle.  Tile boundaries are the closed polylines through these
points, with consecutive points joined by great-circle arcs.

Constraint kinds (positive residual = violated):

* ``diam``: ``|p - q| - 1`` for every pair of boundary points of one tile;
* ``sep``: ``1 - dist(p, arc(s1, s2))`` for a boundary point of one tile and a
  boundary piece of a same-colored tile;
* ``ang``: for a piece that starts at a point forced to lie at distance exactly
  1 from ``c``, the piece must leave the unit circle about ``c`` outward;
* ``eq``: ``|p - q| - 1`` for unit chords (held at zero).

Pairs made exactly 1 apart by construction (an arc's center and the points of
that arc) are exempt from ``diam`` and ``sep``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import minimize
from scipy.sparse.linalg import lsqr

from .spheregeom import unit_circle_frame
from .tiling import SphericalTiling

log = logging.getLogger(__name__)


class MaxIterationsExceeded(RuntimeError):
    pass


class NumericalStall(RuntimeError):
    pass


class NoFeasibleSeed(RuntimeError):
    pass


@dataclass
class OptimizerConfig:
    tol_feas: float = 1e-9
    margin: float = 2e-3
    penalty_start: float = 1.0
    penalty_steps: int = 5
    penalty_factor: float = 10.0
    max_iter: int = 1500
    seed: int = 0
    symmetry: bool | None = None
    arc_samples: int = 8
    h: float = 0.005
    cutoff: float = 1.5
    prune: float = 0.35
    bisect_tol: float = 0.01
    polish_iter: int = 30
    stall_violation: float = 0.02
    stall_ratio: float = 0.7
    jitter: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------------------
# boundary points


@dataclass
class PointModel:
    n_vertices: int
    arc_u: np.ndarray  # per sample: arc endpoint u
    arc_w: np.ndarray  # endpoint w
    arc_c: np.ndarray  # center vertex
    arc_t: np.ndarray  # interpolation parameter in (0, 1)
    polylines: list  # per tile: point indices around the boundary
    forced: set  # frozenset({center point, arc point})

    @property
    def n_points(self) -> int:
        return self.n_vertices + len(self.arc_t)


def build_points(t: SphericalTiling, k: int) -> PointModel:
    n = len(t.vertices)
    au, aw, ac, at = [], [], [], []
    samples = {}
    forced = set()
    for key, c in sorted(t.arcs.items(), key=lambda kv: sorted(kv[0])):
        u, w = sorted(key)
        ids = []
        for j in range(1, k + 1):
            ids.append(n + len(at))
            au.append(u), aw.append(w), ac.append(c), at.append(j / (k + 1))
        samples[(u, w)] = ids
        for p in [u, w] + ids:
            forced.add(frozenset((c, p)))
    polys = []
    for cyc in t.tiles:
        pts = []
        m = len(cyc)
        for i in range(m):
            a, b = cyc[i], cyc[(i + 1) % m]
            pts.append(a)
            if frozenset((a, b)) in t.arcs:
                ids = samples[(a, b)] if a < b else samples[(b, a)][::-1]
                pts.extend(ids)
        polys.append(np.array(pts))
    return PointModel(n, np.array(au, int), np.array(aw, int), np.array(ac, int), np.array(at, float), polys, forced)


def arc_points(V: np.ndarray, pm: PointModel, r: float) -> np.ndarray:
    if len(pm.arc_t) == 0:
        return V
    J = V[pm.arc_c]
    Jn = np.linalg.norm(J, axis=1, keepdims=True)
    Jh = J / Jn
    h = (r * r - 0.5) / r
    _, rho = unit_circle_frame(np.array([0, 0, r]), r)
    t = pm.arc_t[:, None]
    u = (1 - t) * V[pm.arc_u] + t * V[pm.arc_w]
    d = np.sum(u * Jh, 1, keepdims=True)
    up = u - d * Jh
    nrm = np.linalg.norm(up, axis=1, keepdims=True)
    s = h * Jh + rho * up / nrm
    return np.vstack([V, s])


def arc_points_vjp(V, pm: PointModel, r: float, G: np.ndarray) -> np.ndarray:
    """Pull a gradient on all points back to the vertices."""
    gV = G[: pm.n_vertices].copy()
    if len(pm.arc_t) == 0:
        return gV
    g = G[pm.n_vertices:]
    J = V[pm.arc_c]
    Jn = np.linalg.norm(J, axis=1, keepdims=True)
    Jh = J / Jn
    h = (r * r - 0.5) / r
    _, rho = unit_circle_frame(np.array([0, 0, r]), r)
    t = pm.arc_t[:, None]
    u = (1 - t) * V[pm.arc_u] + t * V[pm.arc_w]
    d = np.sum(u * Jh, 1, keepdims=True)
    up = u - d * Jh
    nrm = np.linalg.norm(up, axis=1, keepdims=True)
    n = up / nrm
    gn = rho * g
    gup = (gn - np.sum(gn * n, 1, keepdims=True) * n) / nrm
    gu = gup - np.sum(gup * Jh, 1, keepdims=True) * Jh
    gJh = h * g - d * gup - np.sum(gup * Jh, 1, keepdims=True) * u
    gJ = (gJh - np.sum(gJh * Jh, 1, keepdims=True) * Jh) / Jn
    np.add.at(gV, pm.arc_c, gJ)
    np.add.at(gV, pm.arc_u, (1 - t) * gu)
    np.add.at(gV, pm.arc_w, t * gu)
    return gV


# ---------------------------------------------------------------------------
# constraint kernels with analytic gradients


def k_pair(X, I, J):
    d = X[I] - X[J]
    n = np.linalg.norm(d, axis=1)
    return n - 1.0, d / np.maximum(n, 1e-300)[:, None]


def k_seg(X, P, S1, S2, r):
    """``1 - dist(p, great arc s1 s2)`` and its gradients w.r.t. p, s1, s2."""
    p, a, b = X[P], X[S1], X[S2]
    m = np.cross(a, b)
    mn = np.linalg.norm(m, axis=1)
    mn_safe = np.maximum(mn, 1e-300)
    nv = m / mn_safe[:, None]
    pn = np.sum(p * nv, 1)
    ppl = p - pn[:, None] * nv
    ppl_n = np.maximum(np.linalg.norm(ppl, axis=1), 1e-300)
    xs = r * ppl / ppl_n[:, None]
    inside = (np.sum(np.cross(a, xs) * m, 1) >= 0) & (np.sum(np.cross(xs, b) * m, 1) >= 0) & (mn > 1e-14)
    da = np.linalg.norm(p - a, axis=1)
    db = np.linalg.norm(p - b, axis=1)
    di = np.linalg.norm(p - xs, axis=1)
    use_a = da <= db
    d = np.where(inside, di, np.where(use_a, da, db))
    d_safe = np.maximum(d, 1e-300)
    gp = np.zeros_like(p)
    ga = np.zeros_like(p)
    gb = np.zeros_like(p)
    # interior case
    gp_i = (p - xs) / d_safe[:, None]
    gn = (r * pn / ppl_n)[:, None] * p / d_safe[:, None]  # d(d)/dn = (1/(2d)) d(d^2)/dn
    gm = (gn - np.sum(gn * nv, 1)[:, None] * nv) / mn_safe[:, None]
    ga_i = np.cross(b, gm)
    gb_i = np.cross(gm, a)
    # endpoint cases
    ea = (p - a) / np.maximum(da, 1e-300)[:, None]
    eb = (p - b) / np.maximum(db, 1e-300)[:, None]
    ins = inside[:, None]
    ua = (~inside & use_a)[:, None]
    ub = (~inside & ~use_a)[:, None]
    gp = np.where(ins, gp_i, np.where(ua, ea, eb))
    ga = np.where(ins, ga_i, np.where(ua, -ea, 0.0))
    gb = np.where(ins, gb_i, np.where(ub, -eb, 0.0))
    return 1.0 - d, -gp, -ga, -gb


def k_ang(X, C, S1, S2, r):
    """Signed outward test at a forced endpoint ``s1`` of the piece ``s1 s2``.

    Value ``t . (c - s1) / |t|`` with ``t`` the tangent at ``s1`` towards ``s2``;
    non-positive when the piece leaves the unit circle about ``c`` outward.
    """
    c, s1, s2 = X[C], X[S1], X[S2]
    r2 = r * r
    ds = np.sum(s2 * s1, 1)
    t = s2 - (ds / r2)[:, None] * s1
    tn = np.maximum(np.linalg.norm(t, axis=1), 1e-300)
    th = t / tn[:, None]
    u = c - s1
    g = np.sum(th * u, 1)
    gt = (u - g[:, None] * th) / tn[:, None]
    gc = th
    s1gt = np.sum(s1 * gt, 1)
    gs2 = gt - (s1gt / r2)[:, None] * s1
    gs1 = -th - (s1gt / r2)[:, None] * s2 - (ds / r2)[:, None] * gt
    return g, gc, gs1, gs2


# ---------------------------------------------------------------------------
# the constraint set


@dataclass
class ConstraintSet:
    tiling: SphericalTiling
    points: PointModel
    diam: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), int))
    sep: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), int))
    ang: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), int))
    eq: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), int))
    sep_pairs: list = field(default_factory=list)  # same-color tile pairs considered
    extra: list = field(default_factory=list)  # additional kernels (exclusion variant)

    @property
    def r(self) -> float:
        return self.tiling.r

    def counts(self) -> dict:
        return {"diameter": len(self.diam), "separation": len(self.sep), "angle": len(self.ang),
                "unit_chord": len(self.eq), "tile_pairs": len(self.sep_pairs),
                "on_sphere": self.points.n_vertices}

    def residuals(self, V: np.ndarray) -> dict:
        X = arc_points(V, self.points, self.r)
        out = {}
        out["diam"] = k_pair(X, self.diam[:, 0], self.diam[:, 1])[0] if len(self.diam) else np.zeros(0)
        out["sep"] = k_seg(X, *self.sep.T, self.r)[0] if len(self.sep) else np.zeros(0)
        out["ang"] = k_ang(X, *self.ang.T, self.r)[0] if len(self.ang) else np.zeros(0)
        out["eq"] = np.abs(k_pair(X, self.eq[:, 0], self.eq[:, 1])[0]) if len(self.eq) else np.zeros(0)
        for name, fn in self.extra:
            out[name] = fn(X)[0]
        return out

    def max_violation(self, V) -> float:
        res = self.residuals(V)
        return float(max((np.max(v) for v in res.values() if len(v)), default=-np.inf))

    def merit_grad(self, V, w_in: float, w_eq: float, margin: float):
        """Quadratic penalty and its gradient with respect to vertex positions."""
        X = arc_points(V, self.points, self.r)
        G = np.zeros_like(X)
        f = 0.0
        if len(self.diam):
            g, e = k_pair(X, self.diam[:, 0], self.diam[:, 1])
            v = np.maximum(g + margin, 0.0)
            f += w_in * np.sum(v * v)
            c = (2 * w_in * v)[:, None] * e
            np.add.at(G, self.diam[:, 0], c)
            np.add.at(G, self.diam[:, 1], -c)
        if len(self.sep):
            g, gp, ga, gb = k_seg(X, *self.sep.T, self.r)
            v = np.maximum(g + margin, 0.0)
            f += w_in * np.sum(v * v)
            c = (2 * w_in * v)[:, None]
            np.add.at(G, self.sep[:, 0], c * gp)
            np.add.at(G, self.sep[:, 1], c * ga)
            np.add.at(G, self.sep[:, 2], c * gb)
        if len(self.ang):
            g, gc, g1, g2 = k_ang(X, *self.ang.T, self.r)
            v = np.maximum(g + margin, 0.0)
            f += w_in * np.sum(v * v)
            c = (2 * w_in * v)[:, None]
            np.add.at(G, self.ang[:, 0], c * gc)
            np.add.at(G, self.ang[:, 1], c * g1)
            np.add.at(G, self.ang[:, 2], c * g2)
        if len(self.eq):
            g, e = k_pair(X, self.eq[:, 0], self.eq[:, 1])
            f += w_eq * np.sum(g * g)
            c = (2 * w_eq * g)[:, None] * e
            np.add.at(G, self.eq[:, 0], c)
            np.add.at(G, self.eq[:, 1], -c)
        for _, fn in self.extra:
            g, idx, grads = fn(X)
            v = np.maximum(g + margin, 0.0)
            f += w_in * np.sum(v * v)
            c = (2 * w_in * v)[:, None]
            for col, gr in zip(idx.T, grads):
                np.add.at(G, col, c * gr)
        return f, arc_points_vjp(V, self.points, self.r, G)


def _pair_key(a, b, n):
    a, b = np.minimum(a, b), np.maximum(a, b)
    return np.asarray(a, np.int64) * n + b


def _caps(t: SphericalTiling, pm: PointModel, X):
    cen = np.array([X[p].mean(0) for p in pm.polylines])
    cen = cen / np.linalg.norm(cen, axis=1)[:, None] * t.r
    rad = np.array([np.linalg.norm(X[p] - c, axis=1).max() for p, c in zip(pm.polylines, cen)])
    return cen, rad


def generate_constraints(t: SphericalTiling, cutoff: float = 1.5, arc_samples: int = 8,
                         prune: float | None = None, V=None, keep=None) -> ConstraintSet:
    """Build the constraint set for tiling ``t``.

    Same-colored tile pairs are kept when the gap between their bounding balls
    is below ``cutoff``.  With ``prune`` set, point-level constraints whose
    residual at ``V`` is below ``-prune`` are dropped (they are rebuilt before
    every optimizer stage).  ``keep`` is an optional boolean mask over points;
    when given, only constraints whose first point is kept are generated
    (used with symmetry reduction, where the mask marks orbit representatives).
    """
    pm = build_points(t, arc_samples)
    kept = np.ones(pm.n_points, bool) if keep is None else np.asarray(keep, bool)
    V = t.vertices if V is None else V
    X = arc_points(V, pm, t.r)
    cs = ConstraintSet(t, pm)
    F = pm.forced
    diam = []
    for poly in pm.polylines:
        if not kept[poly].any():
            continue
        n = len(poly)
        ii, jj = np.triu_indices(n, 1)
        for a, b in zip(poly[ii], poly[jj]):
            if (kept[a] or kept[b]) and a != b and frozenset((int(a), int(b))) not in F:
                diam.append((a, b))
    cs.diam = np.array(diam, int).reshape(-1, 2)
    cen, rad = _caps(t, pm, X)
    col = np.asarray(t.colors)
    N = pm.n_points
    fkeys = np.unique([_pair_key(*sorted(p), N) for p in F if len(p) == 2])
    has_kept = np.array([kept[p].any() for p in pm.polylines])
    sep, ang, pairs = [], [], []
    from scipy.spatial import cKDTree

    tree = cKDTree(cen)
    maxrad = rad.max()
    for a, b in sorted(tree.query_pairs(cutoff + 2 * maxrad)):
        if col[a] != col[b] or not (has_kept[a] or has_kept[b]):
            continue
        if np.linalg.norm(cen[a] - cen[b]) - rad[a] - rad[b] > cutoff:
            continue
        pairs.append((a, b))
        for A, B in ((a, b), (b, a)):
            pa, pb = pm.polylines[A], pm.polylines[B]
            xs = pa[kept[pa]]
            if len(xs) == 0:
                continue
            X_, Y1 = np.meshgrid(xs, pb, indexing="ij")
            Y2 = np.broadcast_to(np.roll(pb, -1), X_.shape)
            X_, Y1, Y2 = X_.ravel(), Y1.ravel(), Y2.ravel()
            f1 = np.isin(_pair_key(X_, Y1, N), fkeys)
            f2 = np.isin(_pair_key(X_, Y2, N), fkeys)
            ok = (X_ != Y1) & (X_ != Y2) & ~(f1 & f2)
            s_ = ok & ~f1 & ~f2
            sep.append(np.column_stack([X_, Y1, Y2])[s_])
            a1 = ok & f1
            ang.append(np.column_stack([X_, Y1, Y2])[a1])
            a2 = ok & f2 & ~f1
            ang.append(np.column_stack([X_, Y2, Y1])[a2])
    cs.sep = np.concatenate(sep).astype(int) if sep else np.zeros((0, 3), int)
    cs.ang = np.concatenate(ang).astype(int) if ang else np.zeros((0, 3), int)
    cs.sep_pairs = pairs
    cs.eq = np.array(sorted(set(tuple(sorted(c)) for c in t.unit_chords)), int).reshape(-1, 2)
    if prune is not None:
        cs = prune_constraints(cs, V, prune)
    return cs


def prune_constraints(cs: ConstraintSet, V, prune: float) -> ConstraintSet:
    X = arc_points(V, cs.points, cs.r)
    out = ConstraintSet(cs.tiling, cs.points, cs.diam, cs.sep, cs.ang, cs.eq, cs.sep_pairs, cs.extra)
    if len(cs.diam):
        out.diam = cs.diam[k_pair(X, cs.diam[:, 0], cs.diam[:, 1])[0] > -prune]
    if len(cs.sep):
        out.sep = cs.sep[k_seg(X, *cs.sep.T, cs.r)[0] > -prune]
    return out


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class FeasibilityResult:
    feasible: bool
    max_violation: float
    residuals: dict
    iterations: int
    vertices: np.ndarray
    history: list = field(default_factory=list)
    message: str = ""


def tangent_frames(V):
    n = V / np.linalg.norm(V, axis=1)[:, None]
    helper = np.where(np.abs(n[:, [0]]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(n, e1)
    return e1, e2


def _to_sphere(V0, e1, e2, theta, r):
    th = theta.reshape(-1, 2)
    Y = V0 + th[:, :1] * e1 + th[:, 1:] * e2
    nY = np.linalg.norm(Y, axis=1)[:, None]
    return Y * (r / nY), Y, nY


def _pull_theta(G, Y, nY, e1, e2, r):
    yh = Y / nY
    GY = (G - np.sum(G * yh, 1)[:, None] * yh) * (r / nY)
    return np.column_stack([np.sum(GY * e1, 1), np.sum(GY * e2, 1)]).ravel()


class SymmetryMap:
    """Express all vertices through orbit representatives under a rotation group.

    ``rep[v]`` is the representative of vertex ``v`` and ``rot[v]`` the rotation
    carrying it onto ``v``.  Representatives fixed by part of the group are
    symmetrized by averaging over their stabilizer.
    """

    def __init__(self, reps, rep_of, rot_of, stab):
        self.reps = np.asarray(reps)
        self.rep_of = np.asarray(rep_of)
        self.rot_of = np.asarray(rot_of)  # (N, 3, 3)
        self.stab = stab  # per representative: (k, 3, 3) mean projector

    def expand(self, R):
        Rs = np.einsum("kij,kj->ki", self.stab, R)
        return np.einsum("vij,vj->vi", self.rot_of, Rs[self.rep_index])

    @property
    def rep_index(self):
        if not hasattr(self, "_ri"):
            pos = {int(v): i for i, v in enumerate(self.reps)}
            self._ri = np.array([pos[int(v)] for v in self.rep_of])
        return self._ri

    def pull(self, G):
        GR = np.einsum("vji,vj->vi", self.rot_of, G)
        out = np.zeros((len(self.reps), 3))
        np.add.at(out, self.rep_index, GR)
        return np.einsum("kji,kj->ki", self.stab, out)


def optimize_vertices(cs: ConstraintSet, start: np.ndarray, cfg: OptimizerConfig | None = None,
                      symmetry: SymmetryMap | None = None, rebuild=None, fixed=None) -> FeasibilityResult:
    """Penalty descent on vertex positions followed by an equality polish.

    ``rebuild(V)`` (optional) regenerates a pruned constraint set around ``V``
    before each penalty stage.  ``fixed`` is an optional boolean mask of
    vertices held at their start positions (not combined with ``symmetry``).
    """
    if fixed is not None and symmetry is not None:
        raise ValueError("fixed vertices are not supported together with symmetry reduction")
    cfg = cfg or OptimizerConfig()
    r = cs.r
    V = np.asarray(start, float)
    V = V / np.linalg.norm(V, axis=1)[:, None] * r
    res = cs.residuals(V)
    mv = _maxv(res)
    history = [mv]
    if mv <= cfg.tol_feas:
        return FeasibilityResult(True, mv, res, 0, V, history, "feasible at start")
    total_it = 0
    w = cfg.penalty_start
    for stage in range(cfg.penalty_steps + 1):
        if rebuild is not None:
            cs = rebuild(V)
        V, it = _stage(cs, V, w, cfg, symmetry, fixed)
        total_it += it
        mv = cs.max_violation(V)
        history.append(mv)
        log.info("stage %d weight %.0e max violation %.3e", stage, w, mv)
        if _inequalities_ok(cs, V, cfg.margin * 0.25):
            break
        if stage >= 2 and mv > cfg.stall_violation and mv > cfg.stall_ratio * history[-2]:
            log.info("stalled at max violation %.3e", mv)
            res = cs.residuals(V)
            return FeasibilityResult(False, _maxv(res), res, total_it, V, history, "numerical stall")
        w *= cfg.penalty_factor
    if rebuild is not None:
        cs = rebuild(V)
    V = polish(cs, V, cfg, symmetry, fixed)
    res = cs.residuals(V)
    mv = _maxv(res)
    history.append(mv)
    feasible = mv <= cfg.tol_feas
    msg = "feasible" if feasible else "infeasible"
    if total_it >= cfg.max_iter * (cfg.penalty_steps + 1) and not feasible:
        msg = "max iterations exceeded"
    return FeasibilityResult(feasible, mv, res, total_it, V, history, msg)


def _maxv(res):
    return float(max((np.max(v) for v in res.values() if len(v)), default=-np.inf))


def _inequalities_ok(cs, V, slack):
    res = cs.residuals(V)
    return all(np.max(v) <= -slack for k, v in res.items() if len(v) and k != "eq")


def _stage(cs, V, w, cfg, symmetry, fixed=None):
    r = cs.r
    if symmetry is not None:
        R0 = V[symmetry.reps]
        e1, e2 = tangent_frames(R0)

        def fg(theta):
            R, Y, nY = _to_sphere(R0, e1, e2, theta, r)
            Vf = symmetry.expand(R)
            Vf = Vf / np.linalg.norm(Vf, axis=1)[:, None] * r
            f, G = cs.merit_grad(Vf, w, w, cfg.margin)
            return f, _pull_theta(symmetry.pull(G), Y, nY, e1, e2, r)

        n = len(R0)
    else:
        free = np.arange(len(V)) if fixed is None else np.nonzero(~np.asarray(fixed, bool))[0]
        V0 = V[free]
        e1, e2 = tangent_frames(V0)

        def fg(theta):
            Xf, Y, nY = _to_sphere(V0, e1, e2, theta, r)
            X = V.copy()
            X[free] = Xf
            f, G = cs.merit_grad(X, w, w, cfg.margin)
            return f, _pull_theta(G[free], Y, nY, e1, e2, r)

        n = len(free)
    sol = minimize(fg, np.zeros(2 * n), jac=True, method="L-BFGS-B",
                   options={"maxiter": cfg.max_iter, "maxcor": 30, "ftol": 1e-16, "gtol": 1e-12})
    if symmetry is not None:
        R, _, _ = _to_sphere(R0, e1, e2, sol.x, r)
        Vn = symmetry.expand(R)
        Vn = Vn / np.linalg.norm(Vn, axis=1)[:, None] * r
    else:
        Vn = V.copy()
        Vn[free] = _to_sphere(V0, e1, e2, sol.x, r)[0]
    return Vn, int(sol.nit)


def polish(cs: ConstraintSet, V, cfg: OptimizerConfig, symmetry=None, fixed=None):
    """Gauss-Newton projection onto the unit-chord equalities (minimum-norm steps)."""
    if len(cs.eq) == 0:
        return V
    mobile = np.ones(len(V)) if fixed is None else (~np.asarray(fixed, bool)).astype(float)
    r = cs.r
    E = cs.eq
    for _ in range(cfg.polish_iter):
        g, e = k_pair(V, E[:, 0], E[:, 1])
        if np.max(np.abs(g)) < 1e-14:
            break
        e1, e2 = tangent_frames(V)
        # Jacobian in tangent coordinates
        rows = np.repeat(np.arange(len(E)), 4)
        cols, vals = [], []
        for sgn, idx in ((1.0, E[:, 0]), (-1.0, E[:, 1])):
            cols.append(np.column_stack([2 * idx, 2 * idx + 1]))
            vals.append(sgn * mobile[idx][:, None] * np.column_stack([np.sum(e * e1[idx], 1), np.sum(e * e2[idx], 1)]))
        cols = np.column_stack(cols).ravel()
        vals = np.column_stack(vals).ravel()
        Jm = sparse.csr_matrix((vals, (rows, cols)), shape=(len(E), 2 * len(V)))
        step = lsqr(Jm, -g, atol=1e-15, btol=1e-15)[0]
        th = step.reshape(-1, 2)
        V = V + th[:, :1] * e1 + th[:, 1:] * e2
        V = V / np.linalg.norm(V, axis=1)[:, None] * r
        if symmetry is not None:
            V = symmetry.expand(V[symmetry.reps])
            V = V / np.linalg.norm(V, axis=1)[:, None] * r
    return V


# ---------------------------------------------------------------------------
# pipeline pieces


def realize(d, r: float, spec: dict | None = None) -> SphericalTiling:
    """Radially project a deformed tiling onto the sphere of radius ``r``.

    Vertex ids are renumbered compactly in order of first use.
    """
    used = sorted({v for cyc in d.tile_vertices for v in cyc})
    new = {v: i for i, v in enumerate(used)}
    P = d.vertex_pos[used]
    V = P / np.linalg.norm(P, axis=1)[:, None] * r
    tiles = [[new[v] for v in cyc] for cyc in d.tile_vertices]
    arcs = {frozenset(new[v] for v in k): new[c] for k, c in d.arcs.items()}
    chords = [(new[a], new[b]) for a, b in d.unit_chords]
    sp = spec or {}
    return SphericalTiling(float(r), V, tiles, list(map(int, d.colors)), arcs, chords, sp,
                           sorted(d.expected_unscalable))


# ---------------------------------------------------------------------------
# icosahedral symmetry reduction


def rotation_group(points: np.ndarray, tol: float = 1e-6) -> list:
    """All proper rotations mapping the point set (e.g. icosahedron vertices) onto itself."""
    P = np.asarray(points, float)
    P = P / np.linalg.norm(P, axis=1)[:, None]
    a = 0
    d = P @ P[a]
    b = int(np.argsort(-d)[1])  # a nearest neighbour of a
    cos_ab = d[b]
    frame0 = _frame(P[a], P[b])
    out = []
    for i in range(len(P)):
        for j in range(len(P)):
            if i == j or abs(P[i] @ P[j] - cos_ab) > tol:
                continue
            R = _frame(P[i], P[j]) @ frame0.T
            img = P @ R.T
            if np.all(np.min(np.linalg.norm(img[:, None] - P[None], axis=-1), axis=1) < tol):
                out.append(R)
    uniq = []
    for R in out:
        if not any(np.allclose(R, Q, atol=1e-9) for Q in uniq):
            uniq.append(R)
    return uniq


def _frame(x, y):
    e1 = x / np.linalg.norm(x)
    e2 = y - (y @ e1) * e1
    e2 /= np.linalg.norm(e2)
    return np.column_stack([e1, e2, np.cross(e1, e2)])


def vertex_permutations(V: np.ndarray, group: list, tol: float = 1e-6) -> np.ndarray:
    from scipy.spatial import cKDTree

    tree = cKDTree(V)
    perms = []
    for R in group:
        d, idx = tree.query(V @ R.T)
        if np.max(d) > tol * max(1.0, np.max(np.linalg.norm(V, axis=1))):
            raise ValueError("vertex set is not symmetric under the group")
        perms.append(idx)
    return np.array(perms)


def symmetry_map(V: np.ndarray, group: list) -> tuple:
    """Orbit representatives of the vertices and the induced permutations."""
    perms = vertex_permutations(V, group)
    n = len(V)
    rep_of = np.full(n, -1)
    rot_of = np.zeros((n, 3, 3))
    reps = []
    stabs = []
    for v in range(n):
        if rep_of[v] >= 0:
            continue
        reps.append(v)
        stab = []
        for g, R in enumerate(group):
            w = perms[g][v]
            if rep_of[w] < 0:
                rep_of[w] = v
                rot_of[w] = R
            if w == v:
                stab.append(R)
        stabs.append(np.mean(stab, axis=0))
    return SymmetryMap(reps, rep_of, rot_of, np.array(stabs)), perms


def point_permutations(pm: PointModel, vperms: np.ndarray, k: int) -> np.ndarray:
    """Extend vertex permutations to arc samples."""
    index = {}
    for i, (u, w, t) in enumerate(zip(pm.arc_u, pm.arc_w, pm.arc_t)):
        index[(int(u), int(w), round(float(t) * (k + 1)))] = pm.n_vertices + i
    out = np.zeros((len(vperms), pm.n_points), int)
    for g, vp in enumerate(vperms):
        out[g, : pm.n_vertices] = vp
        for i, (u, w, t) in enumerate(zip(pm.arc_u, pm.arc_w, pm.arc_t)):
            gu, gw = int(vp[u]), int(vp[w])
            j = round(float(t) * (k + 1))
            key = (gu, gw, j) if gu < gw else (gw, gu, k + 1 - j)
            out[g, pm.n_vertices + i] = index[key]
    return out


def reduce_constraints(cs: ConstraintSet, pperms: np.ndarray) -> ConstraintSet:
    """Keep one representative per symmetry orbit of each constraint.

    A constraint is kept when its first point is the smallest point of its
    orbit; symmetric copies elsewhere are then implied.
    """
    orbit_min = pperms.min(axis=0)
    is_rep = orbit_min == np.arange(pperms.shape[1])
    out = ConstraintSet(cs.tiling, cs.points, cs.diam, cs.sep, cs.ang, cs.eq, cs.sep_pairs, cs.extra)
    if len(cs.diam):
        out.diam = cs.diam[is_rep[cs.diam[:, 0]] | is_rep[cs.diam[:, 1]]]
    if len(cs.sep):
        out.sep = cs.sep[is_rep[cs.sep[:, 0]]]
    if len(cs.ang):
        out.ang = cs.ang[is_rep[cs.ang[:, 0]]]
    # the equalities are few and the polish step needs all of them
    return out


@dataclass
class SymmetryContext:
    """Everything the optimizer needs to work on orbit representatives."""

    smap: SymmetryMap
    point_perms: np.ndarray
    keep: np.ndarray

    def generate(self, t: SphericalTiling, cfg: "OptimizerConfig", V=None, prune=None) -> ConstraintSet:
        cs = generate_constraints(t, cutoff=cfg.cutoff, arc_samples=cfg.arc_samples, prune=prune,
                                  V=V, keep=self.keep)
        return reduce_constraints(cs, self.point_perms)


def symmetry_context(t: SphericalTiling, axes: np.ndarray, arc_samples: int) -> SymmetryContext:
    """Build the icosahedral reduction for ``t``; ``axes`` are the icosahedron vertices."""
    group = rotation_group(axes)
    smap, vperms = symmetry_map(t.vertices, group)
    pm = build_points(t, arc_samples)
    pp = point_permutations(pm, vperms, arc_samples)
    keep = pp.min(axis=0) == np.arange(pp.shape[1])
    return SymmetryContext(smap, pp, keep)


# ---------------------------------------------------------------------------
# the full pipeline and the radius search


def build_tiling(m: int, r: float, phase: int = 0, template=None):
    """Goldberg build, distributed coloring, stitches and radial realization.

    Returns ``(tiling, combinatorial tiling)``.
    """
    from .coloring import color_distributed
    from .goldberg import build_goldberg, family_spec
    from .stitch import apply_stitches

    spec = family_spec(m)
    ct = build_goldberg(spec)
    g = color_distributed(ct)
    d = apply_stitches(ct, g, template, phase=phase)
    info = {"m": m, "gm": spec.gm, "gn": spec.gn, "phase": phase}
    return realize(d, r, info), ct


def use_symmetry(cfg: OptimizerConfig, m: int) -> bool:
    """Reduction is on by default from m = 3 upwards."""
    return cfg.symmetry if cfg.symmetry is not None else m >= 3


class Problem:
    """One deformed tiling prepared for repeated feasibility probes at varying radius."""

    def __init__(self, m: int, cfg: OptimizerConfig | None = None, phase: int = 0, r0: float | None = None):
        self.m = m
        self.cfg = cfg or OptimizerConfig()
        r0 = r0 if r0 is not None else estimate_radius(m)
        self.base, self.ct = build_tiling(m, r0, phase)
        self.sym = None
        if use_symmetry(self.cfg, m):
            self.sym = symmetry_context(self.base, self.ct.net.vertices, self.cfg.arc_samples)

    @classmethod
    def from_tiling(cls, t: SphericalTiling, cfg: OptimizerConfig | None = None) -> "Problem":
        """Wrap an already realized tiling (for example one read from a file).

        Symmetry reduction is attempted when ``t.spec`` carries a family index ``m``
        and falls back to the full problem if the tiling is not icosahedral.
        """
        from .goldberg import build_ico_net

        self = cls.__new__(cls)
        self.cfg = cfg or OptimizerConfig()
        self.m = int(t.spec.get("m", 0) or 0)
        self.base, self.ct, self.sym = t, None, None
        if self.m and not t.spec.get("patch") and use_symmetry(self.cfg, self.m):
            try:
                self.sym = symmetry_context(t, build_ico_net().vertices, self.cfg.arc_samples)
            except (ValueError, KeyError, IndexError) as ex:
                log.info("symmetry reduction unavailable: %s", ex)
        return self

    def constraints(self, t: SphericalTiling, V=None, prune=None) -> ConstraintSet:
        if self.sym is not None:
            return self.sym.generate(t, self.cfg, V=V, prune=prune)
        return generate_constraints(t, cutoff=self.cfg.cutoff, arc_samples=self.cfg.arc_samples,
                                    prune=prune, V=V)

    def solve(self, r: float, start: np.ndarray | None = None, cfg: OptimizerConfig | None = None,
              extra=None) -> FeasibilityResult:
        """Optimize at radius ``r``; ``start`` defaults to the radial projection."""
        cfg = cfg or self.cfg
        t = self.base.scaled(r)
        V0 = t.vertices if start is None else np.asarray(start, float)
        V0 = V0 / np.linalg.norm(V0, axis=1)[:, None] * r
        if cfg.jitter > 0:
            rng = np.random.default_rng(cfg.seed)
            V0 = V0 + cfg.jitter * rng.standard_normal(V0.shape)
            if self.sym is not None:
                V0 = self.sym.smap.expand(V0[self.sym.smap.reps])
            V0 = V0 / np.linalg.norm(V0, axis=1)[:, None] * r

        def rebuild(V):
            cs = self.constraints(t.with_vertices(V), V=V, prune=cfg.prune)
            if extra is not None:
                cs.extra = extra(cs, V)
            return cs

        cs = rebuild(V0)
        smap = self.sym.smap if self.sym is not None else None
        return optimize_vertices(cs, V0, cfg, symmetry=smap, rebuild=rebuild)

    def tiling(self, r: float, V: np.ndarray) -> SphericalTiling:
        return self.base.scaled(r).with_vertices(V)


def estimate_radius(m: int) -> float:
    """Rough center of the feasible band: tile area is fixed, so r grows like sqrt(T)."""
    from .goldberg import family_spec

    T = family_spec(m).T
    return 0.79 * math.sqrt(0.0689 * (10 * T + 2))


@dataclass
class RadiusRange:
    m: int
    r_min: float
    r_max: float
    probes: list  # (radius, feasible, max_violation) in probe order
    seconds: float = 0.0

    @property
    def ratio(self) -> float:
        return self.r_max / self.r_min

    def to_dict(self) -> dict:
        return {"m": self.m, "r_min": self.r_min, "r_max": self.r_max,
                "probes": [[float(r), bool(f), float(v)] for r, f, v in self.probes],
                "seconds": self.seconds}


def feasible_band(probe, scan, tol: float, floor: float = 0.0, name: str = "") -> tuple:
    """Scan, extend outward if needed, then bisect both ends of a feasible interval.

    ``probe(x)`` returns feasibility.  Returns ``(lo, hi)``: the smallest and
    largest feasible values found, each within ``tol`` of an infeasible probe
    (or of ``floor``).  Raises :class:`NoFeasibleSeed` when no scan value is feasible.
    """
    scan = sorted(scan)
    ok = {x: bool(probe(x)) for x in scan}
    good = [x for x in scan if ok[x]]
    if not good:
        raise NoFeasibleSeed(f"no feasible value {name} among {scan}")
    lo_in, hi_in = min(good), max(good)
    below = [x for x in scan if x < lo_in]
    above = [x for x in scan if x > hi_in]
    step = (scan[-1] - scan[0]) / max(len(scan) - 1, 1) or max(abs(scan[0]) * 0.05, tol)
    while not below:
        x = round(lo_in - step, 9)
        if x <= floor:
            below = [floor]
        elif probe(x):
            lo_in = x
        else:
            below = [x]
    while not above:
        x = round(hi_in + step, 9)
        if probe(x):
            hi_in = x
        else:
            above = [x]
    lo_out, hi_out = max(below), min(above)
    while lo_in - lo_out > tol:
        x = 0.5 * (lo_in + lo_out)
        if probe(x):
            lo_in = x
        else:
            lo_out = x
    while hi_out - hi_in > tol:
        x = 0.5 * (hi_in + hi_out)
        if probe(x):
            hi_in = x
        else:
            hi_out = x
    # A failed probe need not mean the value is infeasible: a start far from a
    # solution can stall.  March past each end from the neighbouring solution,
    # halving the step on failure, so each end stays within tol of a failure.
    lo_in = _march(probe, lo_in, -step / 4, tol, floor)
    hi_in = _march(probe, hi_in, step / 4, tol, math.inf)
    return lo_in, hi_in


def _march(probe, x, d, tol, limit):
    while abs(d) > tol / 2:
        y = round(x + d, 9)
        if (d < 0 and y <= limit) or (d > 0 and y >= limit) or not probe(y):
            d /= 2
        else:
            x = y
    return x


def radius_range(m: int, cfg: OptimizerConfig | None = None, scan=None, extra=None,
                 problem: Problem | None = None, seeds: dict | None = None) -> RadiusRange:
    """Feasible radius interval for GP(4m, 2m + 1), by scan then bisection.

    The scan (default: 0.8 to 1.25 times the estimated band center in steps of
    0.05) starts each probe from the radial projection.  Both ends are then
    bisected to ``cfg.bisect_tol`` and then marched outward, each probe
    warm-started from the feasible solution at the nearest radius.  ``seeds`` optionally supplies feasible
    vertex sets keyed by radius (used by the exclusion variant).
    """
    cfg = cfg or OptimizerConfig()
    t0 = time.time()
    P = problem or Problem(m, cfg)
    if scan is None:
        c = estimate_radius(m)
        scan = [round(c * f, 3) for f in np.arange(0.80, 1.2501, 0.05)]
    probes = []
    feasible = dict(seeds or {})

    def probe(r, start):
        fr = P.solve(r, start, cfg, extra=extra)
        probes.append((r, fr.feasible, fr.max_violation))
        log.info("m=%d r=%.4f feasible=%s max violation %.2e", m, r, fr.feasible, fr.max_violation)
        if fr.feasible:
            feasible[r] = fr.vertices
        return fr.feasible

    def nearest(r):
        q = min(feasible, key=lambda x: (abs(x - r), x))
        return feasible[q] * (r / q)

    scan_set = set(scan)

    def run(r):
        # without seeds the scan starts every probe from the radial projection
        cold = not feasible or (not seeds and r in scan_set)
        return probe(r, None if cold else nearest(r))

    lo_in, hi_in = feasible_band(run, scan, cfg.bisect_tol, floor=0.5, name=f"m={m}")
    res = RadiusRange(m, lo_in, hi_in, probes, time.time() - t0)
    res.solutions = feasible
    return res


# ---------------------------------------------------------------------------
# the planar stitch stretch study


@dataclass
class StretchResult:
    m: int
    a_short: float  # lattice scale of the short version
    a_long: float
    period: float  # stitch length in lattice units; stitch length = a * period
    probes: list  # (scale, feasible, max violation)
    interior: list  # (scale, feasible) at evenly spaced interior scales
    short_equality_error: float

    @property
    def ratio(self) -> float:
        return self.a_long / self.a_short

    def to_dict(self) -> dict:
        return {"m": self.m, "a_short": self.a_short, "a_long": self.a_long, "ratio": self.ratio,
                "stitch_length_short": self.a_short * self.period, "stitch_length_long": self.a_long * self.period,
                "probes": [[float(a), bool(f), float(v)] for a, f, v in self.probes],
                "interior": [[float(a), bool(f)] for a, f in self.interior],
                "short_equality_error": self.short_equality_error}


def stitch_stretch_study(m: int = 5, cfg: OptimizerConfig | None = None, scan=None, n_interior: int = 5,
                         icoedge: int = 0) -> StretchResult:
    """Shortest and longest feasible stitch in a planar patch of one icoedge.

    The patch (see :mod:`sevensphere.strip`) is scaled by ``a``; the stitch
    length is ``a`` times a fixed lattice length, so the long/short length
    ratio is ``a_long / a_short``.  ``m`` only has to make the icoedge long
    enough for the patch (``m >= 5``).
    """
    from .coloring import color_distributed
    from .goldberg import build_goldberg, family_spec
    from .stitch import apply_stitches
    from .strip import icoedge_patch

    cfg = cfg or OptimizerConfig()
    ct = build_goldberg(family_spec(m))
    d = apply_stitches(ct, color_distributed(ct))
    patch = icoedge_patch(d, icoedge)
    fixed = ~patch.free
    probes = []
    solutions = {}

    def solve(a):
        t = patch.realize(a)
        near = [x for x in solutions if abs(x - a) < 0.05]
        start = t.vertices.copy()
        if near:
            q = min(near, key=lambda x: (abs(x - a), x))
            start[patch.free] = _rescale_free(solutions[q], q, a)[patch.free]

        def rebuild(V):
            return generate_constraints(t.with_vertices(V), cutoff=cfg.cutoff, arc_samples=cfg.arc_samples,
                                        prune=cfg.prune, V=V)

        fr = optimize_vertices(rebuild(start), start, cfg, rebuild=rebuild, fixed=fixed)
        probes.append((a, fr.feasible, fr.max_violation))
        log.info("stretch a=%.4f feasible=%s max violation %.2e", a, fr.feasible, fr.max_violation)
        if fr.feasible:
            solutions[a] = fr.vertices
        return fr

    scan = scan if scan is not None else [round(x, 3) for x in np.arange(0.60, 0.9001, 0.04)]
    lo, hi = feasible_band(lambda a: solve(a).feasible, scan, cfg.bisect_tol * 0.1, floor=0.0, name="scale")
    interior = []
    for a in np.linspace(lo, hi, n_interior + 2)[1:-1]:
        interior.append((float(a), solve(float(a)).feasible))
    t = patch.realize(lo)
    cs = generate_constraints(t, cutoff=cfg.cutoff, arc_samples=cfg.arc_samples)
    eq_err = float(np.max(cs.residuals(solutions[lo])["eq"])) if len(cs.eq) else 0.0
    return StretchResult(m, lo, hi, patch.period, probes, interior, eq_err)


def _rescale_free(V, a_from, a_to):
    """Scale a planar solution about the patch center from scale ``a_from`` to ``a_to``."""
    from .strip import PLANE_RADIUS

    x, y = V[:, 1] / V[:, 0] * PLANE_RADIUS, V[:, 2] / V[:, 0] * PLANE_RADIUS
    k = a_to / a_from
    P = np.column_stack([np.full(len(x), PLANE_RADIUS), x * k, y * k])
    return P / np.linalg.norm(P, axis=1)[:, None] * PLANE_RADIUS


# ---------------------------------------------------------------------------
# the exclusion variant


class ExclusionConstraints:
    """Keep vertex-pair distances out of ``(low, high)``.

    Pairs are picked up when their distance comes within ``window`` of 1 and
    keep the side they were on when first seen: ``d <= low`` if they started
    below 1, ``d >= high`` otherwise.  Pairs that are exactly 1 by construction
    (unit chords) are exempt.
    """

    def __init__(self, n_vertices: int, exempt, low: float = 0.99, high: float = 1.01, window: float = 0.1,
                 keep=None):
        self.n = n_vertices
        self.exempt = {tuple(sorted(map(int, p))) for p in exempt}
        self.low, self.high, self.window = low, high, window
        self.keep = None if keep is None else np.asarray(keep[:n_vertices], bool)
        self.sides = {}

    def update(self, V):
        from scipy.spatial import cKDTree

        tree = cKDTree(V[: self.n])
        for i, j in sorted(tree.query_pairs(1.0 + self.window)):
            if (i, j) in self.sides or (i, j) in self.exempt:
                continue
            if self.keep is not None and not (self.keep[i] or self.keep[j]):
                continue
            d = float(np.linalg.norm(V[i] - V[j]))
            if abs(d - 1.0) < self.window:
                self.sides[(i, j)] = 1 if d >= 1.0 else -1
        keys = sorted(self.sides)
        self.pairs = np.array(keys, int).reshape(-1, 2)
        self.side = np.array([self.sides[k] for k in keys], float)

    def __call__(self, X):
        if len(self.pairs) == 0:
            return np.zeros(0), np.zeros((0, 2), int), [np.zeros((0, 3))] * 2
        g, e = k_pair(X, self.pairs[:, 0], self.pairs[:, 1])
        d = g + 1.0
        res = np.where(self.side > 0, self.high - d, d - self.low)
        gi = -self.side[:, None] * e
        return res, self.pairs, [gi, -gi]


def exclusion_variant(m: int, cfg: OptimizerConfig | None = None, base: RadiusRange | None = None,
                      low: float = 0.99, high: float = 1.01, problem: Problem | None = None) -> RadiusRange:
    """Radius range when no vertex-pair distance may lie in ``(low, high)``.

    Each probe is warm-started from the feasible solution at the nearest
    radius (of this variant or of the plain problem), and every vertex pair
    near 1 is committed to the side it is on at that start.

    The result carries ``narrowing = 1 - ratio / base ratio``, comparing the
    max/min radius ratios (ranges are compared by this ratio throughout), and
    ``width_narrowing = 1 - width / base width`` for reference.
    """
    cfg = cfg or OptimizerConfig()
    t0 = time.time()
    P = problem or Problem(m, cfg)
    base = base or radius_range(m, cfg, problem=P)
    seeds = dict(getattr(base, "solutions", {}))
    found = {}
    probes = []
    keep = P.sym.keep if P.sym is not None else None

    def probe(r):
        # nearest radius overall; at equal distance prefer a solution of this variant
        pool = [(abs(x - r), 0, x, V) for x, V in found.items()] + [(abs(x - r), 1, x, V) for x, V in seeds.items()]
        _, _, q, V = min(pool, key=lambda c: c[:3])
        start = V * (r / q)
        excl = ExclusionConstraints(len(start), P.base.unit_chords, low, high, keep=keep)

        def extra(cs, V):
            excl.update(V)
            return [("exclusion", excl)]

        fr = P.solve(r, start, cfg, extra=extra)
        probes.append((r, fr.feasible, fr.max_violation))
        log.info("exclusion m=%d r=%.4f feasible=%s max violation %.2e", m, r, fr.feasible, fr.max_violation)
        if fr.feasible:
            found[r] = fr.vertices
        return fr.feasible

    scan = sorted(r for r, ok, _ in base.probes if ok)
    lo, hi = feasible_band(probe, scan, cfg.bisect_tol, floor=0.5, name=f"m={m} (exclusion)")
    res = RadiusRange(m, lo, hi, probes, time.time() - t0)
    res.solutions = found
    res.base = base
    res.narrowing = 1.0 - res.ratio / base.ratio
    res.width_narrowing = 1.0 - (hi - lo) / (base.r_max - base.r_min)
    return res
