import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sevensphere.coloring import combinatorial_conflicts
from sevensphere.optimize import (
    ExclusionConstraints,
    OptimizerConfig,
    Problem,
    arc_points,
    arc_points_vjp,
    build_points,
    estimate_radius,
    feasible_band,
    generate_constraints,
    k_ang,
    k_pair,
    k_seg,
    optimize_vertices,
    rotation_group,
    NoFeasibleSeed,
)
from sevensphere.tiling import SphericalTiling

STEP = 1e-6
REL = 1e-5


def fd_check(f, X, grads, idx, rng):
    """Compare analytic gradients with central differences along a random direction."""
    D = rng.standard_normal(X.shape)
    D /= np.linalg.norm(D)
    fd = (f(X + STEP * D) - f(X - STEP * D)) / (2 * STEP)
    an = np.zeros_like(fd)
    scale = np.zeros_like(fd)
    for cols, g in zip(idx, grads):
        an += np.sum(g * D[cols], axis=1)
        scale += np.sum(g * g, axis=1)
    scale = np.sqrt(scale)
    err = np.abs(fd - an) / np.maximum(scale, 1e-12)
    return err


def sphere_points(rng, n, r):
    P = rng.standard_normal((n, 3))
    return P / np.linalg.norm(P, axis=1)[:, None] * r


def test_pair_gradient():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        r = rng.uniform(1, 10)
        X = sphere_points(rng, 2, r)
        f = lambda Y: k_pair(Y, np.array([0]), np.array([1]))[0]  # noqa: E731
        _, e = k_pair(X, np.array([0]), np.array([1]))
        worst = max(worst, fd_check(f, X, [e, -e], [[0], [1]], rng).max())
    assert worst < REL


def _branch(X, r):
    """Which formula k_seg uses, and how far the point is from switching."""
    p, a, b = X
    m = np.cross(a, b)
    n = m / np.linalg.norm(m)
    q = p - np.dot(p, n) * n
    xs = r * q / np.linalg.norm(q)
    s1 = np.dot(np.cross(a, xs), m)
    s2 = np.dot(np.cross(xs, b), m)
    da, db = np.linalg.norm(p - a), np.linalg.norm(p - b)
    margin = min(abs(s1), abs(s2)) / np.linalg.norm(m) / r
    if s1 >= 0 and s2 >= 0:
        return "inside", margin
    return "end", min(margin, abs(da - db))


def test_segment_gradient():
    rng = np.random.default_rng(2)
    worst, kinds, n = 0.0, set(), 0
    while n < 100:
        r = rng.uniform(1, 10)
        X = sphere_points(rng, 3, r)
        X[1:] = X[0] + 0.3 * r * rng.standard_normal((2, 3))
        X = X / np.linalg.norm(X, axis=1)[:, None] * r
        kind, margin = _branch(X, r)
        if margin < 1e-3:
            continue  # a kink of the distance function; finite differences are meaningless there
        kinds.add(kind)
        n += 1
        f = lambda Y: k_seg(Y, np.array([0]), np.array([1]), np.array([2]), r)[0]  # noqa: E731
        _, gp, ga, gb = k_seg(X, np.array([0]), np.array([1]), np.array([2]), r)
        worst = max(worst, fd_check(f, X, [gp, ga, gb], [[0], [1], [2]], rng).max())
    assert kinds == {"inside", "end"}
    assert worst < REL


def test_angle_gradient():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        r = rng.uniform(1, 10)
        X = sphere_points(rng, 3, r)
        f = lambda Y: k_ang(Y, np.array([0]), np.array([1]), np.array([2]), r)[0]  # noqa: E731
        _, gc, g1, g2 = k_ang(X, np.array([0]), np.array([1]), np.array([2]), r)
        worst = max(worst, fd_check(f, X, [gc, g1, g2], [[0], [1], [2]], rng).max())
    assert worst < REL


def test_arc_points_vjp(tiling43):
    pm = build_points(tiling43, 4)
    rng = np.random.default_rng(4)
    V0 = tiling43.vertices
    worst = 0.0
    for _ in range(100):
        V = V0 + 0.01 * rng.standard_normal(V0.shape)
        G = rng.standard_normal((pm.n_points, 3))
        f = lambda W: np.sum(G * arc_points(W, pm, tiling43.r))  # noqa: E731
        g = arc_points_vjp(V, pm, tiling43.r, G)
        D = rng.standard_normal(V.shape)
        D /= np.linalg.norm(D)
        fd = (f(V + STEP * D) - f(V - STEP * D)) / (2 * STEP)
        worst = max(worst, abs(fd - np.sum(g * D)) / np.linalg.norm(g))
    assert worst < REL


def test_exclusion_gradient():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        r = rng.uniform(1, 5)
        X = sphere_points(rng, 2, r)
        d = np.linalg.norm(X[0] - X[1])
        if abs(d - 1) >= 0.1:
            X[1] = X[0] + (X[1] - X[0]) / d * rng.uniform(0.92, 1.08)
        ex = ExclusionConstraints(2, [])
        ex.update(X)
        f = lambda Y: ex(Y)[0]  # noqa: E731
        res, pairs, grads = ex(X)
        assert len(res) == 1
        worst = max(worst, fd_check(f, X, grads, [pairs[:, 0], pairs[:, 1]], rng).max())
    assert worst < REL


def test_exclusion_exempts_unit_chords():
    X = np.array([[0.0, 0, 3], [0.0, 1.0, math.sqrt(9 - 1.0)]])
    X[1] = X[1] / np.linalg.norm(X[1]) * 3
    d = np.linalg.norm(X[0] - X[1])
    ex = ExclusionConstraints(2, [(1, 0)])
    ex.update(X)
    assert abs(d - 1) < 0.1 and len(ex.pairs) == 0


def test_merit_gradient(tiling43):
    cs = generate_constraints(tiling43, arc_samples=4)
    rng = np.random.default_rng(6)
    V = tiling43.vertices + 0.02 * rng.standard_normal(tiling43.vertices.shape)
    f0, G = cs.merit_grad(V, 1.0, 1.0, 2e-3)
    worst = 0.0
    for _ in range(10):
        D = rng.standard_normal(V.shape)
        D /= np.linalg.norm(D)
        fd = (cs.merit_grad(V + STEP * D, 1.0, 1.0, 2e-3)[0] - cs.merit_grad(V - STEP * D, 1.0, 1.0, 2e-3)[0]) / (2 * STEP)
        worst = max(worst, abs(fd - np.sum(G * D)) / np.linalg.norm(G))
    assert worst < REL


def test_separation_for_every_conflict(gp43, coloring43, tiling43):
    cs = generate_constraints(tiling43)
    pairs = set(cs.sep_pairs)
    rep = combinatorial_conflicts(gp43, coloring43)
    for ps in rep.pairs.values():
        for a, b in ps:
            assert (min(a, b), max(a, b)) in pairs


def test_pruning_soundness(tiling43):
    cfg = OptimizerConfig()
    full = generate_constraints(tiling43, arc_samples=cfg.arc_samples)
    pruned = generate_constraints(tiling43, arc_samples=cfg.arc_samples, prune=cfg.prune)
    X = arc_points(tiling43.vertices, full.points, tiling43.r)
    kept_d = {tuple(x) for x in pruned.diam}
    kept_s = {tuple(x) for x in pruned.sep}
    drop_d = np.array([x for x in full.diam if tuple(x) not in kept_d])
    drop_s = np.array([x for x in full.sep if tuple(x) not in kept_s])
    assert len(drop_d) and len(drop_s)
    assert k_pair(X, drop_d[:, 0], drop_d[:, 1])[0].max() <= -0.35
    assert k_seg(X, *drop_s.T, tiling43.r)[0].max() <= -0.35
    # the pruned and unpruned sets agree on the maximum violation
    assert pruned.max_violation(tiling43.vertices) == full.max_violation(tiling43.vertices)


def test_single_tile_constraints():
    r = 2.0
    V = np.array([[1, 0, 1], [0, 1, 1], [-1, -1, 1]], float)
    V = V / np.linalg.norm(V, axis=1)[:, None] * r
    t = SphericalTiling(r, V, [[0, 1, 2]], [0])
    cs = generate_constraints(t)
    assert cs.counts() == {"diameter": 3, "separation": 0, "angle": 0, "unit_chord": 0, "tile_pairs": 0,
                           "on_sphere": 3}


def test_feasible_start_takes_no_iterations():
    r = 2.0
    V = np.array([[1, 0, 6], [0, 1, 6], [-1, -1, 6]], float)
    V = V / np.linalg.norm(V, axis=1)[:, None] * r
    t = SphericalTiling(r, V, [[0, 1, 2]], [0])
    fr = optimize_vertices(generate_constraints(t), V)
    assert fr.feasible and fr.iterations == 0


def test_small_problem_becomes_feasible():
    # a triangle slightly too wide, on a sphere where shrinking it is possible
    r = 2.0
    V = np.array([[1.0, 0, 1.2], [-0.5, 0.87, 1.2], [-0.5, -0.87, 1.2]])
    V = V / np.linalg.norm(V, axis=1)[:, None] * r
    t = SphericalTiling(r, V, [[0, 1, 2]], [0])
    cs = generate_constraints(t)
    assert cs.max_violation(V) > 0
    fr = optimize_vertices(cs, V)
    assert fr.feasible and np.allclose(np.linalg.norm(fr.vertices, axis=1), r)


def test_rotation_group_order(gp43):
    assert len(rotation_group(gp43.net.vertices)) == 60


def test_symmetric_problem_at_showcase_radius():
    P = Problem(1, OptimizerConfig(symmetry=True))
    fr = P.solve(4.0)
    assert fr.feasible and fr.max_violation <= 1e-6
    full = generate_constraints(P.tiling(4.0, fr.vertices))
    assert full.max_violation(fr.vertices) <= 1e-6


def test_symmetric_problem_infeasible_far_below():
    P = Problem(1, OptimizerConfig(symmetry=True))
    assert not P.solve(2.0).feasible


def test_estimate_radius_showcase():
    assert round(estimate_radius(1)) == 4


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 5.0), st.floats(5.5, 9.0))
def test_feasible_band_on_interval(lo, hi):
    probe = lambda x: lo <= x <= hi  # noqa: E731
    a, b = feasible_band(probe, [2.0, 3.0, 4.0, 5.0, 6.0, 7.0], tol=0.01, floor=0.5)
    assert lo <= a <= lo + 0.01 + 1e-9
    assert hi - 0.01 - 1e-9 <= b <= hi


def test_feasible_band_recovers_from_spurious_failure():
    # the scan point 3.0 fails although the true band is [2.2, 6.5]
    probe = lambda x: 2.2 <= x <= 6.5 and x != 3.0  # noqa: E731
    a, b = feasible_band(probe, [2.0, 3.0, 4.0, 5.0, 6.0, 7.0], tol=0.01, floor=0.5)
    assert 2.2 <= a <= 2.21 + 1e-9
    assert 6.49 - 1e-9 <= b <= 6.5


def test_feasible_band_no_seed():
    with pytest.raises(NoFeasibleSeed):
        feasible_band(lambda x: False, [1.0, 2.0], tol=0.01)
