import math

import numpy as np
import pytest

from hellkan.geometry import GroundSpace, UnsupportedGeometryError
from hellkan.hk import (BL_CONSTANT, NonOptimalPlanError, bl_distance, geodesic_interp,
                        ghk_distance, hellinger, hellinger_squared, hk_between, hk_distance,
                        lift_plan, scaling_limits, wasserstein)
from hellkan.selftest import assignment_oracle
from hellkan.solver import DiscreteMeasure, ETProblem, solve_et

from oracles import bl_cvxpy

THIRD = math.pi / 3


def diracs(d, a=1.0, b=1.0):
    space = GroundSpace.from_points([[0.0], [d]])
    return DiscreteMeasure([0], [a]), DiscreteMeasure([1], [b]), space


def random_instance(rng, n=4, m=4, dim=2, width=1.5, balanced=False):
    space = GroundSpace.from_points(rng.uniform(0, width, (n + m, dim)))
    w1 = rng.uniform(0.1, 2.0, n)
    w2 = rng.uniform(0.1, 2.0, m)
    if balanced:
        w2 *= w1.sum() / w2.sum()
    return DiscreteMeasure(np.arange(n), w1), DiscreteMeasure(np.arange(n, n + m), w2), space


# HK

def test_hk_two_diracs():
    res = hk_distance(*diracs(THIRD))
    assert res.value == pytest.approx(1.0, abs=1e-7)
    assert res.gap <= 1e-6


@pytest.mark.parametrize("d", [math.pi / 2, 2.0, 4.0])
def test_hk_far_diracs(d):
    assert hk_distance(*diracs(d)).value == pytest.approx(math.sqrt(2.0), abs=1e-9)


def test_hk_self_distance():
    space = GroundSpace.from_points([[0.0], [0.3], [1.0]])
    mu = DiscreteMeasure([0, 1, 2], [0.2, 1.0, 0.4])
    assert hk_distance(mu, mu, space).value <= 1e-7


def test_hk_against_zero():
    space = GroundSpace.from_points([[0.0], [1.0]])
    mu = DiscreteMeasure([0, 1], [1.5, 2.5])
    assert hk_distance(mu, DiscreteMeasure.empty(), space).value == pytest.approx(2.0)


def test_hk_symmetry_exact(rng):
    for _ in range(5):
        a, b, space = random_instance(rng)
        assert hk_distance(a, b, space).value == hk_distance(b, a, space).value


# GHK

@pytest.mark.parametrize("d", [0.2, 1.0, 2.5])
def test_ghk_diracs(d):
    expected = math.sqrt(2 - 2 * math.exp(-d * d / 2))
    assert ghk_distance(*diracs(d)).value == pytest.approx(expected, abs=1e-7)


def test_ghk_dominated_by_hk(rng):
    for _ in range(10):
        a, b, space = random_instance(rng)
        g, h = ghk_distance(a, b, space), hk_distance(a, b, space)
        assert g.value <= h.value + 2e-6
    mu = DiscreteMeasure([0, 1], [1.0, 2.0])
    assert ghk_distance(mu, mu, space).value <= 1e-7


# Hellinger

def test_hellinger_examples():
    a, b = DiscreteMeasure([0], [2.0]), DiscreteMeasure([0], [0.5])
    assert hellinger_squared(a, b) == pytest.approx((math.sqrt(2) - math.sqrt(0.5)) ** 2)
    c = DiscreteMeasure([1, 2], [0.7, 0.4])
    assert hellinger_squared(a, c) == pytest.approx(3.1)
    assert hellinger(c, c) == 0.0
    assert hellinger(a, c) == pytest.approx(math.sqrt(3.1))


# Wasserstein

def test_wasserstein_examples():
    a, b, space = diracs(1.0)
    assert wasserstein(a, b, space).value == pytest.approx(1.0, abs=1e-9)
    assert wasserstein(a, DiscreteMeasure([1], [2.0]), space).value == math.inf
    assert wasserstein(a, a, space).value == pytest.approx(0.0, abs=1e-9)


def test_wasserstein_assignment_oracle(rng):
    for n in (2, 3, 5):
        x, y = rng.uniform(0, 2, n), rng.uniform(0, 2, n)
        space = GroundSpace.from_points(np.r_[x, y][:, None])
        a = DiscreteMeasure(np.arange(n), np.full(n, 1.0 / n))
        b = DiscreteMeasure(np.arange(n, 2 * n), np.full(n, 1.0 / n))
        w = wasserstein(a, b, space).value
        assert w == pytest.approx(assignment_oracle(x, y), abs=1e-6)


def test_order_relations(rng):
    for _ in range(10):
        a, b, space = random_instance(rng, balanced=True)
        h = hk_distance(a, b, space)
        assert h.value <= hellinger(a, b) + 1e-6
        wt = wasserstein(a, b, space, truncation=math.pi / 2).value
        assert h.value <= wt + 1e-6
        assert wt <= wasserstein(a, b, space).value + 1e-6


# bounded Lipschitz

def test_bl_examples():
    a, b, space = diracs(1.0)
    assert bl_distance(a, a, space) == pytest.approx(0.0, abs=1e-12)
    assert bl_distance(DiscreteMeasure([0], [1.7]), DiscreteMeasure.empty(), space) == \
        pytest.approx(1.7)
    assert bl_distance(a, b, space) == pytest.approx(2.0 / 3.0, abs=1e-9)


def test_bl_against_cvxpy(rng):
    for _ in range(5):
        a, b, space = random_instance(rng, 3, 4)
        idx = np.arange(7)
        w = a.dense(7) - b.dense(7)
        ref = bl_cvxpy(w, space.dist[np.ix_(idx, idx)])
        assert bl_distance(a, b, space) == pytest.approx(ref, abs=1e-6)


def test_bl_below_hk_bound(rng):
    assert BL_CONSTANT == pytest.approx(math.sqrt(2 + math.pi**2 / 2))
    for _ in range(10):
        a, b, space = random_instance(rng)
        h = hk_distance(a, b, space).value
        assert bl_distance(a, b, space) <= BL_CONSTANT * math.sqrt(a.mass + b.mass) * h + 1e-6


# lifting

def lifted(d, a=1.0, b=1.0):
    mu1, mu2, space = diracs(d, a, b)
    p = ETProblem.let(mu1, mu2, space)
    return lift_plan(solve_et(p), p), space


def test_lift_two_diracs():
    lp, _ = lifted(THIRD)
    assert len(lp) == 1
    x1, r1, x2, r2, m = lp.atoms[0]
    assert (x1, x2) == (0, 1)
    assert r1 == pytest.approx(math.sqrt(2), abs=1e-6)
    assert r2 == pytest.approx(math.sqrt(2), abs=1e-6)
    assert m == pytest.approx(0.5, abs=1e-6)
    assert lp.homogeneous_marginal(1, 2)[0] == pytest.approx(1.0, abs=1e-12)
    assert r1 * r2 * math.cos(THIRD) == pytest.approx(1.0, abs=1e-5)


def test_lift_far_diracs():
    lp, _ = lifted(2.0)
    assert not lp.transported.any()
    assert len(lp) == 2
    assert lp.homogeneous_marginal(1, 2)[0] == 1.0
    assert lp.homogeneous_marginal(2, 2)[1] == 1.0


def test_lift_against_zero():
    space = GroundSpace.from_points([[0.0], [1.0]])
    mu = DiscreteMeasure([0, 1], [0.5, 1.5])
    p = ETProblem.let(mu, DiscreteMeasure.empty(), space)
    lp = lift_plan(solve_et(p), p)
    assert not lp.transported.any()
    assert np.allclose(lp.homogeneous_marginal(1, 2), [0.5, 1.5])


def test_lift_invariants(rng):
    for _ in range(5):
        a, b, space = random_instance(rng, 5, 5, width=2.0)
        p = ETProblem.let(a, b, space)
        sol = solve_et(p)
        lp = lift_plan(sol, p)
        n = len(space)
        assert np.allclose(lp.homogeneous_marginal(1, n), a.dense(n), atol=1e-9)
        assert np.allclose(lp.homogeneous_marginal(2, n), b.dense(n), atol=1e-9)
        t = lp.transported
        d = space.dist[lp.x1[t], lp.x2[t]]
        assert np.all(d < math.pi / 2)
        heavy = lp.mass[t] > 1e-6
        prod = lp.r1[t] * lp.r2[t] * np.cos(d)
        assert np.allclose(prod[heavy], 1.0, atol=1e-5)


def test_lift_refuses_bad_certificate():
    mu1, mu2, space = diracs(THIRD)
    p = ETProblem.let(mu1, mu2, space)
    with pytest.raises(NonOptimalPlanError):
        lift_plan(solve_et(p), p, gap_threshold=-1.0)


# geodesics

def test_geodesic_endpoints_and_midpoint():
    lp, space = lifted(THIRD)
    s0, m0 = geodesic_interp(lp, 0.0, space)
    assert m0.mass == pytest.approx(1.0) and s0.points[m0.support[0], 0] == pytest.approx(0.0)
    s1, m1 = geodesic_interp(lp, 1.0, space)
    assert m1.mass == pytest.approx(1.0) and s1.points[m1.support[0], 0] == pytest.approx(THIRD)
    sh, mh = geodesic_interp(lp, 0.5, space)
    assert len(mh) == 1
    assert mh.mass == pytest.approx(0.75, abs=1e-6)
    assert sh.points[mh.support[0], 0] == pytest.approx(THIRD / 2, abs=1e-6)


@pytest.mark.parametrize("t", [0.0, 0.25, 0.5, 0.9])
def test_geodesic_pure_growth(t):
    space = GroundSpace.from_points([[0.0], [1.0]])
    mu = DiscreteMeasure([0], [1.3])
    p = ETProblem.let(mu, DiscreteMeasure.empty(), space)
    _, mt = geodesic_interp(lift_plan(solve_et(p), p), t, space)
    assert mt.mass == (1 - t) ** 2 * 1.3


def test_geodesic_constant_speed(rng):
    a, b, space = random_instance(rng, 3, 3, width=1.0)
    p = ETProblem.let(a, b, space)
    lp = lift_plan(solve_et(p), p)
    total = hk_distance(a, b, space).value
    frames = {t: geodesic_interp(lp, t, space) for t in (0.0, 0.25, 0.5, 1.0)}
    for s, t in [(0.0, 0.5), (0.25, 1.0), (0.25, 0.5)]:
        (sa, ma), (sb, mb) = frames[s], frames[t]
        assert hk_between(sa, ma, sb, mb).value == pytest.approx(abs(t - s) * total, abs=1e-4)


def test_geodesic_needs_coordinates():
    space = GroundSpace.from_dist([[0.0, 1.0], [1.0, 0.0]])
    p = ETProblem.let(DiscreteMeasure([0], [1.0]), DiscreteMeasure([1], [1.0]), space)
    lp = lift_plan(solve_et(p), p)
    with pytest.raises(UnsupportedGeometryError):
        geodesic_interp(lp, 0.5, space)
    with pytest.raises(ValueError):
        geodesic_interp(lp, 1.5, space)


# scaling limits

def test_scaling_examples():
    a, b, space = diracs(1.0)
    tab = scaling_limits(a, b, space, [1.0, 2.0, 64.0])
    rows = {lam: (h, w) for lam, h, w in tab.rows()}
    assert rows[2.0][0] ** 2 == pytest.approx(2.0, abs=1e-9)
    assert rows[2.0][0] ** 2 == pytest.approx(hellinger_squared(a, b))
    assert rows[1.0][1] == pytest.approx(math.sqrt(2 - 2 * math.cos(1.0)), abs=1e-6)
    assert rows[1.0][1] == pytest.approx(0.958851, abs=1e-6)
    assert rows[64.0][1] == pytest.approx(1.0, abs=1e-3)
    assert tab.wasserstein == pytest.approx(1.0)
    assert tab.hellinger_monotone and tab.wasserstein_monotone


def test_scaling_rejects_bad_factors():
    a, b, space = diracs(1.0)
    with pytest.raises(ValueError):
        scaling_limits(a, b, space, [0.0, 1.0])


def test_triangle_inequality(rng):
    for _ in range(10):
        space = GroundSpace.from_points(rng.uniform(0, 2, (6, 1)))
        ms = [DiscreteMeasure(np.arange(6), rng.uniform(0, 1, 6) * (rng.uniform(size=6) < 0.6))
              for _ in range(3)]
        d = lambda i, j: hk_distance(ms[i], ms[j], space).value  # noqa: E731
        assert d(0, 2) <= d(0, 1) + d(1, 2) + 1e-6


def test_lipschitz_pushforward(rng):
    for _ in range(10):
        x = np.sort(rng.uniform(0, 2, 6))
        space = GroundSpace.from_points(x[:, None])
        a = DiscreteMeasure(np.arange(6), rng.uniform(0, 1, 6))
        b = DiscreteMeasure(np.arange(6), rng.uniform(0, 1, 6))
        # clamping to [x1, x4] is 1-Lipschitz
        f = np.array([1, 1, 2, 3, 4, 4])
        keep = np.unique(f)

        def push(m):
            return DiscreteMeasure(keep, np.bincount(f, m.weights, 6)[keep])

        assert np.all(np.abs(x[f][:, None] - x[f][None, :]) <= np.abs(x[:, None] - x[None, :]))
        assert hk_distance(push(a), push(b), space).value <= hk_distance(a, b, space).value + 1e-6
