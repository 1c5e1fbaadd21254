import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hellkan.entropies import EntropyFunction
from hellkan.geometry import CostMatrix, GroundSpace
from hellkan.solver import (DiscreteMeasure, DualPotentials, ETOptions, ETProblem,
                            InfeasiblePotentialsError, InfeasibleProblemError, check_optimality,
                            dual_value, generalized_ctransform, homogeneous_value, primal_value,
                            reverse_value, solve_et)
from hellkan.selftest import two_dirac_oracle

from oracles import let_primal_cvxpy

LOG = EntropyFunction.log()


def two_points(d):
    return GroundSpace.from_points([[0.0], [d]])


def dirac_problem(a=1.0, b=1.0, d=math.pi / 3):
    space = two_points(d)
    return ETProblem.let(DiscreteMeasure([0], [a]), DiscreteMeasure([1], [b]), space)


def random_problem(rng, n, m, dim=1, width=2.0, e1=LOG, e2=LOG, kind="log"):
    pts = rng.uniform(0, width, size=(n + m, dim))
    space = GroundSpace.from_points(pts)
    mu1 = DiscreteMeasure(np.arange(n), rng.uniform(0.1, 2.0, n))
    mu2 = DiscreteMeasure(np.arange(n, n + m), rng.uniform(0.1, 2.0, m))
    cost = CostMatrix.log(space) if kind == "log" else CostMatrix.sqdist(space)
    return ETProblem(e1, e2, cost, mu1, mu2, space)


# measures and problems

def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure([0, 0], [1.0, 1.0])
    with pytest.raises(ValueError):
        DiscreteMeasure([0], [-1.0])
    with pytest.raises(ValueError):
        DiscreteMeasure([0, 1], [1.0])
    mu = DiscreteMeasure([2, 0], [1.0, 0.5])
    assert mu.mass == 1.5
    assert np.array_equal(mu.dense(3), [0.5, 0.0, 1.0])
    assert (mu + DiscreteMeasure([0], [1.0])).mass == 2.5
    assert DiscreteMeasure.from_dict(mu.to_dict()).mass == 1.5


# primal, reverse and homogeneous values

def test_zero_plan_value():
    p = dirac_problem(1.5, 2.5)
    zero = np.zeros((1, 1))
    assert primal_value(zero, p) == 4.0
    assert reverse_value(zero, p) == 4.0
    assert homogeneous_value(zero, p) == 4.0


def test_product_plan_zero_cost():
    rng = np.random.default_rng(3)
    n, m = 3, 4
    space = GroundSpace.from_dist(np.zeros((n + m, n + m)), certify=False)
    mu1 = DiscreteMeasure(np.arange(n), rng.uniform(0.5, 1.5, n))
    mu2 = DiscreteMeasure(np.arange(n, n + m), rng.uniform(0.5, 1.5, m))
    p = ETProblem.let(mu1, mu2, space)
    m1, m2, theta = mu1.mass, mu2.mass, 1.7
    plan = theta / (m1 * m2) * np.outer(mu1.weights, mu2.weights)
    expected = m1 * LOG(theta / m1) + m2 * LOG(theta / m2)
    assert primal_value(plan, p) == pytest.approx(expected, rel=1e-13)


def test_identity_coupling_zero():
    space = GroundSpace.from_points([[0.0], [1.0]])
    mu = DiscreteMeasure([0, 1], [0.3, 0.9])
    p = ETProblem.let(mu, mu, space)
    assert primal_value(np.diag(mu.weights), p) == 0.0


def test_infinite_cost_entry_charged():
    p = dirac_problem(d=2.0)
    assert primal_value(np.ones((1, 1)), p) == math.inf


def test_two_dirac_values():
    p = dirac_problem()
    plan = np.array([[0.5]])
    assert primal_value(plan, p) == pytest.approx(1.0, abs=1e-14)
    assert reverse_value(plan, p) == pytest.approx(1.0, abs=1e-14)
    assert homogeneous_value(plan, p) == pytest.approx(1.0, abs=1e-14)


def test_reverse_equals_primal_on_random_plans(rng):
    for kind, e in [("log", LOG), ("sqdist", EntropyFunction.power(2.0)),
                    ("sqdist", EntropyFunction.tv()), ("sqdist", EntropyFunction.power(0.5))]:
        for _ in range(20):
            p = random_problem(rng, 4, 5, e1=e, e2=e, kind=kind)
            plan = rng.uniform(0, 0.4, size=(4, 5)) * np.isfinite(p.cost_matrix)
            a, b = primal_value(plan, p), reverse_value(plan, p)
            assert a == pytest.approx(b, abs=1e-10 * (1 + abs(a)))
            assert homogeneous_value(plan, p) <= b + 1e-10


# dual values and transforms

def test_zero_potentials():
    p = dirac_problem(0.7, 1.1)
    pot = DualPotentials.from_psi([0.0], [0.0], p)
    assert dual_value(pot, p) == 0.0


def test_saturated_potentials_need_infinite_cost():
    far = dirac_problem(0.7, 1.1, d=2.0)
    pot = DualPotentials.from_psi([1.0], [1.0], far)
    assert dual_value(pot, far) == pytest.approx(1.8)
    near = dirac_problem(0.7, 1.1)
    with pytest.raises(InfeasiblePotentialsError) as err:
        dual_value(DualPotentials.from_psi([1.0], [1.0], near), near)
    assert err.value.pair == (0, 0)


def test_two_dirac_dual():
    p = dirac_problem()
    sol = solve_et(p)
    assert dual_value(sol.potentials, p) == pytest.approx(2 - 2 * math.cos(math.pi / 3), abs=1e-9)


def test_ctransform_examples():
    space = GroundSpace.from_points([[0.0], [1.0]])
    mu = DiscreteMeasure([0, 1], [1.0, 1.0])
    p = ETProblem.let(mu, mu, space)
    assert np.allclose(generalized_ctransform([0.0, 0.0], p, 1), 0.0)
    p = dirac_problem()
    assert generalized_ctransform([0.0], p, 1)[0] == pytest.approx(0.75, abs=1e-15)
    far = dirac_problem(d=2.0)
    assert generalized_ctransform([0.3], far, 1)[0] == 1.0
    with pytest.raises(ValueError):
        generalized_ctransform([0.0], p, 3)


def test_ctransform_never_decreases_dual(rng):
    for _ in range(20):
        p = random_problem(rng, 5, 6)
        psi1 = rng.uniform(-1.0, 0.2, 5)
        psi2 = generalized_ctransform(psi1, p, 2)
        d0 = dual_value(DualPotentials.from_psi(psi1, psi2, p), p)
        psi1b = generalized_ctransform(psi2, p, 1)
        d1 = dual_value(DualPotentials.from_psi(psi1b, psi2, p), p)
        assert d1 >= d0 - 1e-12


# solver

def test_two_dirac_solution():
    sol = solve_et(dirac_problem())
    assert sol.converged
    assert sol.primal == pytest.approx(1.0, abs=1e-9)
    assert sol.plan[0, 0] == pytest.approx(0.5, abs=1e-6)
    assert sol.sigma1[0] * sol.sigma2[0] == pytest.approx(0.25, abs=1e-6)


@pytest.mark.parametrize("a, b, d", [(1.0, 2.0, 0.4), (0.3, 1.7, 1.2), (2.0, 2.0, 1.6),
                                     (0.5, 1.0, 3.0)])
def test_two_dirac_against_oracle(a, b, d):
    sol = solve_et(dirac_problem(a, b, d))
    assert sol.primal == pytest.approx(two_dirac_oracle(a, b, d), abs=1e-6 * (a + b))
    analytic = a + b - 2 * math.sqrt(a * b) * math.cos(min(d, math.pi / 2))
    assert sol.primal == pytest.approx(analytic, abs=1e-6 * (a + b))


def test_empty_second_measure():
    space = GroundSpace.from_points([[0.0], [1.0], [2.0]])
    mu = DiscreteMeasure([0, 2], [0.5, 1.5])
    sol = solve_et(ETProblem.let(mu, DiscreteMeasure.empty(), space))
    assert sol.primal == pytest.approx(2.0) and sol.gap == 0.0


def test_equal_measures():
    space = GroundSpace.from_points([[0.0], [0.5], [2.0]])
    mu = DiscreteMeasure([0, 1, 2], [0.5, 1.5, 1.0])
    sol = solve_et(ETProblem.let(mu, mu, space))
    assert sol.primal == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(sol.plan, np.diag(mu.weights), atol=1e-6)


def test_balanced_indicator_marginals(rng):
    ind = EntropyFunction.indicator()
    for _ in range(5):
        p = random_problem(rng, 4, 4, e1=ind, e2=ind, kind="sqdist")
        w = p.mu2.weights * p.mu1.mass / p.mu2.mass
        p = ETProblem(ind, ind, p.cost, p.mu1, DiscreteMeasure(p.mu2.support, w), p.space)
        sol = solve_et(p)
        assert sol.converged
        assert np.allclose(sol.plan.sum(1), p.mu1.weights, atol=1e-9)
        assert np.allclose(sol.plan.sum(0), p.mu2.weights, atol=1e-9)


def test_infeasible_problem():
    ind = EntropyFunction.indicator()
    space = two_points(1.0)
    p = ETProblem(ind, ind, CostMatrix.sqdist(space), DiscreteMeasure([0], [1.0]),
                  DiscreteMeasure([1], [2.0]), space)
    with pytest.raises(InfeasibleProblemError):
        solve_et(p)


def test_against_cvxpy(rng):
    for _ in range(8):
        n, m = rng.integers(2, 7, 2)
        p = random_problem(rng, int(n), int(m), dim=2, width=1.5)
        sol = solve_et(p)
        ref = let_primal_cvxpy(p.mu1.weights, p.mu2.weights, p.cost_matrix)
        assert sol.primal == pytest.approx(ref, abs=1e-5 * (1 + p.mu1.mass + p.mu2.mass))
        assert sol.primal <= ref + 1e-7


def test_weak_duality_on_arbitrary_pairs(rng):
    for _ in range(30):
        p = random_problem(rng, 4, 5)
        psi1 = rng.uniform(-2.0, 0.9, 4)
        psi2 = generalized_ctransform(psi1, p, 2)
        d = dual_value(DualPotentials.from_psi(psi1, psi2, p), p)
        plan = rng.uniform(0, 0.5, (4, 5)) * np.isfinite(p.cost_matrix)
        assert d <= primal_value(plan, p) + 1e-12


@pytest.mark.parametrize("e, kind", [(LOG, "log"), (EntropyFunction.power(2.0), "sqdist"),
                                     (EntropyFunction.power(0.5), "sqdist"),
                                     (EntropyFunction.tv(), "sqdist"),
                                     (EntropyFunction.interval(0.5, 2.0), "sqdist")],
                         ids=["log", "power2", "power0.5", "tv", "interval"])
def test_strong_duality_families(e, kind):
    rng = np.random.default_rng(11)
    for _ in range(5):
        p = random_problem(rng, 5, 6, e1=e, e2=e, kind=kind)
        sol = solve_et(p)
        tol = 1e-6 * (1 + p.mu1.mass + p.mu2.mass)
        assert sol.converged
        assert -1e-12 <= sol.gap <= tol
        assert np.all(sol.plan >= 0)
        assert np.all(sol.plan[~np.isfinite(p.cost_matrix)] == 0)


def test_optimality_report(rng):
    for _ in range(5):
        p = random_problem(rng, 5, 5)
        sol = solve_et(p)
        rep = check_optimality(sol, p)
        assert rep.ok, rep.violations
        assert rep.monotone


def test_monotone_brute_force(rng):
    from itertools import product
    for _ in range(10):
        p = random_problem(rng, 3, 3, width=1.2)
        sol = solve_et(p)
        supp = sol.plan > 1e-12 * sol.plan.max()
        x = p.space.points[p.mu1.support, 0]
        y = p.space.points[p.mu2.support, 0]
        for (i, j), (k, l) in product(zip(*np.nonzero(supp)), repeat=2):
            if x[i] < x[k]:
                assert y[j] <= y[l]


def test_formulations_at_optimum(rng):
    for _ in range(5):
        p = random_problem(rng, 5, 4, dim=2)
        sol = solve_et(p)
        h = homogeneous_value(sol.plan, p)
        assert abs(sol.primal - h) <= 10 * sol.gap + 1e-12 * (1 + p.mu1.mass + p.mu2.mass)


def test_cyclical_monotonicity(rng):
    for _ in range(5):
        p = random_problem(rng, 5, 5, dim=2, width=1.0)
        sol = solve_et(p)
        c = p.cost_matrix
        pairs = list(zip(*np.nonzero(sol.plan > 1e-9)))
        for (i, j), (k, l) in [(a, b) for a in pairs for b in pairs]:
            assert c[i, j] + c[k, l] <= c[i, l] + c[k, j] + 1e-6


def test_marginal_uniqueness_from_random_start(rng):
    e = EntropyFunction.power(2.0)
    for _ in range(3):
        p = random_problem(rng, 5, 5, e1=e, e2=e, kind="sqdist")
        a = solve_et(p)
        b = solve_et(p, ETOptions(init="random", seed=99))
        assert np.allclose(a.plan.sum(1), b.plan.sum(1), atol=1e-6)
        assert np.allclose(a.plan.sum(0), b.plan.sum(0), atol=1e-6)


def test_random_init_log():
    rng = np.random.default_rng(5)
    p = random_problem(rng, 6, 6)
    a, b = solve_et(p), solve_et(p, init="random", seed=3)
    assert np.allclose(a.plan.sum(1), b.plan.sum(1), atol=1e-6)


def test_homogeneity_and_subadditivity(rng):
    for _ in range(3):
        p = random_problem(rng, 4, 4)
        q = random_problem(rng, 4, 4)
        base = solve_et(p).primal
        for lam in (0.5, 2.0, 10.0):
            assert solve_et(p.scaled(lam)).primal == pytest.approx(
                lam * base, abs=2e-6 * lam * (1 + p.mu1.mass + p.mu2.mass))
        # put both instances on one space
        space = p.space.union(q.space)
        k = len(p.space)
        m1 = DiscreteMeasure(np.r_[p.mu1.support, k + q.mu1.support],
                             np.r_[p.mu1.weights, q.mu1.weights])
        m2 = DiscreteMeasure(np.r_[p.mu2.support, k + q.mu2.support],
                             np.r_[p.mu2.weights, q.mu2.weights])
        joint = solve_et(ETProblem.let(m1, m2, space)).primal
        assert joint <= base + solve_et(q).primal + 3e-6


def test_options_schedule():
    eps = ETOptions().epsilons()
    assert eps[0] == 1.0 and eps[-1] == pytest.approx(1e-9)
    assert all(a > b for a, b in zip(eps, eps[1:]))
    with pytest.raises(ValueError):
        solve_et(dirac_problem(), init="sideways")


@settings(max_examples=25)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0), st.floats(0.0, 3.5))
def test_gap_nonnegative_two_diracs(a, b, d):
    sol = solve_et(dirac_problem(a, b, d))
    assert sol.gap >= -1e-12
    assert sol.gap <= 1e-6 * (1 + a + b)
