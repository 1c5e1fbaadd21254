"""Hellinger-Kantorovich distance and its relatives on finite spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .entropies import EntropyFunction
from .geometry import CostMatrix, GroundSpace, UnsupportedGeometryError, geodesic_arrays
from .solver import DiscreteMeasure, ETOptions, ETProblem, ETSolution, solve_et

__all__ = [
    "DistanceResult", "LiftedPlan", "ScalingTable", "NonOptimalPlanError",
    "hk_distance", "ghk_distance", "hellinger", "hellinger_squared", "wasserstein",
    "bl_distance", "lift_plan", "geodesic_interp", "scaling_limits", "hk_between",
    "BL_CONSTANT",
]

# optimal constant in BL <= C (m1 + m2)^(1/2) HK
BL_CONSTANT = math.sqrt(2.0 + 0.5 * math.pi**2)


class NonOptimalPlanError(ValueError):
    """A plan was too far from optimal for the requested construction."""


@dataclass(frozen=True, eq=False)
class DistanceResult:
    """A distance together with the duality gap of the squared value.

    ``value`` is the distance itself; ``squared`` is the certified primal
    value of the underlying transport problem.
    """

    value: float
    gap: float
    solution: Optional[ETSolution] = None
    problem: Optional[ETProblem] = None

    def __float__(self):
        return float(self.value)

    @property
    def squared(self) -> float:
        return self.value**2

    @property
    def converged(self) -> bool:
        return self.solution is None or self.solution.converged


def _canonical(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> bool:
    """True when the pair should be swapped so both orders give one solve."""
    k1 = (len(mu1), tuple(mu1.support.tolist()), tuple(mu1.weights.tolist()))
    k2 = (len(mu2), tuple(mu2.support.tolist()), tuple(mu2.weights.tolist()))
    return k2 < k1


def _transpose(sol: ETSolution) -> ETSolution:
    from .solver import DualPotentials
    p = sol.potentials
    pots = DualPotentials(p.psi2, p.psi1, p.phi2, p.phi1)
    return ETSolution(sol.plan.T.copy(), pots, sol.primal, sol.dual, sol.gap, sol.status,
                      sol.mu2, sol.mu1, sol.epsilon, sol.iterations)


def _symmetric_solve(make_problem, mu1, mu2, opts) -> DistanceResult:
    swap = _canonical(mu1, mu2)
    a, b = (mu2, mu1) if swap else (mu1, mu2)
    sol = solve_et(make_problem(a, b), opts)
    if swap:
        sol = _transpose(sol)
    problem = make_problem(mu1, mu2)
    return DistanceResult(math.sqrt(max(sol.primal, 0.0)), sol.gap, sol, problem)


def hk_distance(mu1: DiscreteMeasure, mu2: DiscreteMeasure, space: GroundSpace,
                opts: Optional[ETOptions] = None) -> DistanceResult:
    """Hellinger-Kantorovich distance, ``HK² = LET``.

    Uses logarithmic entropies and the cost ``ℓ(d) = -log cos²(d ∧ π/2)``.
    The pair is put in a canonical order first so that
    ``hk_distance(a, b) == hk_distance(b, a)`` holds exactly.
    """
    return _symmetric_solve(lambda a, b: ETProblem.let(a, b, space), mu1, mu2, opts)


def ghk_distance(mu1: DiscreteMeasure, mu2: DiscreteMeasure, space: GroundSpace,
                 opts: Optional[ETOptions] = None) -> DistanceResult:
    """Gaussian Hellinger-Kantorovich distance: logarithmic entropies, cost ``d²``."""
    e = EntropyFunction.log()
    cost = CostMatrix.sqdist(space)
    return _symmetric_solve(lambda a, b: ETProblem(e, e, cost, a, b, space), mu1, mu2, opts)


def _union_weights(mu1: DiscreteMeasure, mu2: DiscreteMeasure):
    idx = np.union1d(mu1.support, mu2.support)
    n = int(idx.max(initial=-1)) + 1
    return idx, mu1.dense(n)[idx], mu2.dense(n)[idx]


def hellinger_squared(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> float:
    """``Σ_x (√μ1(x) - √μ2(x))²`` atomwise on the union of supports."""
    _, a, b = _union_weights(mu1, mu2)
    return float(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2))


def hellinger(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> float:
    """Hellinger distance, the square root of :func:`hellinger_squared`."""
    return math.sqrt(hellinger_squared(mu1, mu2))


def wasserstein(mu1: DiscreteMeasure, mu2: DiscreteMeasure, space: GroundSpace,
                power: float = 2.0, truncation: Optional[float] = None,
                opts: Optional[ETOptions] = None) -> DistanceResult:
    """Wasserstein distance ``W_p`` through the solver with indicator entropies.

    Returns ``inf`` when the masses differ.  ``truncation`` replaces ``d`` by
    ``d ∧ truncation``.
    """
    m1, m2 = mu1.mass, mu2.mass
    if not math.isclose(m1, m2, rel_tol=1e-12, abs_tol=0.0):
        return DistanceResult(math.inf, 0.0)
    if m1 == 0:
        return DistanceResult(0.0, 0.0)
    # remove the rounding difference so the problem is exactly balanced
    mu2 = DiscreteMeasure(mu2.support, mu2.weights * (m1 / m2))
    d = space.dist if truncation is None else np.minimum(space.dist, truncation)
    cost = CostMatrix(d**power)
    e = EntropyFunction.indicator()
    res = _symmetric_solve(lambda a, b: ETProblem(e, e, cost, a, b, space), mu1, mu2, opts)
    ot = max(res.solution.primal, 0.0)
    return DistanceResult(ot ** (1.0 / power), res.gap, res.solution, res.problem)


def bl_distance(mu1: DiscreteMeasure, mu2: DiscreteMeasure, space: GroundSpace) -> float:
    """Bounded-Lipschitz distance by an exact linear program.

    Maximizes ``Σ ζ (μ1 - μ2)`` over ``|ζ| <= s``, ``ζ(x) - ζ(y) <= L d(x, y)``
    and ``s + L <= 1`` on the union of the supports.
    """
    idx, a, b = _union_weights(mu1, mu2)
    n = len(idx)
    if n == 0:
        return 0.0
    d = space.dist[np.ix_(idx, idx)]
    # variables: ζ (n), s, L
    nv = n + 2
    rows = []
    for i in range(n):
        r = np.zeros(nv)
        r[i], r[n] = 1.0, -1.0
        rows.append(r)
        r = np.zeros(nv)
        r[i], r[n] = -1.0, -1.0
        rows.append(r)
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    pair = np.zeros((len(ii), nv))
    pair[np.arange(len(ii)), ii] = 1.0
    pair[np.arange(len(ii)), jj] = -1.0
    pair[:, n + 1] = -d[ii, jj]
    budget = np.zeros(nv)
    budget[n] = budget[n + 1] = 1.0
    a_ub = np.vstack([np.array(rows), pair, budget[None, :]])
    b_ub = np.concatenate([np.zeros(2 * n + len(ii)), [1.0]])
    c = np.concatenate([-(a - b), [0.0, 0.0]])
    bounds = [(None, None)] * n + [(0, None), (0, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    return float(max(-res.fun, 0.0))


# ----------------------------------------------------------------------
# cone lifting and geodesics


@dataclass(frozen=True, eq=False)
class LiftedPlan:
    """Plan on pairs of cone points ``([x1, r1], [x2, r2])`` with masses.

    Positions are point indices of the ground space; an atom with ``r = 0``
    on one side is paired with the vertex, whose nominal position repeats
    that of the other side.
    """

    x1: np.ndarray
    r1: np.ndarray
    x2: np.ndarray
    r2: np.ndarray
    mass: np.ndarray

    def __len__(self):
        return len(self.mass)

    @property
    def atoms(self) -> list[tuple[int, float, int, float, float]]:
        return [(int(a), float(b), int(c), float(d), float(e))
                for a, b, c, d, e in zip(self.x1, self.r1, self.x2, self.r2, self.mass)]

    @property
    def transported(self) -> np.ndarray:
        return (self.r1 > 0) & (self.r2 > 0)

    def homogeneous_marginal(self, side: int, n_points: int) -> np.ndarray:
        """``Σ mass r_side² δ_{x_side}`` as a dense vector."""
        x, r = (self.x1, self.r1) if side == 1 else (self.x2, self.r2)
        out = np.zeros(n_points)
        np.add.at(out, x, self.mass * r**2)
        return out


def lift_plan(solution: ETSolution, problem: ETProblem,
              gap_threshold: Optional[float] = None, prune: float = 0.0) -> LiftedPlan:
    """Lift an optimal Entropy-Transport plan to the cone.

    Each plan entry ``γ_ij`` becomes the atom ``(x_i, √ϱ1_i; y_j, √ϱ2_j)``;
    mass of ``μ_i`` not seen by the plan becomes atoms paired with the
    vertex at radius one.

    Raises
    ------
    NonOptimalPlanError
        When the certified gap exceeds ``gap_threshold``, which defaults to
        ``10 * 1e-6 * (1 + m1 + m2)``.
    """
    m1, m2 = problem.mu1.mass, problem.mu2.mass
    if gap_threshold is None:
        gap_threshold = 1e-5 * (1.0 + m1 + m2)
    if not solution.gap <= gap_threshold:
        raise NonOptimalPlanError(f"gap {solution.gap:.3g} exceeds {gap_threshold:.3g}")
    plan = solution.plan
    s1, s2 = problem.mu1.support, problem.mu2.support
    i, j = np.nonzero(plan > prune)
    w = plan[i, j]
    # keep the homogeneous marginal exact: mass r1² summed over a row is μ1
    g1 = np.bincount(i, weights=w, minlength=plan.shape[0])[i]
    g2 = np.bincount(j, weights=w, minlength=plan.shape[1])[j]
    r1 = np.sqrt(problem.mu1.weights[i] / g1)
    r2 = np.sqrt(problem.mu2.weights[j] / g2)
    x1, x2, mass = [s1[i]], [s2[j]], [w]
    rr1, rr2 = [r1], [r2]
    seen1 = np.bincount(i, minlength=plan.shape[0]) > 0
    seen2 = np.bincount(j, minlength=plan.shape[1]) > 0
    sing1 = np.flatnonzero(~seen1 & (problem.mu1.weights > 0))
    sing2 = np.flatnonzero(~seen2 & (problem.mu2.weights > 0))
    x1 += [s1[sing1], s2[sing2]]
    x2 += [s1[sing1], s2[sing2]]
    rr1 += [np.ones(len(sing1)), np.zeros(len(sing2))]
    rr2 += [np.zeros(len(sing1)), np.ones(len(sing2))]
    mass += [problem.mu1.weights[sing1], problem.mu2.weights[sing2]]
    return LiftedPlan(np.concatenate(x1).astype(np.int64), np.concatenate(rr1),
                      np.concatenate(x2).astype(np.int64), np.concatenate(rr2),
                      np.concatenate(mass))


def geodesic_interp(lifted: LiftedPlan, t: float,
                    space: GroundSpace) -> tuple[GroundSpace, DiscreteMeasure]:
    """Measure at time ``t`` on the HK geodesic generated by a lifted plan.

    Each atom moves along its cone geodesic and contributes ``mass r(t)²``
    at ``x(t)``.  In a Euclidean space the result lives on a new point set
    (coinciding positions are merged); otherwise only atoms that stay on
    their base point or touch the vertex are allowed.

    Returns
    -------
    (GroundSpace, DiscreteMeasure)
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    keep = (lifted.r1 > 0) | (lifted.r2 > 0)
    x1, x2 = lifted.x1[keep], lifted.x2[keep]
    r1, r2, mass = lifted.r1[keep], lifted.r2[keep], lifted.mass[keep]
    if space.points is None:
        moving = (x1 != x2) & (r1 > 0) & (r2 > 0)
        if np.any(moving & (space.dist[x1, x2] < np.pi)):
            raise UnsupportedGeometryError("geodesics between distinct points need coordinates")
        rad = (1 - t) * r1 + t * r2
        # antipodal pairs pass through the vertex
        s = t * (r1 + r2)
        rad = np.where(moving, np.abs(r1 - s), rad)
        pos = np.where(moving & (s > r1), x2, np.where(r1 > 0, x1, x2))
        w = mass * rad**2
        n = len(space)
        dense = np.zeros(n)
        np.add.at(dense, pos, w)
        idx = np.flatnonzero(dense > 0)
        return space, DiscreteMeasure(idx, dense[idx])
    p1, p2 = space.points[x1], space.points[x2]
    pos, rad = geodesic_arrays(p1, r1, p2, r2, t)
    w = mass * rad**2
    live = w > 0
    pos, w = pos[live], w[live]
    if len(w) == 0:
        return GroundSpace.from_points(np.zeros((0, space.points.shape[1]))), DiscreteMeasure.empty()
    uniq, inv = np.unique(pos, axis=0, return_inverse=True)
    weights = np.bincount(inv.reshape(-1), weights=w, minlength=len(uniq))
    return GroundSpace.from_points(uniq), DiscreteMeasure(np.arange(len(uniq)), weights)


def hk_between(space_a: GroundSpace, mu_a: DiscreteMeasure, space_b: GroundSpace,
               mu_b: DiscreteMeasure, opts: Optional[ETOptions] = None) -> DistanceResult:
    """HK distance between measures on two Euclidean point sets."""
    union = space_a.union(space_b)
    shift = len(space_a)
    return hk_distance(mu_a, DiscreteMeasure(mu_b.support + shift, mu_b.weights), union, opts)


# ----------------------------------------------------------------------
# scaling limits


@dataclass(frozen=True, eq=False)
class ScalingTable:
    """Rows ``(λ, HK_{λd}, λ HK_{d/λ})`` with monotonicity flags."""

    factors: np.ndarray
    hk_scaled: np.ndarray
    lam_hk: np.ndarray
    gaps: np.ndarray
    hellinger: float
    wasserstein: float
    hellinger_monotone: bool
    wasserstein_monotone: bool

    def rows(self) -> list[tuple[float, float, float]]:
        return [(float(a), float(b), float(c))
                for a, b, c in zip(self.factors, self.hk_scaled, self.lam_hk)]


def scaling_limits(mu1: DiscreteMeasure, mu2: DiscreteMeasure, space: GroundSpace,
                   factors: Sequence[float], opts: Optional[ETOptions] = None,
                   slack: Optional[float] = None) -> ScalingTable:
    """Tabulate ``HK_{λd}`` (towards Hellinger) and ``λ HK_{d/λ}`` (towards W).

    Monotonicity is judged with ``slack`` per step, by default three times
    the gap tolerance times ``1 + m1 + m2``.
    """
    lam = np.asarray(sorted(float(f) for f in factors))
    if np.any(lam <= 0):
        raise ValueError("factors must be positive")
    if slack is None:
        slack = 3e-6 * (1.0 + mu1.mass + mu2.mass)
    hs, ws, gaps = [], [], []
    for f in lam:
        a = hk_distance(mu1, mu2, space.scaled(f), opts)
        b = hk_distance(mu1, mu2, space.scaled(1.0 / f), opts)
        hs.append(a.value)
        ws.append(f * b.value)
        gaps.append(max(a.gap, b.gap))
    hs, ws = np.array(hs), np.array(ws)
    w = wasserstein(mu1, mu2, space, 2.0, opts=opts).value
    return ScalingTable(lam, hs, ws, np.array(gaps), hellinger(mu1, mu2), w,
                        bool(np.all(np.diff(hs) >= -slack)),
                        bool(np.all(np.diff(ws) >= -slack)))
