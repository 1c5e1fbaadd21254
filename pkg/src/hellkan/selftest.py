"""Acceptance suite shared by the test-suite and ``hellkan selftest``.

Each criterion draws its random instances from a generator seeded by the
suite seed and the criterion number, so a report is reproducible bit for
bit.  Oracles used here are independent of the solver: one-dimensional
θ-minimization for two Diracs, exhaustive assignment for Wasserstein and
closed forms for the Hopf-Lax semigroup on constants.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .entropies import EntropyFunction
from .geometry import HALF_PI, CostMatrix, GroundSpace, log_cost
from .hk import (BL_CONSTANT, bl_distance, geodesic_interp, ghk_distance, hellinger,
                 hk_between, hk_distance, lift_plan, scaling_limits, wasserstein)
from .hopflax import (XI_FLOOR, hj_residual, hk_dual_lower_bound, hopflax_apply,
                      hopflax_field, xi_from_potentials)
from .solver import (DiscreteMeasure, ETProblem, check_optimality, homogeneous_value,
                     primal_value, reverse_value, solve_et)

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all", "format_table",
           "two_dirac_oracle", "assignment_oracle"]

GAP_TOL = 1e-6


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d}. {self.title}: {self.detail} ({self.seconds:.1f}s)"


def _rng(seed: int, number: int) -> np.random.Generator:
    return np.random.default_rng([seed, number])


def _random_measure(rng, support, total) -> DiscreteMeasure:
    w = rng.uniform(0.05, 1.0, len(support))
    return DiscreteMeasure(np.asarray(support, dtype=np.int64), w * (total / w.sum()))


def _random_pair(rng, nmax: int, dim: int = 1, width: float = 2.0, masses=(0.0, 2.0)):
    n, m = int(rng.integers(1, nmax + 1)), int(rng.integers(1, nmax + 1))
    space = GroundSpace.from_points(rng.uniform(0.0, width, (n + m, dim)))
    mu1 = _random_measure(rng, np.arange(n), rng.uniform(*masses))
    mu2 = _random_measure(rng, np.arange(n, n + m), rng.uniform(*masses))
    return space, mu1, mu2


# ----------------------------------------------------------------------
# oracles


def two_dirac_oracle(a: float, b: float, d: float) -> float:
    """``min_θ a U(θ/a) + b U(θ/b) + θ ℓ(d)`` for ``U(s) = s log s - s + 1``.

    Dense logarithmic grid followed by Newton steps on the stationarity
    equation ``log(θ/a) + log(θ/b) + ℓ(d) = 0``.
    """
    ell = float(log_cost(d))
    if not math.isfinite(ell) or a == 0 or b == 0:
        return a + b

    def f(th):
        return a * ((th / a) * np.log(th / a) - th / a + 1) \
            + b * ((th / b) * np.log(th / b) - th / b + 1) + th * ell

    grid = np.geomspace(1e-14 * (a + b), 10 * (a + b), 4001)
    th = float(grid[np.argmin(f(grid))])
    for _ in range(60):
        g = math.log(th / a) + math.log(th / b) + ell
        step = g * th / 2.0
        th = max(th - step, th / 10)
        if abs(step) <= 1e-16 * th:
            break
    return float(min(f(th), a + b))


def assignment_oracle(x: np.ndarray, y: np.ndarray, power: float = 2.0) -> float:
    """``W_p`` between uniform measures with equally many atoms, by enumeration."""
    n = len(x)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        c = sum(np.linalg.norm(x[i] - y[perm[i]]) ** power for i in range(n)) / n
        best = min(best, c)
    return best ** (1.0 / power)


# ----------------------------------------------------------------------
# criteria


def crit_two_dirac(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 1)
    worst, worst_oracle = 0.0, 0.0
    for k in range(50):
        a, b = rng.uniform(0.05, 3.0, 2)
        d = rng.uniform(0.0, HALF_PI) if k % 2 == 0 else rng.uniform(HALF_PI, 3.0)
        space = GroundSpace.from_points([[0.0], [d]])
        sol = solve_et(ETProblem.let(DiscreteMeasure([0], [a]), DiscreteMeasure([1], [b]), space))
        ref = a + b - 2 * math.sqrt(a * b) * math.cos(d) if d < HALF_PI else a + b
        worst = max(worst, abs(sol.primal - ref) / (a + b))
        worst_oracle = max(worst_oracle, abs(two_dirac_oracle(a, b, d) - ref) / (a + b))
    ok = worst <= 1e-6 and worst_oracle <= 1e-6
    return ok, f"max rel err {worst:.2e} (oracle vs closed form {worst_oracle:.2e})"


@lru_cache(maxsize=4)
def _let_batch(seed: int):
    rng = _rng(seed, 2)
    out = []
    for _ in range(100):
        space, mu1, mu2 = _random_pair(rng, 50, dim=2, width=2.0)
        prob = ETProblem.let(mu1, mu2, space)
        out.append((prob, solve_et(prob)))
    return tuple(out)


def crit_duality(seed: int) -> tuple[bool, str]:
    worst, bad = 0.0, 0
    for prob, sol in _let_batch(seed):
        scale = 1 + prob.mu1.mass + prob.mu2.mass
        worst = max(worst, sol.gap / scale)
        bad += (not sol.converged) or sol.gap > GAP_TOL * scale
    return bad == 0, f"max gap/(1+m1+m2) {worst:.2e}, {bad} failures"


def crit_formulations(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 3)
    rev, hom, bad = 0.0, 0.0, 0
    for prob, sol in _let_batch(seed):
        scale = 1 + prob.mu1.mass + prob.mu2.mass
        plans = [sol.plan]
        # a feasible perturbed plan exercises the identity away from optima
        finite = np.isfinite(prob.cost_matrix)
        plans.append(sol.plan * rng.uniform(0.5, 1.5, sol.plan.shape) * finite)
        for plan in plans:
            e = abs(primal_value(plan, prob) - reverse_value(plan, prob))
            rev = max(rev, e)
            bad += e > 1e-10
        h = abs(sol.primal - homogeneous_value(sol.plan, prob))
        hom = max(hom, h / max(sol.gap, 1e-300))
        # rounding floor below which the gap cannot be resolved
        bad += h > 10 * sol.gap + 1e-12 * scale
    return bad == 0, f"|E-R| max {rev:.1e}, |E-H|/gap max {hom:.2g}, {bad} failures"


def crit_optimality(seed: int) -> tuple[bool, str]:
    on, off, bad = 0.0, 0.0, 0
    for prob, sol in _let_batch(seed):
        rep = check_optimality(sol, prob, tol=1e-5)
        on, off = max(on, rep.on_support), min(off, rep.off_support)
        bad += not rep.ok
    return bad == 0, f"on-support max {on:.1e}, off-support min {off:.1e}"


def crit_metric(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 5)
    worst, bad = -math.inf, 0
    for _ in range(200):
        k = int(rng.integers(2, 6))
        space = GroundSpace.from_points(rng.uniform(0.0, 2.5, (k, 1)))
        mus = [_random_measure(rng, np.sort(rng.choice(k, int(rng.integers(1, k + 1)), replace=False)),
                               rng.uniform(0.1, 2.0)) for _ in range(3)]
        for dist in (hk_distance, ghk_distance):
            r = [dist(mus[i], mus[j], space) for i, j in ((0, 1), (1, 2), (0, 2))]
            v = [x.value for x in r]
            for a, b, c in ((0, 1, 2), (1, 2, 0), (0, 2, 1)):
                excess = v[c] - v[a] - v[b]
                worst = max(worst, excess)
                bad += excess > 1e-6
    sym_bad, self_worst = 0, 0.0
    for _ in range(20):
        space, mu1, mu2 = _random_pair(rng, 5)
        for dist in (hk_distance, ghk_distance):
            sym_bad += dist(mu1, mu2, space).value != dist(mu2, mu1, space).value
        self_worst = max(self_worst, hk_distance(mu1, mu1, space).value)
    ok = bad == 0 and sym_bad == 0 and self_worst <= 1e-7
    return ok, (f"triangle excess max {worst:.1e}, asymmetric pairs {sym_bad}, "
                f"max HK(mu,mu) {self_worst:.1e}")


def crit_order(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 6)
    worst, bad = -math.inf, 0
    for _ in range(50):
        space, mu1, mu2 = _random_pair(rng, 6, width=3.0, masses=(0.2, 2.0))
        mu2 = DiscreteMeasure(mu2.support, mu2.weights * (mu1.mass / mu2.mass))
        hk = hk_distance(mu1, mu2, space).value
        chain = [ghk_distance(mu1, mu2, space).value, hk]
        trunc = wasserstein(mu1, mu2, space, truncation=HALF_PI).value
        full = wasserstein(mu1, mu2, space).value
        pairs = [(chain[0], hk), (hk, hellinger(mu1, mu2)), (hk, trunc), (trunc, full)]
        for lo, hi in pairs:
            worst = max(worst, lo - hi)
            bad += lo > hi + 1e-6
    return bad == 0, f"max violation {worst:.1e} over GHK<=HK<=Hell, HK<=W_trunc<=W"


def crit_limits(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 7)
    factors = [1, 2, 4, 8, 16, 32, 64]
    notes, ok = [], True
    for n in (2, 3, 5, 8):
        grid = np.arange(0.0, 2.0001, 0.05)
        pts = rng.choice(grid, 2 * n, replace=False)
        space = GroundSpace.from_points(pts[:, None])
        mu1 = DiscreteMeasure(np.arange(n), np.full(n, 1.0 / n))
        mu2 = DiscreteMeasure(np.arange(n, 2 * n), np.full(n, 1.0 / n))
        tab = scaling_limits(mu1, mu2, space, factors)
        w_oracle = assignment_oracle(pts[:n, None], pts[n:, None])
        e_h = abs(tab.hk_scaled[-1] - tab.hellinger)
        e_w = abs(tab.lam_hk[-1] - w_oracle)
        e_solver = abs(tab.wasserstein - w_oracle)
        good = (tab.hellinger_monotone and tab.wasserstein_monotone and e_h <= 1e-4
                and e_w <= 1e-3 and e_solver <= 1e-6)
        ok &= good
        notes.append(f"n={n}: |Hell|={e_h:.0e} |W|={e_w:.0e}")
    return ok, "; ".join(notes)


def crit_bl(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 8)
    worst, bad = -math.inf, 0
    for _ in range(50):
        space, mu1, mu2 = _random_pair(rng, 6, width=3.0)
        bl = bl_distance(mu1, mu2, space)
        bound = BL_CONSTANT * math.sqrt(mu1.mass + mu2.mass) * hk_distance(mu1, mu2, space).value
        worst = max(worst, bl - bound)
        bad += bl > bound + 1e-6
    space = GroundSpace.from_points([[0.0], [1.0]])
    two_thirds = bl_distance(DiscreteMeasure([0], [1.0]), DiscreteMeasure([1], [1.0]), space)
    err = abs(two_thirds - 2.0 / 3.0)
    return bad == 0 and err <= 1e-6, f"max BL - bound {worst:.2f}, |BL(d0,d1) - 2/3| {err:.1e}"


def crit_monotone(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 9)
    bad = 0
    for _ in range(50):
        space, mu1, mu2 = _random_pair(rng, 10, width=3.0, masses=(0.2, 2.0))
        prob = ETProblem.let(mu1, mu2, space)
        rep = check_optimality(solve_et(prob), prob, support_threshold=1e-12)
        bad += not rep.monotone
    return bad == 0, f"{bad} non-monotone supports out of 50"


def crit_geodesic(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 10)
    times = (0.0, 0.25, 0.5, 0.75, 1.0)
    worst = 0.0
    for _ in range(20):
        space, mu1, mu2 = _random_pair(rng, 4, dim=2, width=1.5, masses=(0.2, 2.0))
        res = hk_distance(mu1, mu2, space)
        lifted = lift_plan(res.solution, res.problem)
        frames = [geodesic_interp(lifted, t, space) for t in times]
        for (i, s), (j, t) in itertools.combinations(enumerate(times), 2):
            d = hk_between(frames[i][0], frames[i][1], frames[j][0], frames[j][1]).value
            worst = max(worst, abs(d - (t - s) * res.value))
    growth_ok = True
    space = GroundSpace.from_points([[0.0], [1.0]])
    mu = DiscreteMeasure([0, 1], [0.7, 1.3])
    res = hk_distance(mu, DiscreteMeasure.empty(), space)
    lifted = lift_plan(res.solution, res.problem)
    for t in (0.0, 0.1, 0.3, 0.5, 0.9, 1.0):
        sp, m = geodesic_interp(lifted, t, space)
        expect = mu.weights * (1 - t) ** 2
        got = np.zeros(2)
        for idx, w in zip(m.support, m.weights):
            got[int(round(sp.points[idx, 0]))] = w
        growth_ok &= bool(np.array_equal(got, expect * (expect > 0)))
    ok = worst <= 1e-4 and growth_ok
    return ok, f"max speed defect {worst:.1e}, pure growth exact: {growth_ok}"


def crit_hopflax(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 11)
    space = GroundSpace.from_points(rng.uniform(0, 3, (6, 1)))
    const_err = 0.0
    for _ in range(200):
        xi, t = rng.uniform(-0.49, 3.0), rng.uniform(0.0, 1.0)
        p = hopflax_apply(np.full(6, xi), t, space)
        const_err = max(const_err, float(np.max(np.abs(p - xi / (1 + 2 * t * xi)))))
    tight, excess = 0.0, -math.inf
    for _ in range(20):
        space, mu1, mu2 = _random_pair(rng, 5, width=2.0, masses=(0.2, 2.0))
        res = hk_distance(mu1, mu2, space)
        hk2 = res.value**2
        xi = xi_from_potentials(res.solution, res.problem)
        tight = max(tight, abs(hk_dual_lower_bound(mu1, mu2, xi, space) - hk2))
        for _ in range(10):
            xi = rng.uniform(XI_FLOOR, 1.5, len(space))
            xi[rng.random(len(space)) < 0.2] = np.inf
            excess = max(excess, hk_dual_lower_bound(mu1, mu2, xi, space) - hk2)
    res_max = []
    for h in (2e-3, 1e-3):
        x = np.arange(0.0, 2 * math.pi, h)
        grid = GroundSpace.from_points(x[:, None])
        field = hopflax_field(0.1 * np.cos(x), [0.5, 0.5 + h], grid)
        res_max.append(max(float(np.max(hj_residual(field, grid))), 0.0))
    ratio = res_max[0] / max(res_max[1], 1e-300)
    c_const = res_max[1] / 2e-3
    ok = (const_err <= 1e-12 and tight <= 1e-5 and excess <= 1e-6
          and res_max[1] <= 0.01 and ratio >= 1.6)
    return ok, (f"constant {const_err:.0e}, bound gap {tight:.0e}, random excess {excess:.1e}, "
                f"residual {res_max[1]:.1e} = {c_const:.3f}(h+tau), halving ratio {ratio:.2f}")


def _grid_measure(rng, k, nmax, h):
    idx = np.sort(rng.choice(k, int(rng.integers(1, nmax + 1)), replace=False))
    return idx * h, rng.uniform(0.1, 1.0, len(idx))


def _convolve(x, w, y, v):
    pos = (x[:, None] + y[None, :]).ravel()
    return pos, (w[:, None] * v[None, :]).ravel()


def _hk_positions(x1, w1, x2, w2) -> float:
    pts, inv = np.unique(np.round(np.concatenate([x1, x2]), 12), return_inverse=True)
    space = GroundSpace.from_points(pts[:, None])
    n = len(pts)
    a = np.bincount(inv[:len(x1)], weights=w1, minlength=n)
    b = np.bincount(inv[len(x1):], weights=w2, minlength=n)
    return hk_distance(DiscreteMeasure.from_dense(a), DiscreteMeasure.from_dense(b), space).value


def crit_curvature(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 12)
    h = 0.1
    conv_worst, bad = -math.inf, 0
    for _ in range(50):
        x1, w1 = _grid_measure(rng, 20, 4, h)
        x2, w2 = _grid_measure(rng, 20, 4, h)
        y, v = _grid_measure(rng, 8, 3, h)
        v = v * (rng.uniform(0.2, 2.0) / v.sum())
        lhs = _hk_positions(*_convolve(x1, w1, y, v), *_convolve(x2, w2, y, v)) ** 2
        rhs = v.sum() * _hk_positions(x1, w1, x2, w2) ** 2
        conv_worst = max(conv_worst, lhs - rhs)
        bad += lhs > rhs + 1e-6
    pc_worst = -math.inf
    for _ in range(50):
        ms = [_grid_measure(rng, 20, 3, h) for _ in range(4)]
        lam = rng.uniform(0.1, 1.0, 3)
        d2 = np.zeros((4, 4))
        for i, j in itertools.combinations(range(4), 2):
            d2[i, j] = d2[j, i] = _hk_positions(*ms[i], *ms[j]) ** 2
        lhs = sum(lam[i] * lam[j] * d2[i + 1, j + 1] for i in range(3) for j in range(3))
        rhs = 2 * sum(lam[i] * lam[j] * d2[0, j + 1] for i in range(3) for j in range(3))
        pc_worst = max(pc_worst, lhs - rhs)
        bad += lhs > rhs + 1e-6
    return bad == 0, f"convolution excess max {conv_worst:.1e}, PC excess max {pc_worst:.1e}"


def crit_scaling(seed: int) -> tuple[bool, str]:
    rng = _rng(seed, 13)
    families = [
        (EntropyFunction.log(), "log"),
        (EntropyFunction.power(2.0), "sqdist"),
        (EntropyFunction.tv(), "sqdist"),
    ]
    hom, sub, bad = -math.inf, -math.inf, 0
    for k in range(50):
        e, kind = families[k % len(families)]
        space, mu1, mu2 = _random_pair(rng, 5, width=2.0, masses=(0.2, 2.0))
        cost = CostMatrix.log(space) if kind == "log" else CostMatrix.sqdist(space)

        def et(a, b):
            return solve_et(ETProblem(e, e, cost, a, b, space)).primal

        base = et(mu1, mu2)
        scale = 1 + mu1.mass + mu2.mass
        for lam in (0.5, 2.0, 10.0):
            err = abs(et(mu1.scaled(lam), mu2.scaled(lam)) - lam * base)
            hom = max(hom, err / (lam * scale))
            bad += err > 2e-6 * lam * scale
        nu1 = _random_measure(rng, mu1.support, rng.uniform(0.2, 2.0))
        nu2 = _random_measure(rng, mu2.support, rng.uniform(0.2, 2.0))
        excess = et(mu1 + nu1, mu2 + nu2) - base - et(nu1, nu2)
        sub = max(sub, excess)
        bad += excess > 3e-6
    return bad == 0, f"homogeneity max {hom:.1e}, subadditivity excess max {sub:.1e}"


CRITERIA: Sequence[tuple[int, str, Callable[[int], tuple[bool, str]]]] = (
    (1, "two-Dirac closed form", crit_two_dirac),
    (2, "strong duality", crit_duality),
    (3, "formulation equality", crit_formulations),
    (4, "optimality conditions", crit_optimality),
    (5, "metric axioms", crit_metric),
    (6, "order relations", crit_order),
    (7, "monotone limits", crit_limits),
    (8, "BL comparison", crit_bl),
    (9, "1-D monotone support", crit_monotone),
    (10, "geodesics", crit_geodesic),
    (11, "Hopf-Lax", crit_hopflax),
    (12, "contraction and curvature", crit_curvature),
    (13, "scaling and subadditivity", crit_scaling),
)


def run_criterion(number: int, seed: int = 0) -> CriterionResult:
    for num, title, fn in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            try:
                ok, detail = fn(seed)
            except Exception as exc:  # a crash is a failure, not an abort
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            return CriterionResult(num, title, bool(ok), detail, time.perf_counter() - t0)
    raise KeyError(f"no criterion {number}")


def run_all(seed: int = 0, only: Optional[Sequence[int]] = None,
            echo: Optional[Callable[[str], None]] = None) -> list[CriterionResult]:
    """Run the selected criteria in order, optionally echoing each line."""
    out = []
    for num, _, _ in CRITERIA:
        if only and num not in only:
            continue
        r = run_criterion(num, seed)
        if echo is not None:
            echo(r.line())
        out.append(r)
    return out


def format_table(results: Sequence[CriterionResult]) -> str:
    lines = [r.line() for r in results]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} criteria passed")
    return "\n".join(lines)
