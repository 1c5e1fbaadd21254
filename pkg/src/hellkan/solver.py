"""Discrete Entropy-Transport problems.

The solver works with the dual potentials ``φ1, φ2`` subject to
``φ1 ⊕ φ2 <= c`` and maximizes ``Σ μ1 F1°(φ1) + Σ μ2 F2°(φ2)``.  An
entropic penalty ``-ε Σ exp((φ1 ⊕ φ2 - c)/ε)`` turns this into a smooth
concave problem that is annealed towards ``ε -> 0``.  Block updates give a
robust start at each ``ε``; a damped Newton method on the regularized dual
then reaches the tiny final ``ε`` quickly.  Exact values are obtained from
the entropic plan (primal) and from c-transformed potentials (dual), so
the reported gap is a certificate, not an estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .entropies import INDICATOR, INTERVAL, POWER, TV, EntropyFunction, mul0
from .geometry import CostMatrix, GroundSpace

__all__ = [
    "DiscreteMeasure", "ETProblem", "ETOptions", "DualPotentials", "ETSolution",
    "InfeasibleProblemError", "InfeasiblePotentialsError", "OptimalityReport",
    "primal_value", "dual_value", "reverse_value", "homogeneous_value",
    "generalized_ctransform", "solve_et", "check_optimality", "feasibility",
]


class InfeasibleProblemError(ValueError):
    """The Entropy-Transport problem has no plan of finite cost."""


class InfeasiblePotentialsError(ValueError):
    """Dual potentials violate ``R1*(ψ1) + R2*(ψ2) <= c``."""

    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


# ----------------------------------------------------------------------
# data


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite nonnegative measure on point indices of a ground space."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=np.int64).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if s.shape != w.shape:
            raise ValueError("support and weights differ in length")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(s < 0) or len(np.unique(s)) != len(s):
            raise ValueError("support indices must be distinct and nonnegative")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_dense(cls, weights) -> "DiscreteMeasure":
        """Measure on ``0..n-1`` with the given weights (zeros kept)."""
        w = np.asarray(weights, dtype=float).reshape(-1)
        return cls(np.arange(len(w)), w)

    @classmethod
    def empty(cls) -> "DiscreteMeasure":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0))

    def __len__(self):
        return len(self.support)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.support] = self.weights
        return out

    def scaled(self, lam: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.support, lam * self.weights)

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        n = int(max(self.support.max(initial=-1), other.support.max(initial=-1))) + 1
        w = self.dense(n) + other.dense(n)
        idx = np.union1d(self.support, other.support)
        return DiscreteMeasure(idx, w[idx])

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteMeasure":
        return cls(np.asarray(d["support"], dtype=np.int64), d["weights"])


@dataclass(frozen=True, eq=False)
class ETProblem:
    """Entropy-Transport instance.

    ``cost`` is indexed by point indices: row ``x`` of ``mu1.support`` and
    column ``y`` of ``mu2.support`` give ``c(x, y)``.  ``space`` is optional
    and only used for geometric checks.
    """

    entropy1: EntropyFunction
    entropy2: EntropyFunction
    cost: CostMatrix
    mu1: DiscreteMeasure
    mu2: DiscreteMeasure
    space: Optional[GroundSpace] = None

    def __post_init__(self):
        n, m = self.cost.shape
        if len(self.mu1) and self.mu1.support.max() >= n:
            raise ValueError("mu1 support exceeds the cost rows")
        if len(self.mu2) and self.mu2.support.max() >= m:
            raise ValueError("mu2 support exceeds the cost columns")

    @classmethod
    def let(cls, mu1: DiscreteMeasure, mu2: DiscreteMeasure,
            space: GroundSpace) -> "ETProblem":
        """Logarithmic Entropy-Transport instance with cost ``ℓ(d)``."""
        e = EntropyFunction.log()
        return cls(e, e, CostMatrix.log(space), mu1, mu2, space)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.mu1), len(self.mu2)

    @property
    def cost_matrix(self) -> np.ndarray:
        """Costs restricted to the two supports, shape ``(n, m)``."""
        return self.cost.values[np.ix_(self.mu1.support, self.mu2.support)]

    def scaled(self, lam: float) -> "ETProblem":
        return ETProblem(self.entropy1, self.entropy2, self.cost,
                         self.mu1.scaled(lam), self.mu2.scaled(lam), self.space)


def feasibility(problem: ETProblem, rtol: float = 1e-12) -> tuple[bool, str]:
    """Check that ``(m1 dom F1) ∩ (m2 dom F2)`` is nonempty.

    Closed ends of the scaled domains are widened by ``rtol``.  Returns
    ``(ok, diagnosis)``.
    """
    m1, m2 = problem.mu1.mass, problem.mu2.mass
    lo1, hi1, lc1, hc1 = problem.entropy1.domain()
    lo2, hi2, lc2, hc2 = problem.entropy2.domain()

    def scaled(m, lo, hi, lc, hc):
        if m == 0:
            return 0.0, 0.0, True, True
        # closed ends get a relative slack so balanced masses may differ by rounding
        return (m * lo * (1 - rtol if lc else 1), m * hi * (1 + rtol if hc else 1), lc, hc)

    a1, b1, la1, hb1 = scaled(m1, lo1, hi1, lc1, hc1)
    a2, b2, la2, hb2 = scaled(m2, lo2, hi2, lc2, hc2)
    lo, lo_closed = max(a1, a2), (la1 if a1 > a2 else la2 if a2 > a1 else la1 and la2)
    hi, hi_closed = min(b1, b2), (hb1 if b1 < b2 else hb2 if b2 < b1 else hb1 and hb2)
    ok = lo < hi or (lo == hi and lo_closed and hi_closed)
    if ok and lo == 0 and not lo_closed and hi == 0:
        ok = False
    diag = ("feasible" if ok else
            f"empty intersection of mass ranges: m1*dom F1 = [{a1}, {b1}], "
            f"m2*dom F2 = [{a2}, {b2}]")
    return bool(ok), diag


@dataclass(frozen=True)
class ETOptions:
    """Solver controls.

    Parameters
    ----------
    epsilon_schedule
        Annealing levels for the entropic penalty.
    final_epsilon
        Newton continuation continues by factors of ten down to this level.
    max_iters
        Budget for block sweeps plus Newton steps.
    gap_tol
        Convergence is declared when ``gap <= gap_tol * (1 + m1 + m2)``.
    init
        ``"zero"`` or ``"random"`` starting potentials.
    """

    epsilon_schedule: Sequence[float] = (1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4)
    final_epsilon: float = 1e-9
    max_iters: int = 20_000
    gap_tol: float = 1e-6
    sweeps_per_eps: int = 3
    newton_iters: int = 60
    polish_steps: int = 200
    marginal_rtol: float = 1e-9
    init: str = "zero"
    seed: int = 0

    def epsilons(self) -> list[float]:
        eps = [float(e) for e in self.epsilon_schedule]
        e = min(eps) if eps else 1.0
        while e / 10 >= self.final_epsilon * (1 - 1e-9):
            e /= 10
            eps.append(e)
        return eps


@dataclass(frozen=True, eq=False)
class DualPotentials:
    """Potentials ``ψ_i <= F_i(0)``; ``φ_i = R_i*(ψ_i)``."""

    psi1: np.ndarray
    psi2: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray

    @classmethod
    def from_psi(cls, psi1, psi2, problem: ETProblem) -> "DualPotentials":
        psi1 = np.asarray(psi1, dtype=float)
        psi2 = np.asarray(psi2, dtype=float)
        return cls(psi1, psi2, np.asarray(problem.entropy1.rstar(psi1), dtype=float),
                   np.asarray(problem.entropy2.rstar(psi2), dtype=float))

    @classmethod
    def from_phi(cls, phi1, phi2, problem: ETProblem) -> "DualPotentials":
        phi1 = np.asarray(phi1, dtype=float)
        phi2 = np.asarray(phi2, dtype=float)
        return cls(np.asarray(problem.entropy1.conj_circ(phi1), dtype=float),
                   np.asarray(problem.entropy2.conj_circ(phi2), dtype=float), phi1, phi2)


@dataclass(frozen=True, eq=False)
class ETSolution:
    """Plan, certified potentials and values of a solved instance."""

    plan: np.ndarray
    potentials: DualPotentials
    primal: float
    dual: float
    gap: float
    status: str
    mu1: np.ndarray
    mu2: np.ndarray
    epsilon: float = 0.0
    iterations: int = 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def value(self) -> float:
        return self.primal

    @property
    def marginal1(self) -> np.ndarray:
        return self.plan.sum(axis=1)

    @property
    def marginal2(self) -> np.ndarray:
        return self.plan.sum(axis=0)

    @property
    def sigma1(self) -> np.ndarray:
        """``dγ1/dμ1`` on ``supp μ1``; ``nan`` elsewhere."""
        return _ratio(self.marginal1, self.mu1)

    @property
    def sigma2(self) -> np.ndarray:
        return _ratio(self.marginal2, self.mu2)

    @property
    def rho1(self) -> np.ndarray:
        """``dμ1/dγ1`` on ``supp γ1``; ``nan`` elsewhere."""
        return _ratio(self.mu1, self.marginal1)

    @property
    def rho2(self) -> np.ndarray:
        return _ratio(self.mu2, self.marginal2)

    @property
    def singular1(self) -> np.ndarray:
        """Part of ``μ1`` not seen by ``γ1``."""
        return np.where(self.marginal1 > 0, 0.0, self.mu1)

    @property
    def singular2(self) -> np.ndarray:
        return np.where(self.marginal2 > 0, 0.0, self.mu2)

    def triplets(self, threshold: float = 0.0) -> list[tuple[int, int, float]]:
        i, j = np.nonzero(self.plan > threshold)
        return [(int(a), int(b), float(self.plan[a, b])) for a, b in zip(i, j)]


def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


# ----------------------------------------------------------------------
# functionals


def _check_plan(plan, problem: ETProblem) -> np.ndarray:
    plan = np.asarray(plan.toarray() if hasattr(plan, "toarray") else plan, dtype=float)
    if plan.shape != problem.shape:
        raise ValueError(f"plan shape {plan.shape} does not match {problem.shape}")
    if np.any(plan < 0) or np.any(~np.isfinite(plan)):
        raise ValueError("plan entries must be finite and nonnegative")
    return plan


def _snap(e: EntropyFunction, s: np.ndarray, rtol: float) -> np.ndarray:
    """Move densities within ``rtol`` of a closed domain end onto it."""
    lo, hi, lo_closed, hi_closed = e.domain()
    if rtol <= 0:
        return s
    if lo > 0 and lo_closed:
        s = np.where((s < lo) & (s >= lo * (1 - rtol)), lo, s)
    if np.isfinite(hi) and hi_closed:
        s = np.where((s > hi) & (s <= hi * (1 + rtol)), hi, s)
    return s


def _entropy_part(e: EntropyFunction, mu: np.ndarray, marg: np.ndarray, rtol: float) -> float:
    pos = mu > 0
    s = _snap(e, marg[pos] / mu[pos], rtol)
    val = float(np.sum(mu[pos] * np.asarray(e(s), dtype=float)))
    singular = float(np.sum(marg[~pos]))
    return val + float(mul0(e.recession, singular))


def _transport_part(plan: np.ndarray, cost: np.ndarray) -> float:
    charged = plan > 0
    if np.any(np.isinf(cost[charged])):
        return math.inf
    return float(np.sum(plan[charged] * cost[charged]))


def primal_value(plan, problem: ETProblem, marginal_rtol: float = 0.0) -> float:
    """``Σ μ_i F_i(σ_i) + F_i∞ γ_i⊥(X) + Σ c γ`` with ``0·∞ = 0``.

    ``marginal_rtol`` lets densities within that relative distance of a
    closed domain end count as on it; it is useful for indicator entropies
    where exact equality of floating point marginals is out of reach.
    """
    plan = _check_plan(plan, problem)
    mu1, mu2 = problem.mu1.weights, problem.mu2.weights
    return (_entropy_part(problem.entropy1, mu1, plan.sum(1), marginal_rtol)
            + _entropy_part(problem.entropy2, mu2, plan.sum(0), marginal_rtol)
            + _transport_part(plan, problem.cost_matrix))


def _reverse_part(e: EntropyFunction, mu: np.ndarray, marg: np.ndarray, rtol: float) -> float:
    r = e.reverse()
    pos = marg > 0
    rho = mu[pos] / marg[pos]
    if rtol > 0:
        rho = 1.0 / _snap(e, 1.0 / np.where(rho > 0, rho, np.inf), rtol)
        rho = np.where(np.isnan(rho), 0.0, rho)
    val = float(np.sum(marg[pos] * np.asarray(r(rho), dtype=float)))
    singular = float(np.sum(mu[~pos]))
    return val + float(mul0(e.f_at_zero, singular))


def reverse_value(plan, problem: ETProblem, marginal_rtol: float = 0.0) -> float:
    """``Σ ∫ [R1(ϱ1) + R2(ϱ2) + c] dγ + Σ F_i(0) μ_i⊥(X)``."""
    plan = _check_plan(plan, problem)
    mu1, mu2 = problem.mu1.weights, problem.mu2.weights
    return (_reverse_part(problem.entropy1, mu1, plan.sum(1), marginal_rtol)
            + _reverse_part(problem.entropy2, mu2, plan.sum(0), marginal_rtol)
            + _transport_part(plan, problem.cost_matrix))


def homogeneous_value(plan, problem: ETProblem) -> float:
    """``∫ H_c(ϱ1, ϱ2) dγ + Σ F_i(0) μ_i⊥(X)`` via the marginal perspective."""
    from .perspective import perspective, perspective_log_array

    plan = _check_plan(plan, problem)
    mu1, mu2 = problem.mu1.weights, problem.mu2.weights
    g1, g2 = plan.sum(1), plan.sum(0)
    e1, e2 = problem.entropy1, problem.entropy2
    total = float(mul0(e1.f_at_zero, np.sum(mu1[g1 <= 0])))
    total += float(mul0(e2.f_at_zero, np.sum(mu2[g2 <= 0])))
    i, j = np.nonzero(plan > 0)
    if len(i) == 0:
        return total
    rho1 = mu1[i] / g1[i]
    rho2 = mu2[j] / g2[j]
    c = problem.cost_matrix[i, j]
    w = plan[i, j]
    if np.any(np.isinf(c)):
        return math.inf
    if e1.is_log and e2.is_log:
        h = perspective_log_array(rho1, rho2, c)
    else:
        h = np.array([perspective(e1, e2, a, b, cc).value for a, b, cc in zip(rho1, rho2, c)])
    return total + float(np.sum(w * h))


def _check_potentials(problem: ETProblem, phi1, phi2, tol: float):
    cost = problem.cost_matrix
    with np.errstate(invalid="ignore"):
        s = phi1[:, None] + phi2[None, :]
        excess = s - cost
    excess = np.where(np.isnan(excess) | np.isinf(cost), -np.inf, excess)
    if excess.size and np.max(excess) > tol * (1 + np.max(np.abs(np.where(np.isfinite(cost), cost, 0)))):
        i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
        raise InfeasiblePotentialsError(
            f"R1*(psi1) + R2*(psi2) exceeds c by {excess[i, j]:.3g} at ({i}, {j})",
            (int(i), int(j)))


def dual_value(potentials: DualPotentials, problem: ETProblem, tol: float = 1e-9) -> float:
    """``Σ μ1 ψ1 + Σ μ2 ψ2`` after checking feasibility of the pair."""
    e1, e2 = problem.entropy1, problem.entropy2
    if np.any(potentials.psi1 > e1.f_at_zero) or np.any(potentials.psi2 > e2.f_at_zero):
        raise InfeasiblePotentialsError("psi exceeds F(0)")
    _check_potentials(problem, potentials.phi1, potentials.phi2, tol)
    return float(np.sum(mul0(problem.mu1.weights, potentials.psi1))
                 + np.sum(mul0(problem.mu2.weights, potentials.psi2)))


def _ctransform_phi(phi_other: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """``min_y [c(x, y) - φ_other(y)]`` over finite entries; ``+inf`` if none."""
    with np.errstate(invalid="ignore"):
        diff = cost - phi_other[None, :]
    diff = np.where(np.isnan(diff) | np.isinf(cost), np.inf, diff)
    if diff.shape[1] == 0:
        return np.full(diff.shape[0], np.inf)
    return diff.min(axis=1)


def generalized_ctransform(psi_other, problem: ETProblem, side: int) -> np.ndarray:
    """Largest feasible ``ψ_side`` given ``ψ_other``.

    ``ψ_side(x) = F_side°(min_y [c(x, y) - R_other*(ψ_other(y))])``, which is
    ``F_side(0)`` on points whose costs are all infinite.
    """
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    psi_other = np.asarray(psi_other, dtype=float)
    cost = problem.cost_matrix if side == 1 else problem.cost_matrix.T
    e_side = problem.entropy1 if side == 1 else problem.entropy2
    e_other = problem.entropy2 if side == 1 else problem.entropy1
    phi_other = np.asarray(e_other.rstar(psi_other), dtype=float)
    u = _ctransform_phi(phi_other, cost)
    return np.asarray(e_side.conj_circ(u), dtype=float)


def _lse(z, axis):
    """Log-sum-exp that tolerates rows of ``-inf``."""
    m = np.max(z, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(z - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


# ----------------------------------------------------------------------
# per-family pieces of the regularized dual


def _kink_table(e: EntropyFunction) -> tuple:
    """Kinks of ``F°`` as ``(φ, left slope, right slope)``."""
    if e.family == TV:
        return ((-1.0, np.inf, 1.0), (1.0, 1.0, 0.0))
    if e.family == INTERVAL:
        return ((0.0, e.b, e.a),)
    return ()


def _lower(e: EntropyFunction) -> float:
    return -e.recession


def _sigma(e: EntropyFunction, phi):
    if e.is_log:
        return np.exp(-phi)
    return np.asarray(e.marginal_density(phi), dtype=float)


def _conj_circ(e: EntropyFunction, phi):
    if e.is_log:
        return -np.expm1(-phi)
    return np.asarray(e.conj_circ(phi), dtype=float)


def _curvature(e: EntropyFunction, phi):
    """``-d²F°/dφ²`` on the smooth part."""
    phi = np.asarray(phi, dtype=float)
    if e.family != POWER:
        return np.zeros_like(phi)
    s = _sigma(e, phi)
    if e.p == 1.0:
        return s
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.where(s > 0, s ** (2.0 - e.p), 0.0 if e.p <= 2 else np.inf)
    return out


def _block(e: EntropyFunction, logmu, a, eps):
    """Solve ``log μ + log σ(φ) = φ/ε + a`` for ``φ`` elementwise."""
    phi0 = eps * (logmu - a)
    if e.family == INDICATOR:
        return phi0
    if e.family == TV:
        return np.clip(phi0, -1.0, 1.0)
    if e.family == INTERVAL:
        with np.errstate(divide="ignore"):
            pb = eps * (logmu + np.log(e.b) - a)
            pa = eps * (logmu + np.log(e.a) - a)
        return np.where(pb < 0, pb, np.where(pa > 0, pa, 0.0))
    if e.p == 1.0:
        return phi0 / (1.0 + eps)
    return _power_block(e.p, logmu, a, eps, phi0)


def _power_block(p, logmu, a, eps, phi0, iters=200):
    lo = np.minimum(phi0, 0.0)
    hi = np.maximum(phi0, 0.0)
    if p < 1:
        lo = np.maximum(lo, -1.0 / (1.0 - p))
    else:
        hi = np.minimum(hi, 1.0 / (p - 1.0))

    def f(x):
        base = 1.0 - (p - 1.0) * x
        with np.errstate(divide="ignore", invalid="ignore"):
            logsig = np.where(base > 0, np.log(np.maximum(base, 0)) / (p - 1.0),
                              -np.inf if p > 1 else np.inf)
            return logmu + logsig - x / eps - a, logsig

    x = 0.5 * (lo + hi)
    for _ in range(iters):
        fx, logsig = f(x)
        done = np.abs(fx) <= 1e-15 * (1.0 + np.abs(x) / eps)
        lo = np.where(fx > 0, x, lo)
        hi = np.where(fx < 0, x, hi)
        with np.errstate(over="ignore", invalid="ignore"):
            dfx = -np.exp((1.0 - p) * logsig) - 1.0 / eps
            xn = x - fx / dfx
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        if np.all(done | (hi - lo <= 1e-16 * (1.0 + np.abs(x)))):
            break
        x = np.where(done, x, xn)
    return x


# ----------------------------------------------------------------------
# solver state


class _Side:
    """Classification of the points of one marginal."""

    def __init__(self, e: EntropyFunction, mu: np.ndarray, finite_rows: np.ndarray):
        self.e = e
        self.mu = mu
        pos = mu > 0
        self.dropped = ~pos & np.isinf(e.recession)
        self.pinned_value = -e.recession
        self.finite_rows = finite_rows
        self.refresh(finite_rows)

    def refresh(self, finite_rows):
        self.isolated = ~self.dropped & ~finite_rows
        self.live = ~self.dropped & ~self.isolated
        self.var = self.live & (self.mu > 0)
        self.pinned = self.live & ~(self.mu > 0)


class _Regularized:
    """Entropic dual on the live block of the cost matrix."""

    def __init__(self, problem: ETProblem, opts: ETOptions):
        self.problem = problem
        self.opts = opts
        self.e1, self.e2 = problem.entropy1, problem.entropy2
        self.mu1, self.mu2 = problem.mu1.weights, problem.mu2.weights
        self.cost = problem.cost_matrix
        fin = np.isfinite(self.cost)
        s1 = _Side(self.e1, self.mu1, fin.any(axis=1))
        s2 = _Side(self.e2, self.mu2, fin.any(axis=0))
        # isolation is relative to the points that survive on the other side
        s1.refresh((fin[:, ~s2.dropped]).any(axis=1))
        s2.refresh((fin[~s1.dropped, :]).any(axis=0))
        self.s1, self.s2 = s1, s2
        self.rows = np.flatnonzero(s1.live)
        self.cols = np.flatnonzero(s2.live)
        self.C = self.cost[np.ix_(self.rows, self.cols)]
        self.var1 = s1.var[self.rows]
        self.var2 = s2.var[self.cols]
        with np.errstate(divide="ignore"):
            self.logmu1 = np.log(self.mu1[self.rows])
            self.logmu2 = np.log(self.mu2[self.cols])
        self.phi1 = np.where(self.var1, 0.0, s1.pinned_value)
        self.phi2 = np.where(self.var2, 0.0, s2.pinned_value)
        if opts.init == "random":
            rng = np.random.default_rng(opts.seed)
            self.phi1 = np.where(self.var1, self._rand(rng, self.e1, len(self.rows)), self.phi1)
            self.phi2 = np.where(self.var2, self._rand(rng, self.e2, len(self.cols)), self.phi2)
        elif opts.init != "zero":
            raise ValueError("init must be 'zero' or 'random'")
        self.iterations = 0

    @staticmethod
    def _rand(rng, e, n):
        lo = max(_lower(e), -1.0)
        hi = 1.0 if e.family != POWER or e.p <= 1 else min(1.0, 0.5 / (e.p - 1.0))
        lo = lo + 0.25 * (0 - lo)
        return rng.uniform(lo, 0.5 * hi, size=n)

    @property
    def empty(self) -> bool:
        return not (self.var1.any() or self.var2.any())

    # -- objective pieces

    def kernel(self, phi1, phi2, eps):
        with np.errstate(over="ignore", invalid="ignore"):
            z = (phi1[:, None] + phi2[None, :] - self.C) / eps
            g = np.exp(z)
        return np.where(np.isinf(self.C), 0.0, g)

    def objective(self, phi1, phi2, eps, g=None):
        v1 = _conj_circ(self.e1, phi1[self.var1])
        v2 = _conj_circ(self.e2, phi2[self.var2])
        if np.any(np.isnan(v1)) or np.any(np.isnan(v2)):
            return -math.inf
        if g is None:
            g = self.kernel(phi1, phi2, eps)
        val = (np.sum(self.mu1[self.rows][self.var1] * v1)
               + np.sum(self.mu2[self.cols][self.var2] * v2) - eps * np.sum(g))
        return float(val) if np.isfinite(val) else -math.inf

    def gradient(self, phi1, phi2, g):
        g1 = self.mu1[self.rows] * _sigma(self.e1, phi1) - g.sum(axis=1)
        g2 = self.mu2[self.cols] * _sigma(self.e2, phi2) - g.sum(axis=0)
        return np.where(self.var1, g1, 0.0), np.where(self.var2, g2, 0.0)

    # -- block coordinate ascent

    def sweep(self, eps):
        fin = np.isfinite(self.C)
        with np.errstate(invalid="ignore"):
            z = np.where(fin, (self.phi2[None, :] - self.C) / eps, -np.inf)
        a = _lse(z[self.var1], axis=1)
        self.phi1[self.var1] = _block(self.e1, self.logmu1[self.var1], a, eps)
        with np.errstate(invalid="ignore"):
            z = np.where(fin, (self.phi1[:, None] - self.C) / eps, -np.inf)
        a = _lse(z[:, self.var2], axis=0)
        self.phi2[self.var2] = _block(self.e2, self.logmu2[self.var2], a, eps)
        self.iterations += 1

    # -- damped Newton

    def _pieces(self, e, phi, var, mu, r):
        """Active set and linear piece of each coordinate for the Newton step.

        Returns ``(free, grad, lo, hi)``.  Coordinates sitting on a kink of
        ``F°`` are freed only if the one-sided gradient points away from it.
        """
        grad = mu * _sigma(e, phi) - r
        free = var.copy()
        lo = np.full(len(phi), -np.inf)
        hi = np.full(len(phi), np.inf)
        table = _kink_table(e)
        if not table:
            return free, np.where(free, grad, 0.0), lo, hi
        ks = np.array([k for k, _, _ in table])
        at = np.zeros(len(phi), dtype=bool)
        for k, s_left, s_right in table:
            on = var & (phi == k)
            at |= on
            g_right = mu * s_right - r
            g_left = mu * s_left - r
            up = on & (g_right > 0)
            down = on & ~up & (g_left < 0)
            grad = np.where(up, g_right, np.where(down, g_left, np.where(on, 0.0, grad)))
            free &= ~on | up | down
        # bracket every coordinate by its neighbouring kinks
        for i in np.flatnonzero(free):
            x = phi[i]
            below = ks[ks < x]
            above = ks[ks > x]
            if at[i] and grad[i] > 0:
                below = ks[ks <= x]
            elif at[i]:
                above = ks[ks >= x]
            lo[i] = below.max() if len(below) else -np.inf
            hi[i] = above.min() if len(above) else np.inf
        return free, np.where(free, grad, 0.0), lo, hi

    def rounding_level(self, eps) -> float:
        """Relative marginal accuracy that rounding of ``φ`` allows at this ``ε``."""
        big = max(np.max(np.abs(self.phi1), initial=0.0), np.max(np.abs(self.phi2), initial=0.0))
        return np.finfo(float).eps * (1.0 + big) / eps

    def _small(self, g1, g2, scale1, scale2, eps, tol) -> bool:
        """Residual below ``tol`` or at rounding level row by row."""
        mass = 1.0 + self.mu1.sum() + self.mu2.sum()
        if float(np.abs(g1).sum() + np.abs(g2).sum()) <= tol * mass:
            return True
        rel = self.rounding_level(eps)
        return bool(np.all(np.abs(g1) <= rel * scale1) and np.all(np.abs(g2) <= rel * scale2))

    def anneal_level(self, eps, tol, rounds=None):
        """Block sweeps followed by Newton; kinked entropies alternate both."""
        kinked = bool(_kink_table(self.e1) or _kink_table(self.e2))
        if rounds is None:
            rounds = 10 if kinked else 1
        for k in range(rounds):
            for _ in range(self.opts.sweeps_per_eps if k == 0 else 1):
                self.sweep(eps)
            done = self.newton(eps, tol, self.opts.newton_iters)
            if not kinked or done or self.iterations >= self.opts.max_iters:
                break

    @staticmethod
    def _on_kink(e, phi):
        on = np.zeros(len(phi), dtype=bool)
        for k, _, _ in _kink_table(e):
            on |= phi == k
        return on

    def residual(self, phi1, phi2, eps) -> float:
        g = self.kernel(phi1, phi2, eps)
        _, g1, _, _ = self._pieces(self.e1, phi1, self.var1, self.mu1[self.rows], g.sum(axis=1))
        _, g2, _, _ = self._pieces(self.e2, phi2, self.var2, self.mu2[self.cols], g.sum(axis=0))
        return float(np.abs(g1).sum() + np.abs(g2).sum())

    def newton(self, eps, tol, maxit) -> bool:
        """Projected damped Newton ascent on the regularized dual.

        Returns whether the projected gradient reached ``tol`` or the
        rounding level.
        """
        m1, m2 = self.mu1[self.rows], self.mu2[self.cols]
        done = False
        for _ in range(maxit):
            if self.iterations >= self.opts.max_iters:
                break
            g = self.kernel(self.phi1, self.phi2, eps)
            r1, r2 = g.sum(axis=1), g.sum(axis=0)
            f1, g1, lo1, hi1 = self._pieces(self.e1, self.phi1, self.var1, m1, r1)
            f2, g2, lo2, hi2 = self._pieces(self.e2, self.phi2, self.var2, m2, r2)
            res = float(np.abs(g1).sum() + np.abs(g2).sum())
            # rows that are not variables have zero gradient and any scale
            sc1 = np.where(self.var1, m1 * _sigma(self.e1, self.phi1), 0.0) + r1
            sc2 = np.where(self.var2, m2 * _sigma(self.e2, self.phi2), 0.0) + r2
            if self._small(g1, g2, sc1, sc2, eps, tol):
                done = True
                break
            # coordinates on kinks are left to the block sweeps
            f1 &= ~self._on_kink(self.e1, self.phi1)
            f2 &= ~self._on_kink(self.e2, self.phi2)
            if self._small(np.where(f1, g1, 0.0), np.where(f2, g2, 0.0), sc1, sc2, eps, tol):
                break
            idx1, idx2 = np.flatnonzero(f1), np.flatnonzero(f2)
            k1 = len(idx1)
            if k1 + len(idx2) == 0:
                break
            d1 = eps * m1[idx1] * _curvature(self.e1, self.phi1[idx1])
            d2 = eps * m2[idx2] * _curvature(self.e2, self.phi2[idx2])
            h = np.zeros((k1 + len(idx2),) * 2)
            h[:k1, :k1] = np.diag(d1 + r1[idx1])
            h[k1:, k1:] = np.diag(d2 + r2[idx2])
            off = g[np.ix_(idx1, idx2)]
            h[:k1, k1:] = off
            h[k1:, :k1] = off.T
            step = _solve_psd(h, eps * np.concatenate([g1[idx1], g2[idx2]]))
            if step is None:
                break
            s1 = np.zeros(len(self.rows))
            s2 = np.zeros(len(self.cols))
            s1[idx1] = step[:k1]
            s2[idx2] = step[k1:]
            if not self._line_search(s1, s2, g1, g2, (lo1, hi1), (lo2, hi2), eps, res, g):
                break
            self.iterations += 1
        return done

    def _line_search(self, s1, s2, g1, g2, box1, box2, eps, res, kern):
        j0 = self.objective(self.phi1, self.phi2, eps, kern)
        t = 1.0
        for _ in range(60):
            p1 = np.clip(self.phi1 + t * s1, *box1)
            p2 = np.clip(self.phi2 + t * s2, *box2)
            gain = float(np.dot(g1, p1 - self.phi1) + np.dot(g2, p2 - self.phi2))
            j = self.objective(p1, p2, eps)
            ok = j >= j0 + 1e-4 * gain
            if not ok and j >= j0 - 1e-13 * (1 + abs(j0)):
                # the increase is below rounding: judge by the gradient instead
                ok = self.residual(p1, p2, eps) < res
            if ok:
                self.phi1 = np.where(self.var1, p1, self.phi1)
                self.phi2 = np.where(self.var2, p2, self.phi2)
                return True
            t *= 0.5
        return False

    # -- assembling full-size outputs

    def full_plan(self, eps):
        n, m = self.problem.shape
        plan = np.zeros((n, m))
        if len(self.rows) and len(self.cols):
            plan[np.ix_(self.rows, self.cols)] = self.kernel(self.phi1, self.phi2, eps)
        return plan

    def full_phi(self):
        n, m = self.problem.shape
        phi1 = np.where(self.s1.isolated, np.inf, self.s1.pinned_value).astype(float)
        phi2 = np.where(self.s2.isolated, np.inf, self.s2.pinned_value).astype(float)
        phi1[self.rows] = self.phi1
        phi2[self.cols] = self.phi2
        return phi1, phi2


def _solve_psd(h, rhs):
    n = len(rhs)
    scale = float(np.max(np.abs(np.diag(h)))) if n else 0.0
    if not np.isfinite(scale):
        return None
    h = h + np.eye(n) * (1e-14 * scale + 1e-300)
    try:
        c = linalg.cho_factor(h, check_finite=False)
        x = linalg.cho_solve(c, rhs, check_finite=False)
    except linalg.LinAlgError:
        x = np.linalg.lstsq(h, rhs, rcond=None)[0]
    return x if np.all(np.isfinite(x)) else None


# ----------------------------------------------------------------------
# certificate and polish


def _certificate(reg: _Regularized) -> tuple[np.ndarray, np.ndarray]:
    """Feasible potentials from the regularized ones by c-transforms."""
    phi1, phi2 = reg.full_phi()
    cost = reg.cost
    s1, s2 = reg.s1, reg.s2
    upd1 = s1.var
    upd2 = s2.var

    def ct2(phi1):
        out = _ctransform_phi(np.where(s1.dropped, -np.inf, phi1), cost.T)
        return np.where(upd2, out, phi2)

    def ct1(phi2):
        out = _ctransform_phi(np.where(s2.dropped, -np.inf, phi2), cost)
        return np.where(upd1, out, phi1)

    # dropped points carry φ = -inf, which imposes no constraint
    with np.errstate(invalid="ignore"):
        phi2 = np.where(upd2, np.maximum(ct2(phi1), _lower(reg.e2)), phi2)
        phi1 = ct1(phi2)
        phi2 = ct2(phi1)
    return phi1, phi2


def _dual_from_phi(problem, phi1, phi2) -> float:
    v1 = mul0(problem.mu1.weights, np.asarray(problem.entropy1.conj_circ(phi1), dtype=float))
    v2 = mul0(problem.mu2.weights, np.asarray(problem.entropy2.conj_circ(phi2), dtype=float))
    return float(np.sum(v1) + np.sum(v2))


def _round_to_bounds(plan, mu1, mu2, e1, e2, finite):
    """Move plan marginals onto ``[a μ, b μ]`` for interval type entropies.

    Rows and columns above their upper bound are scaled down.  Deficits are
    then filled by rank-one corrections on finite-cost entries, first
    pairing row and column deficits and then drawing on spare capacity.
    """
    lo1, hi1 = e1.domain()[:2]
    lo2, hi2 = e2.domain()[:2]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = plan.sum(1)
        plan = plan * np.where(r > hi1 * mu1, hi1 * mu1 / r, 1.0)[:, None]
        c = plan.sum(0)
        plan = plan * np.where(c > hi2 * mu2, hi2 * mu2 / c, 1.0)[None, :]

    def add(plan, u, v, fin):
        tot = v.sum()
        if tot <= 0 or u.sum() <= 0:
            return plan
        corr = np.outer(u, v) / tot
        return plan + corr if np.all(fin | (corr == 0)) else plan

    def spread(plan, u, v, fin):
        # row i receives u_i, split over its finite partners in proportion to v
        w = v[None, :] * fin
        tot = w.sum(axis=1)
        ok = tot > 0
        plan = plan.copy()
        plan[ok] += u[ok, None] * w[ok] / tot[ok, None]
        return plan

    d1 = np.maximum(lo1 * mu1 - plan.sum(1), 0.0)
    d2 = np.maximum(lo2 * mu2 - plan.sum(0), 0.0)
    if d1.sum() <= d2.sum():
        plan = add(plan, d1, d2, finite)
    else:
        plan = add(plan, d1 * d2.sum() / d1.sum(), d2, finite) if d2.sum() > 0 else plan
    d1 = np.maximum(lo1 * mu1 - plan.sum(1), 0.0)
    d2 = np.maximum(lo2 * mu2 - plan.sum(0), 0.0)
    with np.errstate(invalid="ignore"):
        spare2 = np.where(np.isinf(hi2), mu2 + 1.0, hi2 * mu2 - plan.sum(0))
        spare1 = np.where(np.isinf(hi1), mu1 + 1.0, hi1 * mu1 - plan.sum(1))
    plan = spread(plan, d1, np.maximum(spare2, 0.0) * (mu2 > 0), finite)
    plan = spread(plan.T, d2, np.maximum(spare1, 0.0) * (mu1 > 0), finite.T).T
    return plan


def _polish(plan, problem: ETProblem, steps: int) -> np.ndarray:
    """Projected gradient on the unregularized primal; only decreases are kept."""
    e1, e2 = problem.entropy1, problem.entropy2
    if not (e1.family == POWER and e2.family == POWER) or steps <= 0:
        return plan
    mu1, mu2 = problem.mu1.weights, problem.mu2.weights
    if np.any(mu1 <= 0) or np.any(mu2 <= 0):
        return plan
    cost = problem.cost_matrix
    finite = np.isfinite(cost)
    cfin = np.where(finite, cost, 0.0)
    val = primal_value(plan, problem)
    lr = 1.0
    for _ in range(steps):
        s1 = plan.sum(1) / mu1
        s2 = plan.sum(0) / mu2
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = (np.asarray(e1.derivative(s1))[:, None]
                    + np.asarray(e2.derivative(s2))[None, :] + cfin)
        grad = np.where(finite & np.isfinite(grad), grad, 0.0)
        # only entries that are positive or would grow are active
        active = (plan > 0) | (grad < 0)
        grad = np.where(active, grad, 0.0)
        if not np.any(grad):
            break
        improved = False
        for _ in range(12):
            cand = np.maximum(plan - lr * grad, 0.0)
            try:
                v = primal_value(cand, problem)
            except ValueError:
                v = math.inf
            if v < val:
                plan, val, improved = cand, v, True
                lr *= 2.0
                break
            lr *= 0.1
        if not improved:
            break
    return plan


# ----------------------------------------------------------------------
# driver


def solve_et(problem: ETProblem, opts: Optional[ETOptions] = None, **kwargs) -> ETSolution:
    """Solve a discrete Entropy-Transport problem with a certified gap.

    Parameters
    ----------
    problem
        The instance.
    opts
        Solver controls; keyword arguments override individual fields.

    Returns
    -------
    ETSolution
        ``status`` is ``"converged"`` when ``gap <= gap_tol (1 + m1 + m2)``,
        otherwise ``"max_iters"`` and the best iterate is returned.

    Raises
    ------
    InfeasibleProblemError
        When no plan has finite cost.
    """
    if opts is None:
        opts = ETOptions(**kwargs)
    elif kwargs:
        opts = ETOptions(**{**opts.__dict__, **kwargs})
    ok, diag = feasibility(problem)
    if not ok:
        raise InfeasibleProblemError(diag)
    mu1, mu2 = problem.mu1.weights, problem.mu2.weights
    reg = _Regularized(problem, opts)
    for side, name in ((reg.s1, "mu1"), (reg.s2, "mu2")):
        bad = side.isolated & (side.mu > 0)
        if np.isinf(side.e.f_at_zero) and np.any(bad):
            raise InfeasibleProblemError(
                f"{name} charges point {int(np.flatnonzero(bad)[0])} which has no "
                "finite-cost partner while F(0) = inf")

    epsilons = opts.epsilons()
    eps = epsilons[-1]
    if not reg.empty:
        for eps in epsilons:
            reg.anneal_level(eps, 1e-14)

    mass = 1.0 + mu1.sum() + mu2.sum()
    best = None
    for attempt in range(4):
        sol = _assemble(reg, problem, opts, eps)
        if best is None or sol.gap < best.gap:
            best = sol
        if sol.gap <= opts.gap_tol * mass or reg.empty or reg.iterations >= opts.max_iters:
            break
        # extra effort at the final level before giving up
        for _ in range(10 * opts.sweeps_per_eps):
            reg.sweep(eps)
        reg.anneal_level(eps, 1e-15, rounds=20)
    status = "converged" if best.gap <= opts.gap_tol * mass else "max_iters"
    return ETSolution(best.plan, best.potentials, best.primal, best.dual, best.gap, status,
                      mu1.copy(), mu2.copy(), eps, reg.iterations)


def _assemble(reg: _Regularized, problem: ETProblem, opts: ETOptions, eps: float) -> ETSolution:
    mu1, mu2 = problem.mu1.weights, problem.mu2.weights
    n, m = problem.shape
    plan = reg.full_plan(eps)
    if n and m:
        plan[plan < 1e-15 * (mu1.sum() + mu2.sum()) / (n * m)] = 0.0
    e1, e2 = problem.entropy1, problem.entropy2
    rtol = opts.marginal_rtol
    if {e1.family, e2.family} <= {INDICATOR, INTERVAL}:
        plan = _round_to_bounds(plan, mu1, mu2, e1, e2, np.isfinite(problem.cost_matrix))
    primal = primal_value(plan, problem, rtol)
    phi1, phi2 = _certificate(reg)
    dual = _dual_from_phi(problem, phi1, phi2)
    if not primal - dual <= 1e-3 * opts.gap_tol * (1.0 + mu1.sum() + mu2.sum()):
        plan = _polish(plan, problem, opts.polish_steps)
        primal = primal_value(plan, problem, rtol)
    gap = primal - dual if np.isfinite(primal) or np.isfinite(dual) else math.inf
    if math.isnan(gap):
        gap = math.inf
    pots = DualPotentials.from_phi(phi1, phi2, problem)
    return ETSolution(plan, pots, primal, dual, max(gap, 0.0) if gap > -1e-12 else gap,
                      "", mu1.copy(), mu2.copy(), eps, reg.iterations)


# ----------------------------------------------------------------------
# optimality report


@dataclass
class OptimalityReport:
    on_support: float = 0.0
    off_support: float = 0.0
    feasibility: float = 0.0
    complementary: float = 0.0
    monotone: Optional[bool] = None
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_optimality(solution: ETSolution, problem: ETProblem, tol: float = 1e-5,
                     support_threshold: float = 1e-12) -> OptimalityReport:
    """Check first-order optimality of a returned plan.

    For the logarithmic case with cost ``ℓ(d)`` the densities must satisfy
    ``σ1 σ2 = cos²(d ∧ π/2)`` on the support and ``>=`` elsewhere.  For other
    entropies the potentials must satisfy ``φ1 ⊕ φ2 <= c`` with equality on
    the support.  On the real line the support is checked for monotonicity.
    """
    rep = OptimalityReport()
    plan = solution.plan
    cost = problem.cost_matrix
    scale = max(plan.max(initial=0.0), 1e-300)
    supp = plan > support_threshold * scale
    e1, e2 = problem.entropy1, problem.entropy2
    pos = (problem.mu1.weights > 0)[:, None] & (problem.mu2.weights > 0)[None, :]
    if e1.is_log and e2.is_log and problem.cost.kind == "log":
        s = solution.sigma1[:, None] * solution.sigma2[None, :]
        cos2 = np.exp(-cost)
        diff = s - cos2
        on = supp & pos
        rep.on_support = float(np.max(np.abs(diff[on]), initial=0.0))
        rep.off_support = float(np.min(diff[~supp & pos], initial=0.0))
        if rep.on_support > tol:
            rep.violations.append(f"sigma1*sigma2 differs from cos^2 by {rep.on_support:.3g} on the support")
        if rep.off_support < -tol:
            rep.violations.append(f"sigma1*sigma2 below cos^2 by {-rep.off_support:.3g} off the support")
    else:
        phi1, phi2 = solution.potentials.phi1, solution.potentials.phi2
        with np.errstate(invalid="ignore"):
            slack = cost - phi1[:, None] - phi2[None, :]
        fin = np.isfinite(slack)
        rep.feasibility = float(-np.min(np.where(fin, slack, np.inf), initial=0.0))
        rep.complementary = float(np.max(np.abs(np.where(fin & supp, slack, 0.0)), initial=0.0))
        if rep.feasibility > tol:
            rep.violations.append(f"potentials violate the cost by {rep.feasibility:.3g}")
        if rep.complementary > tol:
            rep.violations.append(f"slack {rep.complementary:.3g} on the support")
    sp = problem.space
    if sp is not None and sp.points is not None and sp.points.shape[1] == 1:
        x = sp.points[problem.mu1.support, 0]
        y = sp.points[problem.mu2.support, 0]
        rep.monotone = monotone_support(supp, x, y)
        if not rep.monotone:
            rep.violations.append("support is not monotone")
    return rep


def monotone_support(supp: np.ndarray, x: np.ndarray, y: np.ndarray) -> bool:
    """``x < x'`` on the support implies ``y <= y'``."""
    i, j = np.nonzero(supp)
    xs, ys = x[i], y[j]
    bad = (xs[:, None] < xs[None, :]) & (ys[:, None] > ys[None, :])
    return not bool(np.any(bad))
