"""Marginal perspective function ``H_c(r1, r2)``.

``H_c(r1, r2) = inf_{θ>0} r1 F1(θ/r1) + r2 F2(θ/r2) + θ c`` is the
integrand of the homogeneous formulation.  It is evaluated either by a
one-dimensional minimization in ``log θ`` (any entropy pair) or by the
closed forms available for symmetric pairs of classical entropies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import xlogy

from .entropies import EntropyFunction, mul0

NUMERIC = "numeric"
CLOSED = "closed"

_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


@dataclass(frozen=True)
class PerspectiveEval:
    value: float
    argmin_theta: Optional[float]
    method: str


def _boundary_value(e1, e2, r1, r2):
    return float(mul0(e1.f_at_zero, r1) + mul0(e2.f_at_zero, r2))


def _objective(e1, e2, r1, r2, c):
    def g(theta):
        return float(mul0(r1, e1(theta / r1)) + mul0(r2, e2(theta / r2)) + theta * c)
    return g


def _theta_domain(e1, e2, r1, r2):
    lo1, hi1, _, _ = e1.domain()
    lo2, hi2, _, _ = e2.domain()
    return max(lo1 * r1, lo2 * r2), min(hi1 * r1, hi2 * r2)


def _golden_log(g, lo, hi, tol=1e-12, max_iter=200):
    """Minimize a unimodal ``g`` over ``θ`` in ``[lo, hi]``, searching in ``log θ``."""
    a, b = math.log(lo), math.log(hi)
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = g(math.exp(x1)), g(math.exp(x2))
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = g(math.exp(x1))
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = g(math.exp(x2))
    return (math.exp(x1), f1) if f1 <= f2 else (math.exp(x2), f2)


def _second_derivative(e: EntropyFunction, s: float) -> float:
    # U_p'' (s) = s^(p-2)
    return s ** (e.p - 2.0)


def _newton_polish(e1, e2, r1, r2, c, theta, g, steps=2):
    best_t, best_v = theta, g(theta)
    if not (e1.smooth and e2.smooth):
        return best_t, best_v
    t = theta
    for _ in range(steps):
        s1, s2 = t / r1, t / r2
        d1 = e1.derivative(s1) + e2.derivative(s2) + c
        d2 = _second_derivative(e1, s1) / r1 + _second_derivative(e2, s2) / r2
        if not (np.isfinite(d1) and np.isfinite(d2)) or d2 <= 0:
            break
        t_new = t - d1 / d2
        if not t_new > 0:
            break
        t = t_new
        v = g(t)
        if v < best_v:
            best_t, best_v = t, v
    return best_t, best_v


def _minimize_theta(g, e1, e2, r1, r2, c, lo_dom, hi_dom):
    scale = max(r1, r2, 1.0)
    if hi_dom < lo_dom:
        return None, math.inf
    if hi_dom == lo_dom:
        return lo_dom, g(lo_dom)
    lo = max(1e-12 * scale, lo_dom) if lo_dom == 0 else lo_dom
    hi_cap = min(1e6 * scale, hi_dom)
    hi = min(max(2.0 * lo, scale), hi_cap)
    while hi < hi_cap and g(min(2.0 * hi, hi_cap)) <= g(hi):
        hi = min(2.0 * hi, hi_cap)
    hi = min(2.0 * hi, hi_cap)
    theta, val = _golden_log(g, lo, hi)
    theta, val = _newton_polish(e1, e2, r1, r2, c, theta, g)
    # endpoint candidates, including the θ -> 0 limit
    if lo_dom == 0:
        v0 = _boundary_value(e1, e2, r1, r2)
        if v0 < val:
            theta, val = 0.0, v0
    for t in (lo, hi):
        v = g(t)
        if v < val:
            theta, val = t, v
    return theta, val


def perspective_numeric(e1: EntropyFunction, e2: EntropyFunction, r1: float, r2: float,
                        c: float) -> PerspectiveEval:
    """``H_c(r1, r2)`` by golden-section search in ``log θ`` with a Newton polish."""
    r1, r2, c = float(r1), float(r2), float(c)
    if min(r1, r2, c) < 0:
        raise ValueError("r1, r2 and c must be nonnegative")
    if math.isinf(c):
        return PerspectiveEval(_boundary_value(e1, e2, r1, r2), None, NUMERIC)
    if r1 == 0 and r2 == 0:
        return PerspectiveEval(0.0, None, NUMERIC)
    if r1 == 0 or r2 == 0:
        return _boundary_numeric(e1, e2, r1, r2, c)
    g = _objective(e1, e2, r1, r2, c)
    lo, hi = _theta_domain(e1, e2, r1, r2)
    theta, val = _minimize_theta(g, e1, e2, r1, r2, c, lo, hi)
    return PerspectiveEval(float(val), theta, NUMERIC)


def _boundary_numeric(e1, e2, r1, r2, c):
    if r1 == 0:
        return _boundary_numeric(e2, e1, r2, r1, c)
    # r2 = 0 leaves inf_θ r1 F1(θ/r1) + θ (F2_inf + c) = r1 F1°(F2_inf + c)
    slope = e2.recession + c
    if math.isinf(slope) or e1.right_derivative_at_zero + slope >= 0:
        return PerspectiveEval(_boundary_value(e1, e2, r1, r2), 0.0, NUMERIC)
    g = lambda theta: float(mul0(r1, e1(theta / r1)) + theta * slope)
    lo1, hi1, _, _ = e1.domain()
    theta, val = _minimize_theta(g, e1, EntropyFunction.indicator(), r1, 1.0, slope,
                                 lo1 * r1, hi1 * r1)
    exact = float(r1 * e1.conj_circ(slope))
    return PerspectiveEval(min(val, exact), theta, NUMERIC)


# ----------------------------------------------------------------------
# closed forms

CLOSED_FAMILIES = ("log", "reverse_log", "power", "quadratic", "inverse_power", "tv")


def closed_family_for(e1: EntropyFunction, e2: EntropyFunction) -> Optional[tuple]:
    """``(family, p)`` for symmetric pairs with a closed-form perspective."""
    if e1 != e2:
        return None
    if e1.family == "tv":
        return ("tv", None)
    if e1.family != "power":
        return None
    if e1.p == 1.0:
        return ("log", None)
    if e1.p == 0.0:
        return ("reverse_log", None)
    return ("power", e1.p)


def perspective_closed(family: str, r1: float, r2: float, c: float,
                       p: Optional[float] = None) -> PerspectiveEval:
    """Closed-form ``H_c(r1, r2)`` for symmetric entropy pairs.

    ``family`` is one of ``"log"`` (``U_1``), ``"reverse_log"`` (``U_0``),
    ``"power"`` (``U_p``, needs ``p``), ``"quadratic"`` (``U_2``),
    ``"inverse_power"`` (``U_{-1}``) or ``"tv"``.
    """
    r1, r2, c = float(r1), float(r2), float(c)
    if min(r1, r2, c) < 0:
        raise ValueError("r1, r2 and c must be nonnegative")
    if family == "log":
        val = r1 + r2 - 2.0 * math.sqrt(r1 * r2) * math.exp(-0.5 * c)
    elif family == "reverse_log":
        s = r1 + r2
        if s == 0:
            val = 0.0
        elif math.isinf(c):
            val = math.inf
        else:
            val = float(xlogy(r1, r1) + xlogy(r2, r2) - xlogy(s, s / (2.0 + c)))
    elif family == "quadratic":
        s = r1 + r2
        h = 4.0 if c >= 2 else c * (4.0 - c)
        val = 0.0 if s == 0 else ((r1 - r2) ** 2 + h * r1 * r2) / (2.0 * s)
    elif family == "inverse_power":
        val = math.inf if math.isinf(c) else (
            math.sqrt((r1 * r1 + r2 * r2) * (2.0 + 2.0 * c)) - (r1 + r2))
    elif family == "power":
        if p is None or p in (0.0, 1.0):
            raise ValueError("power family needs p outside {0, 1}")
        val = _power_closed(p, r1, r2, c)
    elif family == "tv":
        val = abs(r2 - r1) + min(c, 2.0) * min(r1, r2)
    else:
        raise ValueError(f"unknown closed-form family {family!r}")
    return PerspectiveEval(float(val), None, CLOSED)


def _power_closed(p, r1, r2, c):
    if r1 == 0 and r2 == 0:
        return 0.0
    q = p / (p - 1.0)
    k = 1.0 - p
    with np.errstate(divide="ignore", over="ignore"):
        # r1 r2 / (r1^(p-1) + r2^(p-1))^(1/(p-1)) == (r1^k + r2^k)^(1/k)
        mean = float(np.power(np.power(r1, k) + np.power(r2, k), 1.0 / k))
        base = 2.0 - (p - 1.0) * c
        if p > 1:
            factor = max(base, 0.0) ** q
        else:
            factor = math.inf if math.isinf(base) else base**q
    if p < 0 and math.isinf(factor):
        return math.inf
    return ((r1 + r2) - mul0(mean, factor)) / p


def perspective(e1: EntropyFunction, e2: EntropyFunction, r1: float, r2: float,
                c: float, method: str = "auto") -> PerspectiveEval:
    """Closed form when one exists for the pair, numeric otherwise.

    ``method`` may force ``"numeric"`` or ``"closed"``; the latter raises
    ``ValueError`` for pairs without a closed form.
    """
    if method not in ("auto", "closed", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    fam = closed_family_for(e1, e2)
    if method == "closed" and fam is None:
        raise ValueError(f"no closed form for {e1!r} with {e2!r}")
    if fam is None or method == "numeric":
        return perspective_numeric(e1, e2, r1, r2, c)
    if math.isinf(c):
        return PerspectiveEval(_boundary_value(e1, e2, r1, r2), None, CLOSED)
    return perspective_closed(fam[0], r1, r2, c, fam[1])


def perspective_log_array(r1, r2, c):
    """Vectorized closed form for the logarithmic pair."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    return r1 + r2 - 2.0 * np.sqrt(r1 * r2) * np.exp(-0.5 * np.asarray(c, dtype=float))


# ----------------------------------------------------------------------
# dual characterization

@dataclass(frozen=True)
class DualCertificate:
    lower_bound: float
    psi1: float
    psi2: float
    slack: float
    max_excess: float

    @property
    def ok(self) -> bool:
        return self.max_excess <= 1e-9


def perspective_dual_check(e1: EntropyFunction, e2: EntropyFunction, r1: float,
                           r2: float, c: float, value: float,
                           n_grid: int = 10_000, span: float = 40.0) -> DualCertificate:
    """Sample dual pairs with ``R1*(ψ1) + R2*(ψ2) <= c`` and bound ``H_c`` from below.

    The grid runs over ``φ1 = R1*(ψ1)``; each sample takes the best partner
    ``ψ2 = F2°(c - φ1)``.  ``max_excess`` is the largest amount any sampled
    ``r1 ψ1 + r2 ψ2`` exceeds ``value``.
    """
    if math.isinf(c):
        p1, p2 = e1.f_at_zero, e2.f_at_zero
        lb = float(mul0(r1, p1) + mul0(r2, p2))
        return DualCertificate(lb, p1, p2, value - lb, lb - value)
    lo = -e1.recession if np.isfinite(e1.recession) else -span
    hi = c + (e2.recession if np.isfinite(e2.recession) else span)
    best = (-math.inf, math.nan, math.nan)
    excess = -math.inf
    a, b = lo, hi
    for _ in range(3):
        phi1 = np.linspace(a, b, n_grid)
        with np.errstate(all="ignore"):
            psi1 = np.asarray(e1.conj_circ(phi1))
            psi2 = np.asarray(e2.conj_circ(c - phi1))
            bound = mul0(r1, psi1) + mul0(r2, psi2)
        bound = np.where(np.isnan(bound), -np.inf, bound)
        k = int(np.argmax(bound))
        excess = max(excess, float(np.max(bound)) - value)
        if bound[k] > best[0]:
            best = (float(bound[k]), float(psi1[k]), float(psi2[k]))
        step = (b - a) / (n_grid - 1)
        a, b = max(lo, phi1[k] - 2 * step), min(hi, phi1[k] + 2 * step)
    lb, p1, p2 = best
    return DualCertificate(lb, p1, p2, value - lb, excess)
