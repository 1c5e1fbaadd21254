"""Generalized Hopf-Lax semigroup on finite metric spaces.

``P_t ξ(x) = min_{x'} (1/2t) (1 - cos²(d_{π/2}(x, x')) / (1 + 2t ξ(x')))``
produces subsolutions of ``∂_t ξ + ½|Dξ|² + 2ξ² = 0`` and, at ``t = 1``,
the dual lower bounds ``2(∫ P_1 ξ dμ1 - ∫ ξ dμ0) <= HK²(μ0, μ1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .entropies import DomainError, mul0
from .geometry import HALF_PI, GroundSpace
from .solver import DiscreteMeasure, ETProblem, ETSolution

__all__ = [
    "HopfLaxField", "hopflax_apply", "hopflax_field", "hj_residual",
    "hk_dual_lower_bound", "xi_from_potentials", "XI_FLOOR",
]

# admissible data satisfy inf ξ >= -1/2 + XI_MARGIN
XI_MARGIN = 1e-9
XI_FLOOR = -0.5 + XI_MARGIN

_CHUNK = 1024


@dataclass(frozen=True, eq=False)
class HopfLaxField:
    """Values ``P_t ξ0`` on every point for each time in ``times``."""

    times: np.ndarray
    values: np.ndarray
    initial: np.ndarray

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        return self.values[k]


def _check_xi(xi0) -> np.ndarray:
    xi0 = np.asarray(xi0, dtype=float)
    if np.any(np.isnan(xi0)):
        raise DomainError("xi0 contains nan")
    if xi0.size and np.min(xi0) < XI_FLOOR:
        raise DomainError(f"inf xi0 = {np.min(xi0)!r} is below -1/2 + {XI_MARGIN}")
    return xi0


def _sin2(dist: np.ndarray) -> np.ndarray:
    return np.sin(np.minimum(dist, HALF_PI)) ** 2


def hopflax_apply(xi0, t: float, space: GroundSpace,
                  dist: Optional[np.ndarray] = None) -> np.ndarray:
    """``P_t ξ0`` at every point of ``space`` by exhaustive minimization.

    Parameters
    ----------
    xi0
        Values on the points of ``space``; ``+inf`` is allowed and such points
        never attain the minimum at positive distance.
    t
        Time in ``[0, 1]``; ``t = 0`` returns ``ξ0``.
    dist
        Optional rectangular block of distances ``(targets, points)`` to
        evaluate only at selected targets.

    Raises
    ------
    DomainError
        If ``inf ξ0 < -1/2 + 1e-9``.
    """
    xi0 = _check_xi(xi0)
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 0.0:
        return xi0.copy()
    d = space.dist if dist is None else np.asarray(dist, dtype=float)
    # 1 - cos²/(1+2tξ) rewritten as (sin² + 2tξ)/(1+2tξ) to stay exact for small t
    finite = np.isfinite(xi0)
    two_t_xi = np.where(finite, 2.0 * t * xi0, 0.0)
    denom = 2.0 * t * (1.0 + two_t_xi)
    out = np.empty(d.shape[0])
    for a in range(0, d.shape[0], _CHUNK):
        block = _sin2(d[a:a + _CHUNK])
        with np.errstate(over="ignore"):
            vals = (block + two_t_xi[None, :]) / denom[None, :]
        vals = np.where(finite[None, :], vals, 0.5 / t)
        out[a:a + _CHUNK] = vals.min(axis=1)
    return out


def hopflax_field(xi0, times: Sequence[float], space: GroundSpace) -> HopfLaxField:
    """Evaluate ``P_t ξ0`` for every ``t`` in ``times``."""
    xi0 = _check_xi(xi0)
    times = np.asarray(times, dtype=float)
    values = np.stack([hopflax_apply(xi0, float(t), space) for t in times]) if len(times) \
        else np.zeros((0, len(xi0)))
    return HopfLaxField(times, values, xi0)


def hj_residual(field: HopfLaxField, grid: GroundSpace) -> np.ndarray:
    """Discrete Hamilton-Jacobi residual on a uniform 1-D grid.

    Returns ``(ξ(t_{k+1}) - ξ(t_k))/τ + ½ max(|D⁺ξ|, |D⁻ξ|)² + 2 ξ(t_k)²`` with
    shape ``(len(times) - 1, n_points)``.  Subsolutions give values that are
    ``<= 0`` up to discretization error.

    Raises
    ------
    ValueError
        If the grid is not uniform and one-dimensional or the times are not
        uniformly spaced.
    """
    if grid.points is None or grid.points.shape[1] != 1:
        raise ValueError("hj_residual needs a one-dimensional grid")
    x = grid.points[:, 0]
    h = np.diff(x)
    if len(h) == 0 or np.any(h <= 0) or np.ptp(h) > 1e-9 * abs(h[0]):
        raise ValueError("grid must be uniform and increasing")
    tau = np.diff(field.times)
    if len(tau) == 0 or np.any(tau <= 0) or np.ptp(tau) > 1e-9 * abs(tau[0]):
        raise ValueError("times must be uniform and increasing")
    hh, tt = float(h.mean()), float(tau.mean())
    v = field.values
    dt = (v[1:] - v[:-1]) / tt
    cur = v[:-1]
    fwd = np.zeros_like(cur)
    bwd = np.zeros_like(cur)
    fwd[:, :-1] = (cur[:, 1:] - cur[:, :-1]) / hh
    bwd[:, 1:] = (cur[:, 1:] - cur[:, :-1]) / hh
    slope = np.maximum(np.abs(fwd), np.abs(bwd))
    return dt + 0.5 * slope**2 + 2.0 * cur**2


def hk_dual_lower_bound(mu0: DiscreteMeasure, mu1: DiscreteMeasure, xi0,
                        space: GroundSpace) -> float:
    """``2 (∫ P_1 ξ0 dμ1 - ∫ ξ0 dμ0)``, a lower bound for ``HK²(μ0, μ1)``.

    ``xi0`` holds one value per point of ``space``.
    """
    xi0 = _check_xi(xi0)
    if len(xi0) != len(space):
        raise ValueError("xi0 needs one value per point")
    p1 = hopflax_apply(xi0, 1.0, space, space.dist[mu1.support])
    first = float(np.sum(mul0(mu1.weights, p1)))
    second = float(np.sum(mul0(mu0.weights, xi0[mu0.support])))
    return 2.0 * (first - second)


def xi_from_potentials(solution: ETSolution, problem: ETProblem) -> np.ndarray:
    """Initial datum ``ξ0 = -ψ1/2`` on ``supp μ0`` and ``+inf`` elsewhere.

    Values are clamped to the admissible floor ``-1/2 + 1e-9``.
    """
    n = problem.cost.shape[0]
    xi = np.full(n, np.inf)
    psi = solution.potentials.psi1
    pos = problem.mu1.weights > 0
    xi[problem.mu1.support[pos]] = np.maximum(-0.5 * psi[pos], XI_FLOOR)
    return xi
