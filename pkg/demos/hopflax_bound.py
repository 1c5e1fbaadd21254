"""Hopf-Lax dual bounds for HK² and the Hamilton-Jacobi residual.

Any admissible datum gives a lower bound; the one built from optimal
potentials is tight.  Run with ``python3 demos/hopflax_bound.py``.
"""

import numpy as np

from hellkan import (DiscreteMeasure, ETProblem, GroundSpace, hj_residual, hk_distance,
                     hk_dual_lower_bound, hopflax_field, solve_et, xi_from_potentials)

rng = np.random.default_rng(1)
space = GroundSpace.from_points(rng.uniform(0, 2, (10, 2)))
mu0 = DiscreteMeasure(np.arange(5), rng.uniform(0.2, 2, 5))
mu1 = DiscreteMeasure(np.arange(5, 10), rng.uniform(0.2, 2, 5))
hk2 = hk_distance(mu0, mu1, space).value ** 2
problem = ETProblem.let(mu0, mu1, space)
xi = xi_from_potentials(solve_et(problem), problem)
print(f"HK^2                    {hk2:.10f}")
print(f"bound from potentials   {hk_dual_lower_bound(mu0, mu1, xi, space):.10f}")
for k in range(3):
    guess = rng.uniform(-0.45, 1.0, len(space))
    print(f"bound from random xi #{k} {hk_dual_lower_bound(mu0, mu1, guess, space):.10f}")

print("residual of the Hamilton-Jacobi inequality for 0.1 cos x, one step at t = 0.5:")
for h in (4e-3, 2e-3, 1e-3):
    x = np.arange(0.0, 2 * np.pi, h)
    grid = GroundSpace.from_points(x[:, None])
    field = hopflax_field(0.1 * np.cos(x), [0.5, 0.5 + h], grid)
    print(f"  h = tau = {h:.0e}: max residual {hj_residual(field, grid).max():.3e}")
