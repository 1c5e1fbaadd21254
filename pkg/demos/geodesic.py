"""Frames of an HK geodesic between two measures on the line.

Mass travels along cone geodesics: it moves and changes size at once.
Run with ``python3 demos/geodesic.py``.
"""

import numpy as np

from hellkan import (DiscreteMeasure, ETProblem, GroundSpace, geodesic_interp, hk_between,
                     hk_distance, lift_plan, solve_et)

space = GroundSpace.from_points([[0.0], [0.4], [1.0], [3.0]])
mu0 = DiscreteMeasure([0, 1], [1.0, 0.5])
mu1 = DiscreteMeasure([2, 3], [2.0, 0.3])
problem = ETProblem.let(mu0, mu1, space)
lifted = lift_plan(solve_et(problem), problem)
total = hk_distance(mu0, mu1, space).value
print(f"HK(mu0, mu1) = {total:.6f}")

frames = {t: geodesic_interp(lifted, t, space) for t in np.linspace(0, 1, 5)}
for t, (pts, mu) in frames.items():
    atoms = ", ".join(f"{w:.3f}@{x:.3f}" for x, w in zip(pts.points[mu.support, 0], mu.weights))
    print(f"t={t:.2f}: {atoms}")

print("constant speed check, HK(mu_0, mu_t) / t:")
s0, m0 = frames[0.0]
for t in (0.25, 0.5, 0.75, 1.0):
    st, mt = frames[t]
    print(f"  t={t:.2f}: {hk_between(s0, m0, st, mt).value / t:.6f}")
