"""HK interpolates between Hellinger (large distances) and Wasserstein (small ones).

Run with ``python3 demos/scaling_limits.py``.
"""

from hellkan import DiscreteMeasure, GroundSpace, scaling_limits

space = GroundSpace.from_points([[0.0], [0.3], [0.5], [1.1]])
mu1 = DiscreteMeasure([0, 1], [0.5, 0.5])
mu2 = DiscreteMeasure([2, 3], [0.5, 0.5])
tab = scaling_limits(mu1, mu2, space, [1, 2, 4, 8, 16, 32, 64])
print(f"{'lambda':>7} {'HK_(lambda d)':>14} {'lambda HK_(d/lambda)':>21}")
for lam, h, w in tab.rows():
    print(f"{lam:7.0f} {h:14.8f} {w:21.8f}")
print(f"Hellinger limit   {tab.hellinger:.8f}")
print(f"Wasserstein limit {tab.wasserstein:.8f}")
