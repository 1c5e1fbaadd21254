"""Two unit Diracs: HK grows with distance and saturates at √2 past π/2.

Run with ``python3 demos/two_diracs.py``.
"""

import math

from hellkan import DiscreteMeasure, GroundSpace, ghk_distance, hk_distance

print(f"{'d':>6} {'HK':>10} {'closed form':>12} {'GHK':>10} {'gap':>9}")
for d in (0.0, 0.25, 0.5, math.pi / 3, 1.25, math.pi / 2, 2.0, 3.0):
    space = GroundSpace.from_points([[0.0], [d]])
    a, b = DiscreteMeasure([0], [1.0]), DiscreteMeasure([1], [1.0])
    hk = hk_distance(a, b, space)
    ghk = ghk_distance(a, b, space)
    closed = math.sqrt(2 - 2 * math.cos(min(d, math.pi / 2)))
    print(f"{d:6.3f} {hk.value:10.6f} {closed:12.6f} {ghk.value:10.6f} {hk.gap:9.1e}")
print("beyond π/2 no mass is transported: one Dirac is destroyed, the other created")
