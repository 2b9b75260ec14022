"""
The weak-type limit for Lebesgue measure
========================================

For Lebesgue measure ``lam * |{M f > lam}|`` tends to ``||f||_1`` as
``lam -> 0``.  In one dimension the centered maximal function of the
indicator of ``[-1, 1]`` gives exactly ``h(lam) = 2 - 2 lam``.  In two
dimensions the approach is much slower: the level set of a Gaussian is
a disc of radius about ``(pi lam)^(-1/2) - s`` where ``s`` is the width
of the bulk of the mass, so ``1 - h`` decays only like ``sqrt(lam)``.
"""

import numpy as np

from capmax import Grid, RadialProfile, field_mass, limit_estimate, make_field, weaktype_curve
from capmax.setcap import ray_directions
from capmax.weaktype import geometric_schedule

f1 = make_field("indicator_ball", Grid.centered(1, 1.5, 0.01), R=1.0)
c1 = weaktype_curve(f1, RadialProfile.lebesgue(1), geometric_schedule(1e-1, 1e-5, 1))
print("indicator of [-1, 1], mass", field_mass(f1))
for e in c1.entries:
    print(f"  lambda={e.lam:7.0e}  h={e.h_upper:.6f}  2-2*lambda={2 - 2 * e.lam:.6f}")
print(" ", limit_estimate(c1))

# %%
# Two dimensions: a normalized Gaussian on a grid of spacing 0.1
f2 = make_field("gaussian", Grid.centered(2, 6.0, 0.1), sigma=1.0)
c2 = weaktype_curve(f2, RadialProfile.lebesgue(2), geometric_schedule(1e-1, 1e-6, 1),
                    directions=ray_directions(2, 32))
print("\ngaussian, mass", round(field_mass(f2), 9))
for e in c2.entries:
    deficit = 1 - e.h_upper
    print(f"  lambda={e.lam:7.0e}  h in [{e.h_lower:.5f}, {e.h_upper:.5f}]  "
          f"deficit/sqrt(lambda)={deficit / np.sqrt(e.lam):.3f}")
