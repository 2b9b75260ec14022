"""
A capacity with tau > 1
=======================

The wobble profile ``c(r) = r^2 (1 + 0.2 sin ln r)`` is not homogeneous,
but ``c(t r) / c(r)`` stays within a factor ``(1.2/0.8)^{+-1}`` of ``t^2``,
so ``tau = 2.25``.  The limit of ``h`` then need not equal the mass, but
must land in ``[1/tau, tau]`` times the mass.  Here the limit is probed
with two atoms of weight 1/2 and compared to the scaling sandwich.
"""

import numpy as np

from capmax import (RadialProfile, boundedness_check, sandwich_check, scaling_envelope,
                    theorem_check, two_atom_measure, weaktype_curve)
from capmax.setcap import ray_directions
from capmax.weaktype import geometric_schedule

profile = RadialProfile.wobble(1, 2, 0.2)
env = scaling_envelope(profile)
print("tau =", env.tau)

nu = two_atom_measure(2)
curve = weaktype_curve(nu, profile, geometric_schedule(1e-1, 1e-6, 1),
                       directions=ray_directions(2, 32))
for e in curve.entries:
    print(f"  lambda={e.lam:7.0e}  h in [{e.h_lower:.4f}, {e.h_upper:.4f}]")
print(theorem_check(curve))
print(boundedness_check(curve, 0.05))

# %%
# The sandwich M nu(x/t) / psi(t) <= M nu_t(x) <= M nu(x/t) / phi(t)
pts = np.random.default_rng(0).normal(scale=3, size=(1000, 2))
for t in (0.5, 0.1, 0.01):
    print(sandwich_check(nu, profile, t, pts).to_dict())
