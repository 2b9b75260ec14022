"""
Superlevel sets of a point mass
===============================

For the unit point mass at the origin the centered maximal function is
``1 / c(|x|)``, so the set ``{M > lam}`` is the ball with ``c(r) = 1/lam``
and ``lam * C({M > lam})`` is exactly one for every threshold.  This
script traces the set with rays and prints the certified bracket.
"""

import numpy as np

from capmax import RadialProfile, delta_measure, weaktype_curve
from capmax.setcap import ray_directions

# a homogeneous profile, a power law and a profile with tau > 1
profiles = {
    "lebesgue(2)": RadialProfile.lebesgue(2),
    "power_law(1, 1.5)": RadialProfile.power_law(1, 1.5),
    "wobble(1, 2, 0.2)": RadialProfile.wobble(1, 2, 0.2),
}
lams = [1e-1, 1e-2, 1e-3, 1e-4]

for name, profile in profiles.items():
    curve = weaktype_curve(delta_measure(2), profile, lams, directions=ray_directions(2, 16))
    print(f"\n{name}")
    print("  lambda     h_lower       h_upper       radius")
    for e in curve.entries:
        print(f"  {e.lam:7.0e}  {e.h_lower:.9f}  {e.h_upper:.9f}  {e.enclosing_radius:.6g}")

# the radius is the inverse profile at 1/lambda
p = profiles["power_law(1, 1.5)"]
print("\nexpected radius at lambda=1e-4:", p.inverse(1e4), "=", 1e4 ** (1 / 1.5))
