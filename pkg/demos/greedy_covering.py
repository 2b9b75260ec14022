"""
Greedy disjoint balls and their dilates
=======================================

Picking balls largest first and skipping any ball that meets one already
picked leaves a disjoint subfamily whose 3-fold dilates cover every ball
of the family.  This is the covering step behind the weak (1, 1) bound
``lam * C({M nu > lam}) <= psi(3) nu(R^n)``.
"""

from capmax import BallFamily, RadialProfile, greedy_disjoint_subfamily, two_atom_measure
from capmax import weak11_bound_check
from capmax.setcap import covering_report, ray_directions

family = BallFamily.random(200, 2, rng=1)
selection = greedy_disjoint_subfamily(family)
print(covering_report(family, selection, 10_000, rng=1))

# %%
# The bound itself, for two atoms and Lebesgue measure in the plane
rep = weak11_bound_check(two_atom_measure(2), RadialProfile.lebesgue(2), [1e-1, 1e-2, 1e-3],
                         directions=ray_directions(2, 32))
print("gamma =", rep["gamma"], " best observed constant =", rep["empirical_constant"])
