"""Capacitary maximal functions and their limiting weak-type behaviour."""

from .capacity import (RadialProfile, ScalingEnvelope, ball_capacity, inverse_ball_capacity,
                       scaling_envelope, validate_profile)
from .errors import ConfigurationError, DomainError, NonBracketingError
from .maximal import (BallIntegrator, MaximalField, MaximalOperator, RadiusPolicy,
                      maximal_at_point_field, maximal_at_point_measure, maximal_field_field,
                      maximal_field_measure, openness_radius, sandwich_check,
                      uncentered_maximal_at_point)
from .sampling import (AtomicMeasure, Grid, ScalarField, delta_measure, field_mass,
                       field_to_measure, make_field, normalize_measure, scale_measure,
                       two_atom_measure)
from .setcap import (BallFamily, CapacityBounds, LevelSetApprox, capacity_bounds,
                     enclosing_ball, greedy_disjoint_subfamily, inscribed_ball,
                     superlevel_boundary_rays, superlevel_cells, weak11_bound_check)
from .weaktype import (LimitEstimate, WeakTypeCurve, boundedness_check, geometric_schedule,
                       scaling_convergence, limit_estimate, theorem_check, weaktype_curve)

__version__ = "0.1.0"
