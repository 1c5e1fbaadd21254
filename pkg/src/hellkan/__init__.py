"""Certified Entropy-Transport and Hellinger-Kantorovich computations on finite spaces."""

from .entropies import DomainError, EntropyFunction
from .geometry import (ConePoint, CostMatrix, GroundSpace, UnsupportedGeometryError,
                       cone_distance, cone_geodesic, ghk_ground, log_cost)
from .hk import (BL_CONSTANT, DistanceResult, LiftedPlan, NonOptimalPlanError, ScalingTable,
                 bl_distance, geodesic_interp, ghk_distance, hellinger, hellinger_squared,
                 hk_between, hk_distance, lift_plan, scaling_limits, wasserstein)
from .hopflax import (HopfLaxField, hj_residual, hk_dual_lower_bound, hopflax_apply,
                      hopflax_field, xi_from_potentials)
from .perspective import (PerspectiveEval, perspective, perspective_closed,
                          perspective_dual_check, perspective_numeric)
from .solver import (DiscreteMeasure, DualPotentials, ETOptions, ETProblem, ETSolution,
                     InfeasiblePotentialsError, InfeasibleProblemError, OptimalityReport,
                     check_optimality, dual_value, generalized_ctransform, homogeneous_value,
                     primal_value, reverse_value, solve_et)

__version__ = "0.1.0"

__all__ = [
    "DomainError", "EntropyFunction",
    "ConePoint", "CostMatrix", "GroundSpace", "UnsupportedGeometryError",
    "cone_distance", "cone_geodesic", "ghk_ground", "log_cost",
    "BL_CONSTANT", "DistanceResult", "LiftedPlan", "NonOptimalPlanError", "ScalingTable",
    "bl_distance", "geodesic_interp", "ghk_distance", "hellinger", "hellinger_squared",
    "hk_between", "hk_distance", "lift_plan", "scaling_limits", "wasserstein",
    "HopfLaxField", "hj_residual", "hk_dual_lower_bound", "hopflax_apply", "hopflax_field",
    "xi_from_potentials",
    "PerspectiveEval", "perspective", "perspective_closed", "perspective_dual_check",
    "perspective_numeric",
    "DiscreteMeasure", "DualPotentials", "ETOptions", "ETProblem", "ETSolution",
    "InfeasiblePotentialsError", "InfeasibleProblemError", "OptimalityReport",
    "check_optimality", "dual_value", "generalized_ctransform", "homogeneous_value",
    "primal_value", "reverse_value", "solve_et",
]
