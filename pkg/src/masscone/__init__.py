"""Exact Wasserstein distances and extended distances for measures of variable mass."""

__version__ = "0.1.0"

from .axioms import MeasureSampler, ViolationWitness, run_axiom_suite
from .errors import *  # noqa: F401,F403
from .families import (
    Box,
    ExtendedMetricSpec,
    MassDistance,
    ScalingFunction,
    check_f_admissible,
    dist_bounded_mass,
    dist_bounded_space_with_zero,
    dist_product_q,
    fiber_scaling_probe,
    make_metric,
)
from .measure import DiscreteMeasure, Isometry, decompose, pushforward_isometry, total_mass
from .obstruction import (
    ExtensionCandidate,
    ObstructionConfig,
    SigmaSampler,
    find_scaling_violation,
    isometry_invariance_probe,
    mass_continuity_collapse_test,
    oscillation_bound,
    zero_extension_diameter_test,
)
from .transport import brute_force_wasserstein, wasserstein_distance, wasserstein_p
from .warped import ConeGrid, WarpingFunction, path_length, warped_distance_dirac_cone
