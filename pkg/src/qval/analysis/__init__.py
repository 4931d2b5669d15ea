"""Regularity diagnostics for solved Q-valued functions."""

from .frequency import (DegenerateProfile, FrequencyProfile, IdentityResiduals, RateFit, StationarityResult,
                        ZeroEnergyBall, blow_up, blowup_distance, check_monotonicity, check_variational_identities,
                        profile, random_inner_field, random_outer_field, rate_check, verify_stationarity)
from .sampling import evaluate, locate
from .singular import (HolderEstimate, cluster_diameter, default_cluster_tol, holder_estimate, multiplicity_sigma,
                       singular_clusters, singular_set)
from .tangent import (DecayCheck, FourierBounds, FourierTrace, TangentModel, UnclassifiedTangent, fourier_bounds,
                      fourier_coeffs, gamma_exponent, mode_inequality_holds, tangent_fit, verify_decay_inequality)

__all__ = [
    "DecayCheck", "DegenerateProfile", "FourierBounds", "FourierTrace", "FrequencyProfile", "HolderEstimate",
    "IdentityResiduals", "RateFit", "StationarityResult", "TangentModel", "UnclassifiedTangent", "ZeroEnergyBall",
    "blow_up", "blowup_distance", "check_monotonicity", "check_variational_identities", "cluster_diameter",
    "default_cluster_tol", "evaluate", "fourier_bounds", "fourier_coeffs", "gamma_exponent", "holder_estimate",
    "locate", "mode_inequality_holds", "multiplicity_sigma", "profile", "random_inner_field", "random_outer_field",
    "rate_check", "singular_clusters", "singular_set", "tangent_fit", "verify_decay_inequality",
    "verify_stationarity",
]
