"""Security-latency bounds for PoW longest-chain consensus under random delays."""

from .bounds import (
    BoundReport,
    Certified,
    compute_bounds,
    confirmation_pmf_lower,
    confirmation_pmf_upper,
    mempool_sanity,
    violation_lower,
    violation_upper,
)
from .delays import (
    DelaySpec,
    MaxDelay,
    ModelParams,
    c_alpha_pmf,
    c_b0_pmf,
    c_delta_pmf,
    max_delay_spec,
    mixed_poisson_pmf,
)
from .errors import NonConvergence, StabilityViolation
from .lead import StationaryLead, ZIncrement, build_z, lead_lower, lead_upper, ramaswami_stationary
from .pmf import Pmf, ccdf, convolve, delta, mean, pmf_from_masses, power_convolve, shift

__all__ = [
    "BoundReport", "Certified", "DelaySpec", "MaxDelay", "ModelParams", "NonConvergence", "Pmf",
    "StabilityViolation", "StationaryLead", "ZIncrement", "build_z", "c_alpha_pmf", "c_b0_pmf",
    "c_delta_pmf", "ccdf", "compute_bounds", "confirmation_pmf_lower", "confirmation_pmf_upper",
    "convolve", "delta", "lead_lower", "lead_upper", "max_delay_spec", "mean", "mempool_sanity",
    "mixed_poisson_pmf", "pmf_from_masses", "power_convolve", "ramaswami_stationary", "shift",
    "violation_lower", "violation_upper",
]
