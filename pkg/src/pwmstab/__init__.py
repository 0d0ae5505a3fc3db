"""Sampled-data stability analysis of PWM DC-DC converters under
peak-current-mode control."""

from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateOrbitError,
    MultiPulseError,
    OrbitNotFoundError,
    PwmStabError,
    ValidationError,
)
from .model import (
    ConverterParams,
    PiecewiseAffineModel,
    SwitchingRule,
    build_boost,
    build_buck,
    build_model,
)
from .orbit import PeriodicOrbit, find_periodic_orbit, orbit_slopes
from .simulator import exact_cycle_map, finite_difference_jacobian, probe_orbital_stability
from .stability import (
    StabilityReport,
    analyze_orbit,
    compute_jacobian,
    exact_stability,
    necessary_condition,
    saltation_matrix,
    slope_criterion,
)

__version__ = "0.1.0"
