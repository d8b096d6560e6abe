"""Biomass observability analysis for a three-state larva growth / temperature model."""
from .params import (
    LoganParameters,
    LumpedParameters,
    RawParameters,
    derive_lumped,
    failing_parameters,
    load_config,
    nominal_parameters,
    save_config,
    validate,
)
from .model import dynamics, temp_rate, temp_rate_derivative
from .observability import check_theorem1, curve_trace, injectivity_scan, noninjective_pair, omega1, omega2
from .sim import Signals, integrate, sample_measurements
from .estimator import DifferentiatorSpec, reconstruct

__version__ = "0.1.0"
