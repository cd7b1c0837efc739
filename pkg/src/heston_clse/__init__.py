"""Conditional least squares estimation for the subcritical Heston model."""

__version__ = "0.1.0"

from .asymptotics import (
    AsymptoticCovariance,
    NoiseMoments,
    StationaryMoments,
    confidence_intervals,
    covariance_e,
    covariance_original,
    noise_moments,
    stationary_moments,
)
from .errors import (
    ConfigError,
    DomainError,
    MissingOriginal,
    NearSingularCovariance,
    ParameterError,
    SingularGramError,
)
from .estimate import ClseResult, clse_original, clse_transformed, residuals
from .model import (
    DriftParams,
    HestonParams,
    TransformedParams,
    delta_jacobian,
    forward_transform,
    inverse_transform,
)
from .montecarlo import ExperimentConfig, ExperimentReport, run_experiment, whiten_errors
from .simulate import (
    ObservationSeries,
    Scheme,
    SimulationConfig,
    simulate_path,
    simulate_transitions,
    stationary_sample,
)
