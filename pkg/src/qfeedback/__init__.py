"""Measurement-feedback purification of qubits: superoperators, effective propagators and trajectories."""

__version__ = "0.1.0"

from .bath import BathSpectrum, gamma_of_omega, thermal_sigma_z
from .engine import (
    EffectivePropagator,
    FeedbackProtocol,
    effective_propagator,
    iterate,
    stationary_state,
    zeno_limit_generator,
    zeno_limit_stationary,
)
from .exceptions import ConfigError, NumericalError, StateValidationError
from .hilbert import (
    BlochVector,
    DensityMatrix,
    TwoQubitCorrelators,
    bloch_from_rho,
    correlators_from_rho,
    eig_hermitian,
    kron,
    pauli,
    rho_from_bloch,
    rho_from_correlators,
)
from .metrics import concurrence, purity, stationary_bell_prediction, stationary_correlators_finite_dt
from .superop import MeasurementSet, SuperOperator, VectorizationConvention, expm, lindblad_superop, vectorize
from .trajectories import TrajectoryConfig, run_ensemble, sample_trajectory

__all__ = [
    "BathSpectrum",
    "BlochVector",
    "ConfigError",
    "DensityMatrix",
    "EffectivePropagator",
    "FeedbackProtocol",
    "MeasurementSet",
    "NumericalError",
    "StateValidationError",
    "SuperOperator",
    "TrajectoryConfig",
    "TwoQubitCorrelators",
    "VectorizationConvention",
    "bloch_from_rho",
    "concurrence",
    "correlators_from_rho",
    "effective_propagator",
    "eig_hermitian",
    "expm",
    "gamma_of_omega",
    "iterate",
    "kron",
    "lindblad_superop",
    "pauli",
    "purity",
    "rho_from_bloch",
    "rho_from_correlators",
    "run_ensemble",
    "sample_trajectory",
    "stationary_bell_prediction",
    "stationary_correlators_finite_dt",
    "stationary_state",
    "thermal_sigma_z",
    "vectorize",
    "zeno_limit_generator",
    "zeno_limit_stationary",
]
