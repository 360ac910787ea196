"""Simulation toolkit for HOM-based measurements of time-bin photonic states."""

from .core import (
    Basis,
    DensityMatrix,
    DimensionError,
    Observable,
    PureState,
    QuantumStateError,
    fidelity,
    partial_trace,
    random_pure_state,
    tensor,
)
from .hom import NoiseModel, TemporalModeModel, antibunching_probability, fock_oracle, hom_scan

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "DensityMatrix",
    "DimensionError",
    "NoiseModel",
    "Observable",
    "PureState",
    "QuantumStateError",
    "TemporalModeModel",
    "antibunching_probability",
    "fidelity",
    "fock_oracle",
    "hom_scan",
    "partial_trace",
    "random_pure_state",
    "tensor",
]
