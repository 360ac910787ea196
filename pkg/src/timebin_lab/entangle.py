"""Time-bin entangled pairs from a shaped pump, measured by two HOM stations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DimensionError, PureState, QuantumStateError, StateLike, as_density
from .hom import NoiseModel


@dataclass(frozen=True, eq=False)
class PumpProfile:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size < 1:
            raise QuantumStateError("pump amplitudes must be a non-empty vector")
        if abs(np.sum(np.abs(amps) ** 2) - 1.0) > 1e-12:
            raise QuantumStateError("pump amplitudes must satisfy sum |a_j|^2 = 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_bins(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True, eq=False)
class StationConfig:
    reference: PureState
    noise: NoiseModel = NoiseModel()


def spdc_entangled_state(pump: PumpProfile) -> PureState:
    """sum_j a_j |t_j>_s |t_j>_i (first-order pair emission only)."""
    n = pump.n_bins
    amps = np.zeros(n * n, dtype=np.complex128)
    amps[np.arange(n) * (n + 1)] = pump.amplitudes
    return PureState(amps)


def schmidt_coefficients(state: PureState, dims: tuple[int, int]) -> np.ndarray:
    d1, d2 = dims
    if d1 * d2 != state.dim:
        raise DimensionError(f"dims {dims} do not match state dimension {state.dim}")
    return np.linalg.svd(state.amplitudes.reshape(d1, d2), compute_uv=False)


def station_povm(reference: PureState, visibility: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """(E_ab, E_b) with E_ab = (I - V |ref><ref|) / 2 and E_b = I - E_ab."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    eye = np.eye(reference.dim, dtype=np.complex128)
    e_ab = (eye - visibility * reference.projector()) / 2.0
    return e_ab, eye - e_ab


def joint_antibunching(state: StateLike, alice: StationConfig, bob: StationConfig) -> float:
    """Probability that both stations register an anti-bunching coincidence."""
    rho = as_density(state).matrix
    da, db = alice.reference.dim, bob.reference.dim
    if da * db != rho.shape[0]:
        raise DimensionError(f"station dimensions {da} x {db} do not match state dimension {rho.shape[0]}")
    e_a, _ = station_povm(alice.reference, alice.noise.visibility)
    e_b, _ = station_povm(bob.reference, bob.noise.visibility)
    return float(np.real(np.trace(np.kron(e_a, e_b) @ rho)))


def joint_outcome_probabilities(state: StateLike, alice: StationConfig, bob: StationConfig) -> np.ndarray:
    """2x2 table over (Alice outcome, Bob outcome), index 0 = anti-bunching, 1 = bunching."""
    rho = as_density(state).matrix
    da, db = alice.reference.dim, bob.reference.dim
    if da * db != rho.shape[0]:
        raise DimensionError(f"station dimensions {da} x {db} do not match state dimension {rho.shape[0]}")
    povm_a = station_povm(alice.reference, alice.noise.visibility)
    povm_b = station_povm(bob.reference, bob.noise.visibility)
    return np.array([[np.real(np.trace(np.kron(ea, eb) @ rho)) for eb in povm_b] for ea in povm_a])


def correlation_table(
    state: StateLike,
    alice_refs: Sequence[PureState],
    bob_refs: Sequence[PureState],
    noise: NoiseModel = NoiseModel(),
) -> np.ndarray:
    """Joint anti-bunching probability for every (Alice reference, Bob reference) pair."""
    table = np.empty((len(alice_refs), len(bob_refs)))
    for i, ra in enumerate(alice_refs):
        for j, rb in enumerate(bob_refs):
            table[i, j] = joint_antibunching(state, StationConfig(ra, noise), StationConfig(rb, noise))
    return table
