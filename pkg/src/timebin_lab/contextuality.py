"""CHSH-type test on single-photon time-polarization hybrid states.

Hybrid vectors use the canonical ordering (t0H, t0V, t1H, t1V): the time
qubit is the first tensor factor, polarization the second. ``A``
observables act on time, ``B`` observables on polarization.

Polarization observables are read out behind the analyzer half-wave
plate, which flips the sign of the V component. ``ANALYZER_FRAME`` carries
that sign so that the literal settings {sz, sx} x {(sx+sz)/sqrt2, (sx-sz)/sqrt2}
saturate the Tsirelson bound on (|H t0> - |V t1>)/sqrt2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    SIGMA_X,
    SIGMA_Z,
    Basis,
    DensityMatrix,
    DimensionError,
    Observable,
    PureState,
    StateLike,
    as_density,
    convex_mixture,
)

TSIRELSON = 2.0 * math.sqrt(2.0)
ANALYZER_FRAME = np.diag([1.0, -1.0]).astype(np.complex128)
ANALYZER_FRAME.setflags(write=False)


@dataclass(frozen=True, eq=False)
class ChshSettings:
    A0: Observable
    A1: Observable
    B0: Observable
    B1: Observable

    def __post_init__(self) -> None:
        for name in ("A0", "A1", "B0", "B1"):
            if getattr(self, name).dim != 2:
                raise DimensionError(f"{name} must be a qubit observable")


@dataclass(frozen=True)
class ChshResult:
    s_value: float
    correlators: tuple[float, float, float, float]
    standard_error: float


def hybrid_entangled_state() -> PureState:
    """(|H>|t0> - |V>|t1>)/sqrt2 in canonical (t0H, t0V, t1H, t1V) ordering."""
    s = 1 / math.sqrt(2.0)
    return PureState([s, 0, 0, -s], Basis.HYBRID)


def white_noise_state(visibility: float) -> DensityMatrix:
    """v |psi><psi| + (1 - v) I/4 for the hybrid entangled state."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    return convex_mixture(
        [(hybrid_entangled_state(), visibility), (DensityMatrix.maximally_mixed(4), 1.0 - visibility)]
    )


def optimal_settings() -> ChshSettings:
    s = 1 / math.sqrt(2.0)
    return ChshSettings(
        A0=Observable(SIGMA_Z),
        A1=Observable(SIGMA_X),
        B0=Observable(s * (SIGMA_X + SIGMA_Z)),
        B1=Observable(s * (SIGMA_X - SIGMA_Z)),
    )


def _lab_b(b: Observable) -> np.ndarray:
    return ANALYZER_FRAME @ b.matrix @ ANALYZER_FRAME


def correlator(state: StateLike, a: Observable, b: Observable) -> float:
    """<A (x) B> with A on time and B on polarization."""
    rho = as_density(state).matrix
    if rho.shape != (4, 4):
        raise DimensionError("correlator needs a 4-dimensional hybrid state")
    if a.dim != 2 or b.dim != 2:
        raise DimensionError("correlator needs qubit observables")
    return float(np.real(np.trace(np.kron(a.matrix, _lab_b(b)) @ rho)))


def _pairs(settings: ChshSettings) -> list[tuple[Observable, Observable]]:
    return [
        (settings.A0, settings.B0),
        (settings.A0, settings.B1),
        (settings.A1, settings.B0),
        (settings.A1, settings.B1),
    ]


SIGNS = (1.0, -1.0, 1.0, 1.0)


def chsh_value(state: StateLike, settings: ChshSettings) -> float:
    """<A0B0> - <A0B1> + <A1B0> + <A1B1>."""
    return float(sum(sg * correlator(state, a, b) for sg, (a, b) in zip(SIGNS, _pairs(settings))))


def _hom_configuration_probabilities(
    rho: np.ndarray, a: Observable, b: Observable, visibility: float
) -> tuple[np.ndarray, np.ndarray]:
    """Anti-bunching probability for each (time reference, polarization projection).

    Returns the probabilities and the product of outcome signs each
    configuration votes for. A coincidence behind reference |a_s> is evidence
    that the time qubit was *not* in |a_s>, so it counts toward outcome -s.
    """
    a_plus, a_minus = a.eigenstates()
    vals, vecs = np.linalg.eigh(_lab_b(b))
    b_states = [(1.0, vecs[:, 1]), (-1.0, vecs[:, 0])]
    probs = []
    signs = []
    for s_a, ref in ((1.0, a_plus), (-1.0, a_minus)):
        e_ab = (np.eye(2) - visibility * ref.projector()) / 2.0
        for s_b, vb in b_states:
            op = np.kron(e_ab, np.outer(vb, vb.conj()))
            probs.append(max(float(np.real(np.trace(op @ rho))), 0.0))
            signs.append(-s_a * s_b)
    return np.array(probs), np.array(signs)


def simulate_chsh(
    state: StateLike,
    settings: ChshSettings,
    shots_per_setting: int,
    seed: int,
    visibility: float = 1.0,
) -> ChshResult:
    """Count-level CHSH estimate mirroring the HOM readout of the time qubit.

    A shot is one recorded anti-bunching coincidence. For each of the four
    (A, B) settings the four (time reference, polarization projection)
    configurations receive Poissonian counts whose means share
    ``shots_per_setting`` in proportion to their coincidence probabilities.
    Correlators are normalized over the four counts of a setting and errors
    follow from Poisson propagation.
    """
    if shots_per_setting < 1:
        raise ValueError("shots_per_setting must be >= 1")
    rho = as_density(state).matrix
    if rho.shape != (4, 4):
        raise DimensionError("simulate_chsh needs a 4-dimensional hybrid state")
    rng = np.random.default_rng(seed)
    correlators = []
    variances = []
    for a, b in _pairs(settings):
        probs, signs = _hom_configuration_probabilities(rho, a, b, visibility)
        total_p = probs.sum()
        if total_p <= 0:
            raise ValueError("no anti-bunching coincidences are possible for this setting")
        counts = rng.poisson(shots_per_setting * probs / total_p).astype(float)
        total = counts.sum()
        if total == 0:
            correlators.append(0.0)
            variances.append(1.0)
            continue
        e = float(np.dot(signs, counts) / total)
        correlators.append(e)
        variances.append(float(np.dot((signs - e) ** 2, counts) / total**2))
    s_value = float(np.dot(SIGNS, correlators))
    return ChshResult(s_value, tuple(correlators), math.sqrt(sum(variances)))


def random_observable(rng: np.random.Generator) -> Observable:
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return Observable(v[0] * SIGMA_X + v[1] * np.array([[0, -1j], [1j, 0]]) + v[2] * SIGMA_Z)


def random_settings(rng: np.random.Generator) -> ChshSettings:
    return ChshSettings(*(random_observable(rng) for _ in range(4)))
