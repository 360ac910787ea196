"""Hong-Ou-Mandel projection: anti-bunching model, delay scans, counts and estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .core import DensityMatrix, DimensionError, PureState, StateLike, as_density

P_AB_REJECT_MARGIN = 0.05


@dataclass(frozen=True)
class TemporalModeModel:
    """Gaussian wavepackets on a regular grid of time bins (picoseconds)."""

    bin_spacing: float = 8.0
    coherence_time: float = 2.3

    def __post_init__(self) -> None:
        if not (self.bin_spacing > 0 and math.isfinite(self.bin_spacing)):
            raise ValueError("bin_spacing must be positive")
        if not (self.coherence_time > 0 and math.isfinite(self.coherence_time)):
            raise ValueError("coherence_time must be positive")

    @property
    def sigma(self) -> float:
        """Amplitude width: f(t) ~ exp(-t^2 / (2 sigma^2)) with sigma = coherence_time / sqrt(2)."""
        return self.coherence_time / math.sqrt(2.0)


@dataclass(frozen=True)
class NoiseModel:
    visibility: float = 1.0
    accidental_rate: float = 0.0
    mean_counts: float = 1e4

    def __post_init__(self) -> None:
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility}")
        if not self.accidental_rate >= 0.0:
            raise ValueError(f"accidental_rate must be >= 0, got {self.accidental_rate}")
        if not (self.mean_counts > 0 and math.isfinite(self.mean_counts)):
            raise ValueError(f"mean_counts must be positive, got {self.mean_counts}")


@dataclass(frozen=True, eq=False)
class HomSetting:
    reference: PureState
    delay: float = 0.0
    noise: NoiseModel = NoiseModel()


@dataclass(frozen=True, eq=False)
class CountRecord:
    antibunching: int
    bunching: int
    setting: HomSetting | None = None

    def __post_init__(self) -> None:
        for name in ("antibunching", "bunching"):
            value = getattr(self, name)
            if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer count, got {value!r}")
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
            object.__setattr__(self, name, int(value))


class ScanPoint(NamedTuple):
    delay: float
    p_antibunch: float
    p_bunch: float


def antibunching_probability(target: StateLike, reference: PureState, visibility: float = 1.0) -> float:
    """Coincidence probability ``(1 - V <ref|rho|ref>) / 2``."""
    rho = as_density(target).matrix
    if rho.shape[0] != reference.dim:
        raise DimensionError(f"target dim {rho.shape[0]} != reference dim {reference.dim}")
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    phi = reference.amplitudes
    overlap = float(np.real(np.vdot(phi, rho @ phi)))
    overlap = min(max(overlap, 0.0), 1.0)
    return (1.0 - visibility * overlap) / 2.0


def overlap_from_antibunching(p_ab: float) -> float:
    """Invert the ideal HOM relation: ``|<ref|target>|^2 = 1 - 2 p_ab``.

    Estimates a little outside [0, 0.5] are clamped; anything further than
    0.05 outside is treated as corrupt input.
    """
    if not math.isfinite(p_ab) or p_ab < -P_AB_REJECT_MARGIN or p_ab > 0.5 + P_AB_REJECT_MARGIN:
        raise ValueError(f"anti-bunching probability {p_ab!r} is outside the physical range")
    p = min(max(p_ab, 0.0), 0.5)
    return 1.0 - 2.0 * p


def bin_overlap(delay: float, model: TemporalModeModel) -> float:
    """Amplitude overlap of two identical Gaussian wavepackets offset by ``delay``."""
    if math.isinf(delay):
        return 0.0
    return math.exp(-(delay**2) / (4.0 * model.sigma**2))


@lru_cache(maxsize=64)
def _wannier_coefficients(model: TemporalModeModel) -> tuple[np.ndarray, np.ndarray]:
    # Fourier coefficients of 1/s(k), s(k) = sum_m g(m*spacing) e^{ikm} (Gram symbol of the pulse lattice).
    m_grid = 1024
    reach = int(math.ceil(12.0 * model.sigma / model.bin_spacing)) + 1
    m = np.arange(-reach, reach + 1)
    g = np.exp(-((m * model.bin_spacing) ** 2) / (4.0 * model.sigma**2))
    k = 2 * np.pi * np.arange(m_grid) / m_grid
    symbol = (g[None, :] * np.cos(np.outer(k, m))).sum(axis=1)
    inv = 1.0 / symbol
    p = np.arange(-m_grid // 2 + 1, m_grid // 2)
    a = (inv[None, :] * np.cos(np.outer(p, k))).sum(axis=1) / m_grid
    keep = np.abs(a) > 1e-18 * np.abs(a).max()
    return p[keep], a[keep]


def mode_overlap(delay: float | np.ndarray, model: TemporalModeModel) -> np.ndarray:
    """Overlap of an orthonormalized time-bin mode with a copy displaced by ``delay``.

    The raw Gaussian pulses of neighbouring bins overlap slightly, so the
    time-bin basis is taken as their symmetric orthonormalization. The
    result is exactly 1 at zero delay and exactly 0 at nonzero multiples of
    the bin spacing, and tracks ``bin_overlap`` elsewhere.
    """
    x = np.asarray(delay, dtype=float)
    p, a = _wannier_coefficients(model)
    shifted = x[..., None] + p * model.bin_spacing
    return (a * np.exp(-(shifted**2) / (4.0 * model.sigma**2))).sum(axis=-1)


def displaced_reference(reference: PureState, delay: float, model: TemporalModeModel) -> np.ndarray:
    """Projection of the delayed reference photon onto the target's time bins (not normalized)."""
    d = reference.dim
    j = np.arange(d)[:, None]
    k = np.arange(d)[None, :]
    kernel = mode_overlap(delay + (k - j) * model.bin_spacing, model)
    return kernel @ reference.amplitudes


def hom_scan(
    target: StateLike,
    reference: PureState,
    delays: Sequence[float],
    model: TemporalModeModel = TemporalModeModel(),
    noise: NoiseModel = NoiseModel(),
) -> list[ScanPoint]:
    rho = as_density(target).matrix
    if rho.shape[0] != reference.dim:
        raise DimensionError(f"target dim {rho.shape[0]} != reference dim {reference.dim}")
    out = []
    for delay in delays:
        delay = float(delay)
        if not math.isfinite(delay):
            raise ValueError("scan delays must be finite")
        chi = displaced_reference(reference, delay, model)
        overlap = min(max(float(np.real(np.vdot(chi, rho @ chi))), 0.0), 1.0)
        p = (1.0 - noise.visibility * overlap) / 2.0
        out.append(ScanPoint(delay, p, 1.0 - p))
    return out


def simulate_counts(
    p_ab: float, noise: NoiseModel, seed: int, setting: HomSetting | None = None
) -> CountRecord:
    """Poissonian anti-bunching/bunching counts with additive accidentals."""
    if not 0.0 <= p_ab <= 0.5 + 1e-12:
        raise ValueError(f"p_ab must lie in [0, 0.5], got {p_ab}")
    rng = np.random.default_rng(seed)
    n = noise.mean_counts
    acc = n * noise.accidental_rate
    ab = rng.poisson(n * p_ab + acc)
    b = rng.poisson(n * (1.0 - p_ab) + acc)
    return CountRecord(int(ab), int(b), setting)


def estimate_p_method_a(counts_ref: CountRecord, counts_orth: CountRecord) -> float:
    """Normalize with the orthogonal reference, using P(ref) + P(ref_perp) = 0.5."""
    total = counts_ref.antibunching + counts_orth.antibunching
    if total == 0:
        raise ZeroDivisionError("no anti-bunching counts for either reference")
    return 0.5 * counts_ref.antibunching / total


def bunching_detection_probability(splitting_ratio: float, efficiency: float) -> float:
    """Chance that a bunched pair is split onto the two detectors behind one output port."""
    if not 0.0 < splitting_ratio < 1.0:
        raise ValueError("splitting_ratio must lie in (0, 1)")
    if not 0.0 < efficiency <= 1.0:
        raise ValueError("efficiency must lie in (0, 1]")
    return 2.0 * splitting_ratio * (1.0 - splitting_ratio) * efficiency


def estimate_p_method_b(record: CountRecord, splitting_ratio: float = 0.5, efficiency: float = 1.0) -> float:
    """Normalize with pseudo-number-resolved bunching counts of the same projection."""
    corrected = record.bunching / bunching_detection_probability(splitting_ratio, efficiency)
    total = record.antibunching + corrected
    if total == 0:
        raise ZeroDivisionError("no counts to normalize")
    return record.antibunching / total


def estimate_p_method_c(counts_dip: CountRecord, counts_far: CountRecord) -> float:
    """Normalize with counts far outside the dip, where p_ab = 0.5."""
    if counts_far.antibunching == 0:
        raise ZeroDivisionError("no anti-bunching counts at the far-delay point")
    return 0.5 * counts_dip.antibunching / counts_far.antibunching


def fock_oracle(target: PureState, reference: PureState) -> float:
    """Anti-bunching probability from explicit two-photon Fock-space evolution.

    Modes are (time bin, path); the target enters path ``a`` and the
    reference path ``b``. The balanced splitter maps a† -> (c† + d†)/sqrt2 and
    b† -> (c† - d†)/sqrt2 for every time bin. The output state is expanded
    into occupation-number kets and the weight with one photon in ``c`` and
    one in ``d`` is summed.
    """
    if target.dim != reference.dim:
        raise DimensionError(f"dimension mismatch: {target.dim} vs {reference.dim}")
    d = target.dim
    s = 1.0 / math.sqrt(2.0)
    # output modes 0..d-1 are path c, d..2d-1 are path d
    u = np.concatenate([target.amplitudes * s, target.amplitudes * s])
    v = np.concatenate([reference.amplitudes * s, -reference.amplitudes * s])
    kets: dict[tuple[int, int], complex] = {}
    for m in range(2 * d):
        if u[m] == 0:
            continue
        for n in range(2 * d):
            if v[n] == 0:
                continue
            key = (m, n) if m <= n else (n, m)
            # a_m† a_n† |0> = |1_m 1_n> for m != n, sqrt(2) |2_m> for m == n
            amp = u[m] * v[n] * (math.sqrt(2.0) if m == n else 1.0)
            kets[key] = kets.get(key, 0j) + amp
    total = 0.0
    split = 0.0
    for (m, n), amp in kets.items():
        w = abs(amp) ** 2
        total += w
        if (m < d) != (n < d):
            split += w
    return split / total
