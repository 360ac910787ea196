"""Finite-dimensional state types and the linear algebra shared by every module.

Hybrid (time x polarization) vectors use a single canonical ordering,
time-major with polarization fastest::

    (t0H, t0V, t1H, t1V, ...)

so ``tensor(time_state, pol_state)`` is a plain Kronecker product.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

NORM_ATOL = 1e-12
HERMITIAN_ATOL = 1e-10
PSD_ATOL = 1e-10
TRACE_ATOL = 1e-10

ComplexArray = NDArray[np.complex128]


class QuantumStateError(ValueError):
    """Raised when an array violates a state or observable invariant."""


class DimensionError(ValueError):
    """Raised when operands have incompatible dimensions."""


class Basis(enum.Enum):
    TIME_BIN = "time_bin"
    POLARIZATION = "polarization"
    HYBRID = "hybrid"


def _frozen(a: ArrayLike) -> ComplexArray:
    arr = np.array(a, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit-norm amplitude vector over a finite basis."""

    amplitudes: ComplexArray
    basis: Basis = Basis.TIME_BIN

    def __post_init__(self) -> None:
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.size < 1:
            raise QuantumStateError(f"amplitudes must be a non-empty vector, got shape {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_ATOL:
            raise QuantumStateError(f"state norm is {norm!r}, expected 1")
        if self.basis is Basis.HYBRID and amps.size % 2:
            raise QuantumStateError("hybrid states need an even dimension (2 x n_time)")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, amplitudes: ArrayLike, basis: Basis = Basis.TIME_BIN) -> "PureState":
        amps = np.asarray(amplitudes, dtype=np.complex128)
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or norm == 0:
            raise QuantumStateError("cannot normalize a zero or non-finite amplitude vector")
        return cls(amps / norm, basis)

    @classmethod
    def basis_state(cls, d: int, index: int, basis: Basis = Basis.TIME_BIN) -> "PureState":
        amps = np.zeros(d, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps, basis)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> ComplexArray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.projector())

    def __repr__(self) -> str:
        return f"PureState({np.array2string(self.amplitudes, precision=4)}, {self.basis.value})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    matrix: ComplexArray

    def __post_init__(self) -> None:
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise QuantumStateError(f"density matrix must be square, got shape {m.shape}")
        if not np.allclose(m, m.conj().T, atol=HERMITIAN_ATOL, rtol=0):
            raise QuantumStateError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_ATOL:
            raise QuantumStateError(f"density matrix trace is {tr!r}, expected 1")
        lo = np.linalg.eigvalsh(m).min()
        if lo < -PSD_ATOL:
            raise QuantumStateError(f"density matrix has negative eigenvalue {lo!r}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d, dtype=np.complex128) / d)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def expectation(self, operator: ArrayLike) -> complex:
        return complex(np.trace(np.asarray(operator) @ self.matrix))


@dataclass(frozen=True, eq=False)
class Observable:
    """Two-outcome (+1/-1) Hermitian observable."""

    matrix: ComplexArray = field()

    def __post_init__(self) -> None:
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumStateError(f"observable must be square, got shape {m.shape}")
        if not np.allclose(m, m.conj().T, atol=HERMITIAN_ATOL, rtol=0):
            raise QuantumStateError("observable is not Hermitian")
        if not np.allclose(m @ m, np.eye(m.shape[0]), atol=HERMITIAN_ATOL, rtol=0):
            raise QuantumStateError("observable must square to identity (eigenvalues +/-1)")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenstates(self) -> tuple[PureState, PureState]:
        """Return the (+1, -1) eigenvectors of a qubit observable."""
        if self.dim != 2:
            raise DimensionError("eigenstates() is defined for qubit observables")
        vals, vecs = np.linalg.eigh(self.matrix)
        # eigh sorts ascending: -1 first
        return PureState(vecs[:, 1]), PureState(vecs[:, 0])


StateLike = Union[PureState, DensityMatrix]


def as_density(state: StateLike) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, PureState):
        return state.to_density()
    raise TypeError(f"expected PureState or DensityMatrix, got {type(state).__name__}")


def inner_product(a: PureState, b: PureState) -> complex:
    """Return <a|b>."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def _psd_sqrt(m: ComplexArray) -> ComplexArray:
    vals, vecs = np.linalg.eigh(m)
    vals = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * vals) @ vecs.conj().T


def fidelity(theo: StateLike, exp: StateLike) -> float:
    """Uhlmann fidelity ``Tr[sqrt(sqrt(theo) exp sqrt(theo))]**2``.

    Eigenvalues are clamped at zero before every square root so roundoff
    at the 1e-14 level cannot produce NaN.
    """
    rho = as_density(theo).matrix
    sigma = as_density(exp).matrix
    if rho.shape != sigma.shape:
        raise DimensionError(f"dimension mismatch: {rho.shape[0]} vs {sigma.shape[0]}")
    # a pure argument reduces the formula to <psi|sigma|psi>, which avoids
    # sqrt(roundoff) terms from the null space
    for pure, other in ((theo, sigma), (exp, rho)):
        if isinstance(pure, PureState):
            v = pure.amplitudes
            return min(max(float(np.real(np.vdot(v, other @ v))), 0.0), 1.0)
    s = _psd_sqrt(rho)
    inner = s @ sigma @ s
    inner = (inner + inner.conj().T) / 2
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    f = float(np.sum(np.sqrt(vals)) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(a: StateLike, b: StateLike) -> float:
    diff = as_density(a).matrix - as_density(b).matrix
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def tensor(a: StateLike, b: StateLike) -> StateLike:
    """Kronecker product; pure inputs give a pure result, anything mixed gives a density matrix."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        kinds = {a.basis, b.basis}
        basis = Basis.HYBRID if kinds == {Basis.TIME_BIN, Basis.POLARIZATION} else a.basis
        return PureState(np.kron(a.amplitudes, b.amplitudes), basis)
    return DensityMatrix(np.kron(as_density(a).matrix, as_density(b).matrix))


def partial_trace(rho: StateLike, subsystem: int, dims: Sequence[int]) -> DensityMatrix:
    """Trace out ``subsystem`` (0 or 1) of a bipartite state with local dimensions ``dims``."""
    m = as_density(rho).matrix
    d1, d2 = dims
    if d1 * d2 != m.shape[0]:
        raise DimensionError(f"dims {tuple(dims)} do not match state dimension {m.shape[0]}")
    if subsystem not in (0, 1):
        raise ValueError("subsystem must be 0 or 1")
    t = m.reshape(d1, d2, d1, d2)
    out = np.einsum("ijik->jk", t) if subsystem == 0 else np.einsum("ijkj->ik", t)
    return DensityMatrix((out + out.conj().T) / 2)


def convex_mixture(states: Iterable[tuple[StateLike, float]]) -> DensityMatrix:
    items = list(states)
    if not items:
        raise ValueError("mixture needs at least one component")
    weights = np.array([w for _, w in items], dtype=float)
    if np.any(weights < 0):
        raise ValueError("mixture weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"mixture weights sum to {weights.sum()!r}, expected 1")
    mats = [as_density(s).matrix for s, _ in items]
    if len({m.shape for m in mats}) != 1:
        raise DimensionError("mixture components have different dimensions")
    return DensityMatrix(sum(w * m for w, m in zip(weights, mats)))


def random_pure_state(d: int, seed: int | np.random.Generator) -> PureState:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return PureState(v / np.linalg.norm(v))


def bloch_vector(rho: StateLike) -> NDArray[np.float64]:
    m = as_density(rho).matrix
    if m.shape != (2, 2):
        raise DimensionError("Bloch vectors are defined for qubits")
    return np.array([2 * m[0, 1].real, -2 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real])


# Pauli matrices in the (t0, t1) or (H, V) computational basis.
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z):
    _m.setflags(write=False)

_S = 1 / np.sqrt(2)
T0 = PureState([1, 0])
T1 = PureState([0, 1])
PLUS = PureState([_S, _S])
MINUS = PureState([_S, -_S])
PLUS_I = PureState([_S, 1j * _S])
MINUS_I = PureState([_S, -1j * _S])
H = PureState([1, 0], Basis.POLARIZATION)
V = PureState([0, 1], Basis.POLARIZATION)

NAMED_QUBIT_STATES: dict[str, PureState] = {
    "t0": T0,
    "t1": T1,
    "plus": PLUS,
    "minus": MINUS,
    "plus_i": PLUS_I,
    "minus_i": MINUS_I,
}
