import math

import numpy as np
import pytest

from timebin_lab.core import (
    NAMED_QUBIT_STATES,
    T0,
    T1,
    DensityMatrix,
    DimensionError,
    PureState,
    QuantumStateError,
    partial_trace,
    random_pure_state,
    tensor,
)
from timebin_lab.entangle import (
    PumpProfile,
    StationConfig,
    correlation_table,
    joint_antibunching,
    joint_outcome_probabilities,
    schmidt_coefficients,
    spdc_entangled_state,
    station_povm,
)
from timebin_lab.hom import NoiseModel, antibunching_probability

MUB = list(NAMED_QUBIT_STATES.values())
UNIFORM2 = PumpProfile(np.array([1, 1]) / math.sqrt(2))


def random_pump(n, rng, zeros=0):
    a = rng.normal(size=n) + 1j * rng.normal(size=n)
    a[:zeros] = 0
    return PumpProfile(a / np.linalg.norm(a))


def test_pump_validation():
    with pytest.raises(QuantumStateError):
        PumpProfile([1, 1])
    with pytest.raises(QuantumStateError):
        PumpProfile([])
    assert UNIFORM2.n_bins == 2


def test_spdc_state_examples():
    prod = spdc_entangled_state(PumpProfile([1, 0, 0]))
    np.testing.assert_allclose(prod.amplitudes, tensor(PureState([1, 0, 0]), PureState([1, 0, 0])).amplitudes)
    bell = spdc_entangled_state(UNIFORM2)
    np.testing.assert_allclose(bell.amplitudes, np.array([1, 0, 0, 1]) / math.sqrt(2), atol=1e-15)
    for side in (0, 1):
        np.testing.assert_allclose(partial_trace(bell, side, (2, 2)).matrix, np.eye(2) / 2, atol=1e-15)


def test_schmidt_structure():
    rng = np.random.default_rng(0)
    for n in (2, 3, 5):
        for zeros in range(n):
            pump = random_pump(n, rng, zeros)
            state = spdc_entangled_state(pump)
            coeffs = schmidt_coefficients(state, (n, n))
            np.testing.assert_allclose(np.sort(coeffs), np.sort(np.abs(pump.amplitudes)), atol=1e-12)
            assert np.sum(coeffs > 1e-12) == n - zeros
    with pytest.raises(DimensionError):
        schmidt_coefficients(spdc_entangled_state(UNIFORM2), (2, 3))


def test_reduced_state_is_diagonal():
    rng = np.random.default_rng(1)
    for n in (2, 4, 6):
        pump = random_pump(n, rng)
        reduced = partial_trace(spdc_entangled_state(pump), 1, (n, n)).matrix
        np.testing.assert_allclose(reduced, np.diag(np.abs(pump.amplitudes) ** 2), atol=1e-12)


def test_station_povm_examples():
    rng = np.random.default_rng(2)
    phi = random_pure_state(3, rng)
    e_ab, e_b = station_povm(phi, 1.0)
    assert np.real(np.vdot(phi.amplitudes, e_ab @ phi.amplitudes)) == pytest.approx(0, abs=1e-15)
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    orth = v - np.vdot(phi.amplitudes, v) * phi.amplitudes
    orth /= np.linalg.norm(orth)
    assert np.real(np.vdot(orth, e_ab @ orth)) == pytest.approx(0.5)
    e_ab, _ = station_povm(phi, 0.0)
    np.testing.assert_allclose(e_ab, np.eye(3) / 2)
    with pytest.raises(ValueError):
        station_povm(phi, 1.5)


def test_station_povm_is_valid_and_matches_single_station_model():
    rng = np.random.default_rng(3)
    for _ in range(200):
        d = int(rng.integers(2, 6))
        phi = random_pure_state(d, rng)
        v = float(rng.uniform())
        e_ab, e_b = station_povm(phi, v)
        np.testing.assert_allclose(e_ab + e_b, np.eye(d), atol=1e-12)
        assert np.linalg.eigvalsh(e_ab).min() >= -1e-12
        assert np.linalg.eigvalsh(e_b).min() >= -1e-12
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = DensityMatrix(g @ g.conj().T / np.trace(g @ g.conj().T).real)
        assert abs(np.real(np.trace(e_ab @ rho.matrix)) - antibunching_probability(rho, phi, v)) < 1e-12


def test_joint_antibunching_examples():
    bell = spdc_entangled_state(UNIFORM2)
    assert abs(joint_antibunching(bell, StationConfig(T0), StationConfig(T0)) - 1 / 8) < 1e-12
    prod = spdc_entangled_state(PumpProfile([1, 0]))
    assert joint_antibunching(prod, StationConfig(T0), StationConfig(T0)) == pytest.approx(0, abs=1e-15)
    with pytest.raises(DimensionError):
        joint_antibunching(bell, StationConfig(T0), StationConfig(PureState([1, 0, 0])))


def test_marginals_match_single_station_probabilities():
    rng = np.random.default_rng(4)
    for n in (2, 3, 4):
        state = spdc_entangled_state(random_pump(n, rng))
        rho_a = partial_trace(state, 1, (n, n))
        rho_b = partial_trace(state, 0, (n, n))
        for _ in range(20):
            ra, rb = random_pure_state(n, rng), random_pure_state(n, rng)
            noise = NoiseModel(visibility=float(rng.uniform(0.5, 1)))
            table = joint_outcome_probabilities(state, StationConfig(ra, noise), StationConfig(rb, noise))
            assert abs(table.sum() - 1) < 1e-12
            assert abs(table[0].sum() - antibunching_probability(rho_a, ra, noise.visibility)) < 1e-12
            assert abs(table[:, 0].sum() - antibunching_probability(rho_b, rb, noise.visibility)) < 1e-12


def test_swap_symmetry():
    rng = np.random.default_rng(5)
    for n in (2, 3):
        for _ in range(20):
            g = rng.normal(size=n * n) + 1j * rng.normal(size=n * n)
            state = PureState(g / np.linalg.norm(g))
            swapped = PureState(state.amplitudes.reshape(n, n).T.ravel())
            a = StationConfig(random_pure_state(n, rng), NoiseModel(visibility=0.9))
            b = StationConfig(random_pure_state(n, rng), NoiseModel(visibility=0.8))
            assert abs(joint_antibunching(state, a, b) - joint_antibunching(swapped, b, a)) < 1e-12


def test_correlation_table_uniform_state():
    table = correlation_table(spdc_entangled_state(UNIFORM2), MUB, MUB)
    assert table.shape == (6, 6)
    assert abs(table[0, 0] - 1 / 8) < 1e-12
    assert np.all(table >= -1e-15) and np.all(table <= 0.25 + 1e-15)


def test_product_pump_factorizes_on_mub_grid():
    for k in range(2):
        amps = np.zeros(2)
        amps[k] = 1
        state = spdc_entangled_state(PumpProfile(amps))
        single = T0 if k == 0 else T1
        noise = NoiseModel(visibility=0.95)
        table = correlation_table(state, MUB, MUB, noise)
        p = np.array([antibunching_probability(single, r, noise.visibility) for r in MUB])
        np.testing.assert_allclose(table, np.outer(p, p), atol=1e-12)


def test_separable_inputs_factorize():
    rng = np.random.default_rng(6)
    for n in (2, 3):
        a, b = random_pure_state(n, rng), random_pure_state(n, rng)
        refs = [random_pure_state(n, rng) for _ in range(4)]
        table = correlation_table(tensor(a, b), refs, refs)
        pa = np.array([antibunching_probability(a, r) for r in refs])
        pb = np.array([antibunching_probability(b, r) for r in refs])
        np.testing.assert_allclose(table, np.outer(pa, pb), atol=1e-12)
        assert np.all(table <= 0.25 + 1e-15)
