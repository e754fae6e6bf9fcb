import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qforecast.encoders import (
    amplitude_encode,
    basis_encode,
    encode_batch,
    encode_feature_register,
    inverse_qft_decode,
    phase_encode_qubit,
    phase_encode_qutrit,
    qft_encode,
)
from qforecast.errors import CapacityError, DomainError, EncodingError
from qforecast.gates import rotation
from qforecast.qudit_state import born_probabilities, fidelity

unit = st.floats(0.0, 1.0)


def test_amplitude_worked_example():
    reg = amplitude_encode([0.6, 0.4, 0, 0, 0, 0, 0, 0], d=2, n=3)
    np.testing.assert_allclose(reg.amps[:2].real, [0.832, 0.554], atol=1e-3)
    np.testing.assert_array_equal(reg.amps[2:], 0)


def test_amplitude_basis_vector():
    reg = amplitude_encode([1, 0, 0, 0, 0], d=2, n=3)
    assert born_probabilities(reg)[0] == pytest.approx(1.0)


def test_amplitude_three_four_five():
    reg = amplitude_encode([0.3, 0.4], d=2, n=1)
    np.testing.assert_allclose(reg.amps, [0.6, 0.8], atol=1e-12)


def test_amplitude_all_zero():
    with pytest.raises(EncodingError, match="all-zero"):
        amplitude_encode([0, 0, 0], d=2, n=2)


def test_encode_batch_zero_rows_to_ground():
    X = np.array([[0.0, 0.0, 0.0, 0.0, 0.0], [0.6, 0.8, 0.0, 0.0, 0.0]])
    batch = encode_batch(X, "amplitude", 2, zero_to_ground=True)
    np.testing.assert_array_equal(batch[0], np.eye(8)[0])
    np.testing.assert_allclose(batch[1].real, [0.6, 0.8, 0, 0, 0, 0, 0, 0], atol=1e-12)
    with pytest.raises(EncodingError, match="all-zero"):
        encode_batch(X, "amplitude", 2)


def test_amplitude_capacity():
    with pytest.raises(CapacityError):
        amplitude_encode([0.1] * 5, d=2, n=2)


@settings(max_examples=50, deadline=None)
@given(
    x=st.lists(st.floats(0.01, 1.0), min_size=1, max_size=8),
    c=st.floats(0.1, 100.0),
)
def test_amplitude_scale_invariant(x, c):
    a = amplitude_encode(x, d=2, n=3)
    b = amplitude_encode([c * v for v in x], d=2, n=3)
    np.testing.assert_allclose(a.amps, b.amps, atol=1e-12)


def test_phase_qubit_examples():
    np.testing.assert_allclose(phase_encode_qubit(0).amps, [1, 0], atol=1e-15)
    np.testing.assert_allclose(phase_encode_qubit(1).amps, [0, 1], atol=1e-15)
    np.testing.assert_allclose(phase_encode_qubit(0.5).amps, [np.sqrt(2) / 2] * 2, atol=1e-15)


@pytest.mark.parametrize("bad", [-0.1, 1.5, float("nan")])
def test_phase_out_of_range(bad):
    with pytest.raises(DomainError):
        phase_encode_qubit(bad)
    with pytest.raises(DomainError):
        phase_encode_qutrit(bad)


@settings(max_examples=100, deadline=None)
@given(v1=unit, v2=unit)
def test_phase_qubit_injective(v1, v2):
    if abs(v1 - v2) >= 1e-6:
        assert fidelity(phase_encode_qubit(v1), phase_encode_qubit(v2)) < 1


def test_phase_qutrit_zero():
    np.testing.assert_allclose(phase_encode_qutrit(0).amps, [1, 0, 0], atol=1e-15)


def test_phase_qutrit_matches_matrix_product():
    angle = np.pi * 0.5
    expected = rotation("y", angle, 3, (1, 2)).matrix @ rotation("y", angle, 3, (0, 1)).matrix
    np.testing.assert_allclose(phase_encode_qutrit(0.5).amps, expected @ [1, 0, 0], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(v=unit)
def test_phase_qutrit_unit_norm(v):
    assert abs(np.sum(born_probabilities(phase_encode_qutrit(v))) - 1) < 1e-9


def test_feature_register_phase_qutrit_zero():
    reg = encode_feature_register([0, 0, 0, 0, 0], "phase", 3)
    assert reg.size == 243
    assert born_probabilities(reg)[0] == pytest.approx(1.0)


def test_feature_register_amplitude_worked_example():
    reg = encode_feature_register([0.6, 0.4, 0, 0, 0], "amplitude", 2)
    assert reg.wires == 3
    np.testing.assert_allclose(reg.amps[:2].real, [0.832, 0.554], atol=1e-3)


def test_feature_register_phase_qubit_ones():
    reg = encode_feature_register([1, 1, 1, 1, 1], "phase", 2)
    assert born_probabilities(reg)[31] == pytest.approx(1.0)


@pytest.mark.parametrize("d", [2, 3])
def test_feature_register_matches_kronecker(d):
    single = phase_encode_qubit if d == 2 else phase_encode_qutrit
    x = [0.2, 0.7, 0.45]
    expected = np.kron(np.kron(single(x[0]).amps, single(x[1]).amps), single(x[2]).amps)
    np.testing.assert_allclose(encode_feature_register(x, "phase", d).amps, expected, atol=1e-12)


def test_feature_register_rejects_bad_scheme():
    with pytest.raises(DomainError, match="Unknown encoding"):
        encode_feature_register([0.1], "angle", 2)
    with pytest.raises(DomainError, match="qubits"):
        encode_feature_register([0.1, 0.2], "amplitude", 3)


@pytest.mark.parametrize("scheme,d", [("amplitude", 2), ("phase", 2), ("phase", 3)])
def test_encode_batch_matches_single(scheme, d):
    X = np.random.default_rng(4).uniform(0.05, 1.0, size=(6, 5))
    batch = encode_batch(X, scheme, d)
    for row, amps in zip(X, batch):
        np.testing.assert_allclose(amps, encode_feature_register(row, scheme, d).amps, atol=1e-12)


def test_basis_encode_examples():
    assert born_probabilities(basis_encode(1, 3, 2))[1] == 1.0
    assert born_probabilities(basis_encode(3, 2, 2))[3] == 1.0
    with pytest.raises(DomainError):
        basis_encode(4, 2, 2)


def test_qft_encode_examples():
    np.testing.assert_allclose(born_probabilities(qft_encode(0, 2, 2)), [0.25] * 4, atol=1e-12)
    for symbol in range(9):
        np.testing.assert_allclose(
            born_probabilities(qft_encode(symbol, 3, 2)), [1 / 9] * 9, atol=1e-12,
        )
    np.testing.assert_allclose(qft_encode(1, 2, 2).amps, [0.5, 0.5j, -0.5, -0.5j], atol=1e-12)
    with pytest.raises(DomainError):
        qft_encode(9, 3, 2)


@pytest.mark.parametrize("d,n", [(2, 3), (3, 2)])
def test_inverse_qft_round_trip(d, n):
    for symbol in range(d ** n):
        assert inverse_qft_decode(qft_encode(symbol, d, n)) == symbol
