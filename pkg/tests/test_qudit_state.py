import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qforecast.errors import DomainError
from qforecast.gates import cnot, hadamard, pauli_x, rotation
from qforecast.qudit_state import (
    QuditRegister,
    apply_unitary,
    basis_state,
    born_probabilities,
    estimate_marginal,
    fidelity,
    from_amplitudes,
    marginal_probability,
    renormalize,
    sample,
    sample_many,
)


def random_register(rng, d, n):
    vec = rng.normal(size=d ** n) + 1j * rng.normal(size=d ** n)
    return renormalize(d, n, vec)


def test_basis_state_examples():
    np.testing.assert_array_equal(basis_state(2, 1, 0).amps, [1, 0])
    np.testing.assert_array_equal(basis_state(3, 1, 2).amps, [0, 0, 1])
    reg = basis_state(2, 3, 5)
    assert reg.amps[5] == 1
    assert np.count_nonzero(reg.amps) == 1


def test_basis_state_out_of_range():
    with pytest.raises(DomainError, match="out of range"):
        basis_state(2, 2, 4)


def test_unsupported_dimension():
    with pytest.raises(DomainError, match="Unsupported"):
        basis_state(4, 1, 0)


def test_wire_cap():
    with pytest.raises(DomainError, match="At most 8"):
        basis_state(3, 9, 0)


def test_unnormalized_register_rejected():
    with pytest.raises(DomainError, match="not normalized"):
        from_amplitudes(2, 1, [1, 1])


def test_non_finite_register_rejected():
    with pytest.raises(DomainError, match="finite"):
        QuditRegister(2, 1, np.array([np.nan, 0]))


def test_register_is_immutable():
    reg = basis_state(2, 1, 0)
    with pytest.raises(ValueError):
        reg.amps[0] = 0


def test_renormalize_zero_vector():
    with pytest.raises(DomainError):
        renormalize(2, 1, [0, 0])


def test_pauli_x_flips_qubit():
    out = apply_unitary(basis_state(2, 1, 0), pauli_x(2), [0])
    np.testing.assert_allclose(out.amps, [0, 1], atol=1e-15)


def test_hadamard_superposition():
    out = apply_unitary(basis_state(2, 1, 0), hadamard(2), [0])
    np.testing.assert_allclose(out.amps, [1 / np.sqrt(2)] * 2, atol=1e-15)


def test_qutrit_rz_pi_on_zero():
    out = apply_unitary(basis_state(3, 1, 0), rotation("z", np.pi, 3, (0, 1)), [0])
    np.testing.assert_allclose(out.amps, [-1j, 0, 0], atol=1e-12)


def test_apply_on_second_wire_is_big_endian():
    # X on wire 1 of |00> gives |01>, index 1
    out = apply_unitary(basis_state(2, 2, 0), pauli_x(2), [1])
    assert born_probabilities(out)[1] == pytest.approx(1.0)


def test_two_wire_gate_wire_order():
    # control on wire 1, target on wire 0: |01> -> |11>
    out = apply_unitary(basis_state(2, 2, 1), cnot(2), [1, 0])
    assert born_probabilities(out)[3] == pytest.approx(1.0)


def test_apply_matches_kronecker_oracle():
    rng = np.random.default_rng(3)
    reg = random_register(rng, 3, 3)
    gate = rotation("x", 0.7, 3, (1, 2)).matrix
    full = np.kron(np.kron(np.eye(3), gate), np.eye(3))
    out = apply_unitary(reg, gate, [1])
    np.testing.assert_allclose(out.amps, full @ reg.amps, atol=1e-12)


@pytest.mark.parametrize("d,n,k", [(2, 3, 1), (2, 3, 2), (3, 4, 2), (3, 5, 1)])
def test_adjacent_wires_match_kronecker_oracle(d, n, k):
    rng = np.random.default_rng(d * 10 + n)
    gate = np.linalg.qr(rng.normal(size=(d ** k, d ** k)) + 1j * rng.normal(size=(d ** k, d ** k)))[0]
    reg = random_register(rng, d, n)
    for first in range(n - k + 1):
        full = np.kron(np.kron(np.eye(d ** first), gate), np.eye(d ** (n - first - k)))
        out = apply_unitary(reg, gate, list(range(first, first + k)))
        np.testing.assert_allclose(out.amps, full @ reg.amps, atol=1e-12)


def test_non_adjacent_wires_agree_with_swapped_order():
    rng = np.random.default_rng(5)
    reg = random_register(rng, 2, 3)
    # CNOT with control 0, target 2 equals swapping wires 1 and 2 around an adjacent CNOT
    swap = np.eye(4)[[0, 2, 1, 3]]
    direct = apply_unitary(reg, cnot(2), [0, 2])
    around = apply_unitary(apply_unitary(apply_unitary(reg, swap, [1, 2]), cnot(2), [0, 1]), swap, [1, 2])
    np.testing.assert_allclose(direct.amps, around.amps, atol=1e-12)


def test_apply_dimension_mismatch():
    with pytest.raises(DomainError, match="does not act"):
        apply_unitary(basis_state(2, 2, 0), cnot(2), [0])


def test_apply_repeated_wire():
    with pytest.raises(DomainError, match="Repeated wire"):
        apply_unitary(basis_state(2, 2, 0), cnot(2), [1, 1])


def test_apply_leaves_input_untouched():
    reg = basis_state(2, 1, 0)
    apply_unitary(reg, pauli_x(2), [0])
    np.testing.assert_array_equal(reg.amps, [1, 0])


@settings(max_examples=100, deadline=None)
@given(
    theta=st.floats(-2 * np.pi, 2 * np.pi),
    axis=st.sampled_from("xyz"),
    subspace=st.sampled_from([(0, 1), (1, 2), (0, 2)]),
    seed=st.integers(0, 2 ** 32 - 1),
)
def test_rotation_preserves_norm_and_is_reversible(theta, axis, subspace, seed):
    rng = np.random.default_rng(seed)
    reg = random_register(rng, 3, 2)
    gate = rotation(axis, theta, 3, subspace)
    out = apply_unitary(reg, gate, [1])
    assert abs(np.sum(born_probabilities(out)) - 1) < 1e-9
    back = apply_unitary(out, gate.dagger(), [1])
    np.testing.assert_allclose(back.amps, reg.amps, atol=1e-9)


def test_born_probabilities_examples():
    plus = from_amplitudes(2, 1, [1 / np.sqrt(2), 1 / np.sqrt(2)])
    np.testing.assert_allclose(born_probabilities(plus), [0.5, 0.5])
    np.testing.assert_allclose(born_probabilities(basis_state(3, 1, 2)), [0, 0, 1])
    printed = renormalize(2, 1, [0.832, 0.554])
    np.testing.assert_allclose(born_probabilities(printed), [0.692, 0.307], atol=1e-3)


def test_marginal_examples():
    assert marginal_probability(basis_state(2, 2, 1), 1, 1) == 1.0
    uniform = from_amplitudes(2, 2, [0.5] * 4)
    assert marginal_probability(uniform, 0, 0) == pytest.approx(0.5)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_marginal_matches_brute_force(d, n):
    rng = np.random.default_rng(100 * d + n)
    for _ in range(200 // 6 + 1):
        reg = random_register(rng, d, n)
        probs = born_probabilities(reg)
        for wire in range(n):
            for level in range(d):
                expected = sum(
                    probs[i]
                    for i, digits in enumerate(itertools.product(range(d), repeat=n))
                    if digits[wire] == level
                )
                assert abs(marginal_probability(reg, wire, level) - expected) <= 1e-12


def test_marginal_out_of_range():
    with pytest.raises(DomainError):
        marginal_probability(basis_state(2, 2, 0), 2, 0)
    with pytest.raises(DomainError):
        marginal_probability(basis_state(2, 2, 0), 0, 2)


def test_fidelity_examples():
    zero, one = basis_state(2, 1, 0), basis_state(2, 1, 1)
    plus = from_amplitudes(2, 1, [1 / np.sqrt(2), 1 / np.sqrt(2)])
    assert fidelity(zero, zero) == pytest.approx(1.0)
    assert fidelity(zero, one) == 0.0
    assert fidelity(zero, plus) == pytest.approx(0.5)


def test_fidelity_symmetric():
    rng = np.random.default_rng(7)
    a, b = random_register(rng, 3, 2), random_register(rng, 3, 2)
    assert abs(fidelity(a, b) - fidelity(b, a)) < 1e-12
    assert abs(fidelity(a, a) - 1.0) < 1e-12


def test_fidelity_shape_mismatch():
    with pytest.raises(DomainError, match="Shape mismatch"):
        fidelity(basis_state(2, 1, 0), basis_state(3, 1, 0))


def test_sample_point_mass():
    rng = np.random.default_rng(0)
    one = basis_state(2, 1, 1)
    assert all(sample(one, rng) == 1 for _ in range(20))


def test_sample_frequency():
    plus = from_amplitudes(2, 1, [1 / np.sqrt(2), 1 / np.sqrt(2)])
    draws = sample_many(plus, 10_000, np.random.default_rng(11))
    assert abs(np.mean(draws == 0) - 0.5) < 0.02


def test_sample_deterministic_given_seed():
    reg = random_register(np.random.default_rng(1), 2, 3)
    a = sample_many(reg, 50, np.random.default_rng(42))
    b = sample_many(reg, 50, np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)


def test_estimate_marginal_converges():
    reg = random_register(np.random.default_rng(5), 3, 2)
    exact = marginal_probability(reg, 1, 2)
    estimate = estimate_marginal(reg, 1, 2, 20_000, np.random.default_rng(9))
    assert abs(estimate - exact) < 0.02
