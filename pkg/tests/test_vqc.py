import json

import numpy as np
import pytest

from qforecast import vqc
from qforecast.encoders import encode_feature_register
from qforecast.errors import DegenerateReadoutError, DomainError
from qforecast.gates import GateKind, GateSpec
from qforecast.market_data import MarketSample
from qforecast.qudit_state import basis_state, born_probabilities


def random_samples(rng, m):
    return [
        MarketSample(tuple(rng.uniform(0.05, 1.0, size=5).tolist()), int(rng.integers(0, 2)))
        for _ in range(m)
    ]


@pytest.fixture
def qbn():
    return vqc.init_theta(vqc.build_qbn_ansatz(), np.random.default_rng(1))


@pytest.fixture
def qqtn():
    return vqc.init_theta(vqc.build_qqtn_ansatz(), np.random.default_rng(2))


def one_param_circuit(theta=0.3):
    """RY(theta) on a single qubit, readout on that qubit."""
    layer = vqc.LayerSpec(
        vqc.LayerKind.ROTATION,
        [vqc.GatePlacement(GateSpec(GateKind.RY, targets=(0,)), 0)],
    )
    return vqc.ParameterizedCircuit(dim=2, wires=1, layers=(layer,), theta=[theta], encoding="phase")


def test_qbn_structure():
    circuit = vqc.build_qbn_ansatz()
    assert circuit.slot_count == 18
    assert circuit.depth == 6
    assert circuit.readout_wire == 0
    assert [layer.kind for layer in circuit.layers] == [vqc.LayerKind.ROTATION, vqc.LayerKind.ENTANGLE] * 3


def test_qqtn_structure():
    circuit = vqc.build_qqtn_ansatz()
    assert circuit.slot_count == 22
    assert circuit.depth == 4
    assert circuit.dim == 3 and circuit.wires == 5
    for layer in circuit.layers:
        if layer.kind is vqc.LayerKind.ENTANGLE:
            assert {g.spec.trigger_level for g in layer.gates} == {2}
            assert len({g.slot for g in layer.gates}) == 1


@pytest.mark.parametrize("builder,d,n", [(vqc.build_qbn_ansatz, 2, 3), (vqc.build_qqtn_ansatz, 3, 5)])
def test_zero_angles_are_identity_on_zero_state(builder, d, n):
    out = vqc.forward(builder(), basis_state(d, n, 0))
    assert born_probabilities(out)[0] == pytest.approx(1.0, abs=1e-12)


def test_theta_length_checked():
    with pytest.raises(DomainError, match="slots"):
        vqc.build_qbn_ansatz(theta=np.zeros(17))


def test_layer_kind_invariants():
    with pytest.raises(DomainError, match="Rotation layers"):
        vqc.LayerSpec(
            vqc.LayerKind.ROTATION,
            [vqc.GatePlacement(GateSpec(GateKind.CNOT, targets=(1,), control=0))],
        )


def test_circuit_rejects_out_of_range_wire():
    layer = vqc.LayerSpec(
        vqc.LayerKind.ENTANGLE, [vqc.GatePlacement(GateSpec(GateKind.CNOT, targets=(3,), control=0))],
    )
    with pytest.raises(DomainError, match="outside"):
        vqc.ParameterizedCircuit(dim=2, wires=2, layers=(layer,))


def test_empty_circuit_returns_input():
    circuit = vqc.ParameterizedCircuit(dim=2, wires=2)
    reg = encode_feature_register([0.3, 0.6], "phase", 2)
    np.testing.assert_allclose(vqc.forward(circuit, reg).amps, reg.amps)
    assert vqc.count_operations(circuit).gate_applications == 0


def test_single_hadamard_layer():
    layer = vqc.LayerSpec(vqc.LayerKind.ENTANGLE, [vqc.GatePlacement(GateSpec(GateKind.H, targets=(0,)))])
    circuit = vqc.ParameterizedCircuit(dim=2, wires=1, layers=(layer,))
    out = vqc.forward(circuit, basis_state(2, 1, 0))
    np.testing.assert_allclose(born_probabilities(out), [0.5, 0.5], atol=1e-12)


def test_forward_dimension_mismatch(qbn):
    with pytest.raises(DomainError, match="does not match"):
        vqc.forward(qbn, basis_state(3, 3, 0))


def test_forward_preserves_norm():
    rng = np.random.default_rng(5)
    for builder, d, n in ((vqc.build_qbn_ansatz, 2, 3), (vqc.build_qqtn_ansatz, 3, 5)):
        for _ in range(100):
            circuit = vqc.init_theta(builder(), rng)
            reg = basis_state(d, n, int(rng.integers(0, d ** n)))
            out = vqc.forward(circuit, reg)
            assert abs(np.sum(born_probabilities(out)) - 1) < 1e-9


def test_predict_zero_angles_qbn():
    prediction = vqc.predict(vqc.build_qbn_ansatz(), [1, 0, 0, 0, 0])
    assert prediction.p_up == pytest.approx(0.0, abs=1e-12)
    assert prediction.label_hat == 0


def test_prediction_from_marginals():
    assert vqc.prediction_from_marginals([0.0, 1.0]).p_up == 1.0
    tie = vqc.prediction_from_marginals([0.2, 0.2, 0.6])
    assert tie.p_up == pytest.approx(0.5)
    assert tie.label_hat == 1
    with pytest.raises(DegenerateReadoutError):
        vqc.prediction_from_marginals([0.0, 0.0, 1.0])


def test_predict_deterministic(qqtn):
    x = [0.1, 0.5, 0.9, 0.3, 0.7]
    assert vqc.predict(qqtn, x) == vqc.predict(qqtn, x)


def test_predict_batch_matches_single(qbn, qqtn):
    X = np.random.default_rng(8).uniform(0.05, 1.0, size=(7, 5))
    for circuit in (qbn, qqtn):
        batch = vqc.predict_batch(circuit, X)
        single = [vqc.predict(circuit, row).p_up for row in X]
        np.testing.assert_allclose(batch, single, atol=1e-12)


def test_fidelity_loss_examples():
    circuit = vqc.ParameterizedCircuit(dim=2, wires=1, encoding="phase")
    assert vqc.fidelity_loss(circuit, MarketSample((1.0,), 1)) == pytest.approx(0.0, abs=1e-15)
    assert vqc.fidelity_loss(circuit, MarketSample((0.0,), 1)) == pytest.approx(1.0)
    assert vqc.fidelity_loss(circuit, MarketSample((0.5,), 1)) == pytest.approx(0.5)


def test_fidelity_loss_complementary(qbn):
    for sample in random_samples(np.random.default_rng(3), 10):
        up = vqc.fidelity_loss(qbn, MarketSample(sample.features, 1))
        down = vqc.fidelity_loss(qbn, MarketSample(sample.features, 0))
        assert 0.0 <= up <= 1.0
        assert up + down == pytest.approx(1.0, abs=1e-12)


def test_batch_loss(qbn, qqtn):
    samples = random_samples(np.random.default_rng(6), 32)
    for circuit in (qbn, qqtn):
        assert vqc.batch_loss(circuit, samples[:1]) == pytest.approx(vqc.fidelity_loss(circuit, samples[0]), abs=1e-12)
        oracle = sum(vqc.fidelity_loss(circuit, s) for s in samples) / len(samples)
        assert abs(vqc.batch_loss(circuit, samples) - oracle) <= 1e-12


def test_batch_loss_two_extremes():
    circuit = vqc.ParameterizedCircuit(dim=2, wires=1, encoding="phase")
    samples = [MarketSample((1.0,), 1), MarketSample((1.0,), 0)]
    assert vqc.batch_loss(circuit, samples) == pytest.approx(0.5)


def test_batch_loss_empty(qbn):
    with pytest.raises(DomainError, match="non-empty"):
        vqc.batch_loss(qbn, [])


def test_finite_difference_quadratic():
    grad = vqc.finite_difference(lambda t: float(t[0] ** 2), [1.0], 1e-3)
    assert grad[0] == pytest.approx(2.001, abs=1e-9)


def test_finite_difference_constant_loss():
    np.testing.assert_array_equal(vqc.finite_difference(lambda t: 0.25, np.zeros(3), 1e-3), 0.0)


def test_finite_difference_rejects_bad_args():
    with pytest.raises(DomainError, match="delta"):
        vqc.finite_difference(lambda t: 0.0, [0.0], 0.0)
    with pytest.raises(DomainError, match="scheme"):
        vqc.finite_difference(lambda t: 0.0, [0.0], 1e-3, scheme="backward")


def test_qbn_forward_matches_central():
    rng = np.random.default_rng(12)
    samples = random_samples(rng, 16)
    for _ in range(10):
        circuit = vqc.init_theta(vqc.build_qbn_ansatz(), rng)
        forward = vqc.finite_diff_gradient(circuit, samples, 1e-4, "forward")
        central = vqc.finite_diff_gradient(circuit, samples, 1e-4, "central")
        assert np.max(np.abs(forward - central)) <= 1e-3


def test_gradient_leaves_theta_untouched(qqtn):
    before = qqtn.theta.copy()
    vqc.finite_diff_gradient(qqtn, random_samples(np.random.default_rng(0), 4), 1e-3)
    assert before.tobytes() == qqtn.theta.tobytes()


def test_gradient_independent_of_threads(qqtn):
    samples = random_samples(np.random.default_rng(1), 8)
    serial = vqc.finite_diff_gradient(qqtn, samples, 1e-3, threads=1)
    parallel = vqc.finite_diff_gradient(qqtn, samples, 1e-3, threads=4)
    assert serial.tobytes() == parallel.tobytes()


def test_one_parameter_gradient_matches_analytic():
    # |0> -> RY(theta): P(readout = 1) = sin^2(theta/2), so d(1 - P)/dtheta = -sin(theta)/2
    delta = 1e-3
    sample = MarketSample((0.0,), 1)
    for theta in (0.3, 1.1, 2.0, -0.7):
        grad = vqc.finite_diff_gradient(one_param_circuit(theta), [sample], delta)
        assert abs(grad[0] + np.sin(theta) / 2) <= 10 * delta


def test_count_operations():
    qbn_counts = vqc.count_operations(vqc.build_qbn_ansatz())
    assert qbn_counts.gate_applications == 27
    assert qbn_counts.parameter_count == 18
    assert qbn_counts.forward_passes_per_gradient == 19
    qqtn_counts = vqc.count_operations(vqc.build_qqtn_ansatz())
    assert qqtn_counts.gate_applications == 30
    assert qqtn_counts.forward_passes_per_gradient == 23
    assert vqc.count_operations(vqc.build_qqtn_ansatz(), "central").forward_passes_per_gradient == 44


def test_phase_encoded_qbn_variant():
    circuit = vqc.build_qbn_ansatz(encoding="phase")
    assert circuit.wires == 5
    assert circuit.slot_count == 30
    p_up = vqc.predict_batch(circuit, np.zeros((2, 5)))
    np.testing.assert_allclose(p_up, 0.0, atol=1e-12)


def test_description_round_trip(qqtn):
    doc = json.loads(json.dumps(qqtn.describe()))
    restored = vqc.ParameterizedCircuit.from_description(doc)
    assert restored.layers == qqtn.layers
    np.testing.assert_array_equal(restored.theta, qqtn.theta)
    X = np.random.default_rng(2).uniform(size=(3, 5))
    np.testing.assert_array_equal(vqc.predict_batch(restored, X), vqc.predict_batch(qqtn, X))


def test_all_zero_row_encodes_to_ground_state(qbn):
    states = vqc.encode_for(qbn, np.zeros((2, 5)))
    ground = basis_state(2, 3, 0).amps
    np.testing.assert_array_equal(states[0], ground)
    np.testing.assert_array_equal(states[1], ground)


def test_all_zero_row_predicts_like_the_ground_state(qbn):
    X = np.vstack([np.zeros(5), np.random.default_rng(4).uniform(0.05, 1.0, size=5)])
    batch = vqc.predict_batch(qbn, X)
    assert vqc.predict(qbn, X[0]).p_up == pytest.approx(batch[0], abs=1e-12)
    ground = vqc.forward(qbn, basis_state(2, 3, 0))
    p0, p1 = born_probabilities(ground).reshape(2, 4).sum(axis=1)
    assert batch[0] == pytest.approx(p1 / (p0 + p1), abs=1e-12)
    loss = vqc.fidelity_loss(qbn, MarketSample((0.0,) * 5, 1))
    assert loss == pytest.approx(1.0 - p1, abs=1e-12)


def test_batch_loss_resume_matches_full_run(qbn, qqtn):
    samples = random_samples(np.random.default_rng(11), 12)
    labels = np.array([s.label for s in samples])
    X = np.array([s.features for s in samples])
    for circuit in (qbn, qqtn):
        states = vqc.encode_for(circuit, X)
        loss = vqc.make_loss(circuit, states, labels)
        reference = vqc.BatchLoss(circuit, states, labels)
        assert loss(circuit.theta) == reference.untraced(circuit.theta)
        for j in (0, circuit.slot_count // 2, circuit.slot_count - 1):
            shifted = circuit.theta.copy()
            shifted[j] += 1e-3
            assert loss(shifted) == reference.untraced(shifted)
        moved = circuit.theta + 0.1
        assert loss(moved) == reference.untraced(moved)
