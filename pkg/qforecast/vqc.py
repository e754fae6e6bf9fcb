"""Variational circuits for the qubit (QBN) and qutrit (QQTN) classifiers.

A circuit is an ordered list of layers. Rotation layers hold one trainable
angle slot per gate; entangle layers hold fixed gates, except that a QQTN
entangle layer shares a single block angle slot across its controlled
rotations. Evaluation is batched: an (m, d**n) matrix of encoded states is
pushed through every gate at once.
"""

import functools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .encoders import amplitude_wires, encode_batch, encode_feature_register
from .errors import DegenerateReadoutError, DomainError
from .gates import GateKind, GateSpec, gate_for
from .market_data import FEATURES, MarketSample, feature_matrix, label_vector
from .qudit_state import QuditRegister, apply_unitary_batch, basis_state, marginals_batch

logger = logging.getLogger(__name__)

READOUT_EPSILON = 1e-12
FD_SCHEMES = ("forward", "central")


class LayerKind(str, Enum):
    ROTATION = "rotation_layer"
    ENTANGLE = "entangle_layer"


@dataclass(frozen=True)
class GatePlacement:
    spec: GateSpec
    slot: Optional[int] = None


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    gates: tuple[GatePlacement, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", LayerKind(self.kind))
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.kind is LayerKind.ROTATION:
            for g in self.gates:
                if not g.spec.kind.is_rotation or g.spec.kind.is_controlled or g.slot is None:
                    raise DomainError("Rotation layers hold only parameterized rotations")
        else:
            slots = {g.slot for g in self.gates if g.slot is not None}
            if len(slots) > 1:
                raise DomainError("Entangle layers may share at most one block angle")


@dataclass(frozen=True)
class Prediction:
    p_up: float
    label_hat: int


@dataclass(frozen=True)
class OperationCount:
    gate_applications: int
    parameter_count: int
    forward_passes_per_gradient: int

    def to_dict(self) -> dict:
        return {
            "gate_applications": self.gate_applications,
            "parameter_count": self.parameter_count,
            "forward_passes_per_gradient": self.forward_passes_per_gradient,
        }


@dataclass(frozen=True)
class ParameterizedCircuit:
    dim: int
    wires: int
    layers: tuple[LayerSpec, ...] = ()
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    readout_wire: int = 0
    encoding: str = "amplitude"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        theta = np.array(self.theta, dtype=np.float64).reshape(-1)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if theta.size != self.slot_count:
            raise DomainError(
                f"theta has {theta.size} entries but the circuit has {self.slot_count} slots"
            )
        if not 0 <= self.readout_wire < self.wires:
            raise DomainError(f"Readout wire {self.readout_wire} out of range")
        for layer in self.layers:
            for g in layer.gates:
                if g.spec.dim != self.dim:
                    raise DomainError(f"Gate dimension {g.spec.dim} != circuit dimension {self.dim}")
                for w in g.spec.wires:
                    if not 0 <= w < self.wires:
                        raise DomainError(f"Gate references wire {w} outside [0, {self.wires})")

    @property
    def slot_count(self) -> int:
        slots = [g.slot for layer in self.layers for g in layer.gates if g.slot is not None]
        return max(slots) + 1 if slots else 0

    @property
    def depth(self) -> int:
        return len(self.layers)

    def with_theta(self, theta: Sequence[float]) -> "ParameterizedCircuit":
        return replace(self, theta=np.array(theta, dtype=np.float64))

    def describe(self) -> dict:
        """JSON-serialisable circuit description."""
        layers = []
        for layer in self.layers:
            gates = []
            for g in layer.gates:
                spec = g.spec
                gates.append({
                    "kind": spec.kind.value,
                    "targets": list(spec.targets),
                    "control": spec.control,
                    "trigger_level": spec.trigger_level,
                    "subspace": list(spec.subspace) if spec.subspace else None,
                    "theta": spec.theta,
                    "slot": g.slot,
                })
            layers.append({"kind": layer.kind.value, "gates": gates})
        return {
            "name": self.name,
            "dim": self.dim,
            "wires": self.wires,
            "readout_wire": self.readout_wire,
            "encoding": self.encoding,
            "layers": layers,
            "theta": self.theta.tolist(),
        }

    @classmethod
    def from_description(cls, doc: dict) -> "ParameterizedCircuit":
        layers = []
        for layer in doc["layers"]:
            gates = tuple(
                GatePlacement(
                    GateSpec(
                        kind=GateKind(g["kind"]),
                        targets=tuple(g["targets"]),
                        dim=doc["dim"],
                        theta=g.get("theta"),
                        subspace=tuple(g["subspace"]) if g.get("subspace") else None,
                        control=g.get("control"),
                        trigger_level=g.get("trigger_level"),
                    ),
                    g.get("slot"),
                )
                for g in layer["gates"]
            )
            layers.append(LayerSpec(LayerKind(layer["kind"]), gates))
        return cls(
            dim=doc["dim"],
            wires=doc["wires"],
            layers=tuple(layers),
            theta=np.array(doc["theta"], dtype=np.float64),
            readout_wire=doc.get("readout_wire", 0),
            encoding=doc.get("encoding", "amplitude"),
            name=doc.get("name", ""),
        )


def _rotation(kind: GateKind, wire: int, dim: int, subspace=None) -> GateSpec:
    return GateSpec(kind=kind, targets=(wire,), dim=dim, subspace=subspace)


def build_qbn_ansatz(
    theta: Optional[Sequence[float]] = None, blocks: int = 3, encoding: str = "amplitude",
) -> ParameterizedCircuit:
    """3 qubits; per block RX, RZ on every qubit then a CNOT ring 0->1->2->0.

    With ``encoding="phase"`` the circuit spans one qubit per market feature.
    """
    if encoding not in ("amplitude", "phase"):
        raise DomainError(f"Unknown encoding scheme '{encoding}'")
    wires = 3 if encoding == "amplitude" else len(FEATURES)
    layers = []
    slot = 0
    for _ in range(blocks):
        placements = []
        for q in range(wires):
            for kind in (GateKind.RX, GateKind.RZ):
                placements.append(GatePlacement(_rotation(kind, q, 2), slot))
                slot += 1
        layers.append(LayerSpec(LayerKind.ROTATION, placements))
        ring = [
            GatePlacement(GateSpec(GateKind.CNOT, targets=((q + 1) % wires,), dim=2, control=q))
            for q in range(wires)
        ]
        layers.append(LayerSpec(LayerKind.ENTANGLE, ring))
    return ParameterizedCircuit(
        dim=2, wires=wires, layers=tuple(layers),
        theta=np.zeros(slot) if theta is None else theta,
        readout_wire=0, encoding=encoding, name="qqbn",
    )


def build_qqtn_ansatz(theta: Optional[Sequence[float]] = None, blocks: int = 2) -> ParameterizedCircuit:
    """5 qutrits; per block RY on levels (0,1) and (1,2) of every qutrit, then a
    ring of CRX gates triggered on control level 2 sharing one block angle."""
    wires = 5
    layers = []
    slot = 0
    for _ in range(blocks):
        placements = []
        for q in range(wires):
            for subspace in ((0, 1), (1, 2)):
                placements.append(GatePlacement(_rotation(GateKind.RY, q, 3, subspace), slot))
                slot += 1
        layers.append(LayerSpec(LayerKind.ROTATION, placements))
        ring = [
            GatePlacement(
                GateSpec(
                    GateKind.CRX, targets=((q + 1) % wires,), dim=3,
                    subspace=(0, 1), control=q, trigger_level=2,
                ),
                slot,
            )
            for q in range(wires)
        ]
        slot += 1
        layers.append(LayerSpec(LayerKind.ENTANGLE, ring))
    return ParameterizedCircuit(
        dim=3, wires=wires, layers=tuple(layers),
        theta=np.zeros(slot) if theta is None else theta,
        readout_wire=0, encoding="phase", name="qqtn",
    )


def init_theta(circuit: ParameterizedCircuit, rng: np.random.Generator) -> ParameterizedCircuit:
    return circuit.with_theta(rng.uniform(-np.pi, np.pi, size=circuit.slot_count))


@functools.lru_cache(maxsize=None)
def _fixed_matrix(spec: GateSpec) -> np.ndarray:
    return gate_for(spec).matrix


def _gate_matrix(g: GatePlacement, theta: np.ndarray) -> np.ndarray:
    if g.slot is None:
        return _fixed_matrix(g.spec)
    return gate_for(g.spec, float(theta[g.slot])).matrix


def _run(circuit: ParameterizedCircuit, states: np.ndarray, theta: np.ndarray) -> np.ndarray:
    for layer in circuit.layers:
        for g in layer.gates:
            matrix = _gate_matrix(g, theta)
            states = apply_unitary_batch(states, circuit.dim, circuit.wires, matrix, g.spec.wires)
    return states


def forward_batch(
    circuit: ParameterizedCircuit, states: np.ndarray, theta: Optional[np.ndarray] = None,
) -> np.ndarray:
    states = np.asarray(states, dtype=np.complex128)
    if states.ndim != 2 or states.shape[1] != circuit.dim ** circuit.wires:
        raise DomainError(
            f"States of shape {states.shape} do not match d={circuit.dim}, n={circuit.wires}"
        )
    return _run(circuit, states, circuit.theta if theta is None else theta)


def forward(circuit: ParameterizedCircuit, reg: QuditRegister) -> QuditRegister:
    if (reg.dim, reg.wires) != (circuit.dim, circuit.wires):
        raise DomainError(
            f"Input d={reg.dim}, n={reg.wires} does not match circuit "
            f"d={circuit.dim}, n={circuit.wires}"
        )
    out = forward_batch(circuit, reg.amps[None, :])
    return QuditRegister(reg.dim, reg.wires, out[0])


def encode_for(circuit: ParameterizedCircuit, X: np.ndarray) -> np.ndarray:
    """Encoded input states for every row of X; all-zero rows become |0...0>."""
    states = encode_batch(X, circuit.encoding, circuit.dim, zero_to_ground=True)
    if states.shape[1] != circuit.dim ** circuit.wires:
        raise DomainError(
            f"{circuit.encoding} encoding of {np.shape(X)[-1]} features does not fit "
            f"d={circuit.dim}, n={circuit.wires}"
        )
    return states


def _encode_one(circuit: ParameterizedCircuit, x: Sequence[float]) -> QuditRegister:
    values = np.asarray(x, dtype=np.float64).reshape(-1)
    if (
        circuit.encoding == "amplitude" and values.size and not np.any(values)
        and amplitude_wires(values.size) == circuit.wires
    ):
        return basis_state(circuit.dim, circuit.wires, 0)
    reg = encode_feature_register(x, circuit.encoding, circuit.dim)
    if reg.wires != circuit.wires:
        raise DomainError(f"Encoded register has {reg.wires} wires; circuit expects {circuit.wires}")
    return reg


def prediction_from_marginals(marginals: Sequence[float]) -> Prediction:
    """Binary readout; level-2 mass of a qutrit is dropped and p0, p1 renormalized."""
    p0, p1 = float(marginals[0]), float(marginals[1])
    if p0 + p1 < READOUT_EPSILON:
        raise DegenerateReadoutError(f"Readout mass on levels 0 and 1 is {p0 + p1!r}")
    p_up = p1 / (p0 + p1)
    return Prediction(p_up=p_up, label_hat=1 if p_up >= 0.5 else 0)


def p_up_from_states(
    circuit: ParameterizedCircuit, states: np.ndarray, theta: Optional[np.ndarray] = None,
) -> np.ndarray:
    """p_up for every already-encoded input row."""
    out = forward_batch(circuit, states, theta)
    marg = marginals_batch(out, circuit.dim, circuit.wires, circuit.readout_wire)
    mass = marg[:, 0] + marg[:, 1]
    if np.any(mass < READOUT_EPSILON):
        raise DegenerateReadoutError("Readout mass on levels 0 and 1 vanishes for some sample")
    return marg[:, 1] / mass


def predict_batch(circuit: ParameterizedCircuit, X: np.ndarray) -> np.ndarray:
    """p_up for every row of X."""
    return p_up_from_states(circuit, encode_for(circuit, X))


def predict(circuit: ParameterizedCircuit, x: Sequence[float]) -> Prediction:
    out = forward(circuit, _encode_one(circuit, x))
    marg = marginals_batch(out.amps[None, :], out.dim, out.wires, circuit.readout_wire)[0]
    return prediction_from_marginals(marg)


def fidelity_loss(circuit: ParameterizedCircuit, sample: MarketSample) -> float:
    """1 - P(readout = label): infidelity to the readout basis state |label>."""
    if sample.label not in (0, 1):
        raise DomainError(f"Label must be 0 or 1, got {sample.label!r}")
    out = forward(circuit, _encode_one(circuit, sample.features))
    marg = marginals_batch(out.amps[None, :], out.dim, out.wires, circuit.readout_wire)[0]
    return float(1.0 - marg[sample.label])


@dataclass(frozen=True)
class _Trace:
    theta: np.ndarray
    inputs: tuple[np.ndarray, ...]
    matrices: tuple[np.ndarray, ...]
    loss: float


class BatchLoss:
    """Mean fidelity loss over fixed encoded inputs, as a function of theta.

    The last full evaluation is kept as a trace of the state entering every
    gate. A theta that differs from it in one slot is evaluated from the first
    gate using that slot, with every other gate matrix reused; the result is
    bitwise identical to a full run. Calls may come from several threads.
    """

    def __init__(self, circuit: ParameterizedCircuit, states: np.ndarray, labels: np.ndarray):
        self.circuit = circuit
        self.states = np.asarray(states, dtype=np.complex128)
        self.labels = np.asarray(labels, dtype=int)
        self._rows = np.arange(len(self.labels))
        self._gates = [g for layer in circuit.layers for g in layer.gates]
        self._first_use: dict[int, int] = {}
        for i, g in enumerate(self._gates):
            if g.slot is not None:
                self._first_use.setdefault(g.slot, i)
        self._trace: Optional[_Trace] = None

    def _apply(self, states: np.ndarray, i: int, matrix: np.ndarray) -> np.ndarray:
        c = self.circuit
        return apply_unitary_batch(states, c.dim, c.wires, matrix, self._gates[i].spec.wires)

    def _value(self, out: np.ndarray) -> float:
        c = self.circuit
        marg = marginals_batch(out, c.dim, c.wires, c.readout_wire)
        return float(np.mean(1.0 - marg[self._rows, self.labels]))

    def _full(self, theta: np.ndarray) -> float:
        states = self.states
        inputs, matrices = [], []
        for i, g in enumerate(self._gates):
            matrix = _gate_matrix(g, theta)
            inputs.append(states)
            matrices.append(matrix)
            states = self._apply(states, i, matrix)
        loss = self._value(states)
        self._trace = _Trace(theta.copy(), tuple(inputs), tuple(matrices), loss)
        return loss

    def _resume(self, trace: _Trace, theta: np.ndarray, slot: int) -> float:
        start = self._first_use.get(slot)
        if start is None:
            return trace.loss
        states = trace.inputs[start]
        for i in range(start, len(self._gates)):
            g = self._gates[i]
            matrix = _gate_matrix(g, theta) if g.slot == slot else trace.matrices[i]
            states = self._apply(states, i, matrix)
        return self._value(states)

    def untraced(self, theta: np.ndarray) -> float:
        """Loss at theta without keeping a trace; for one-off evaluations of large sets."""
        return self._value(_run(self.circuit, self.states, np.asarray(theta, dtype=np.float64)))

    def __call__(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        trace = self._trace
        if trace is not None and trace.theta.shape == theta.shape:
            changed = np.flatnonzero(theta != trace.theta)
            if changed.size == 0:
                return trace.loss
            if changed.size == 1:
                return self._resume(trace, theta, int(changed[0]))
        return self._full(theta)


def make_loss(
    circuit: ParameterizedCircuit, states: np.ndarray, labels: np.ndarray,
) -> Callable[[np.ndarray], float]:
    """Mean fidelity loss over fixed encoded inputs, as a function of theta."""
    return BatchLoss(circuit, states, labels)


def batch_loss(circuit: ParameterizedCircuit, samples: Sequence[MarketSample]) -> float:
    if not samples:
        raise DomainError("batch_loss needs a non-empty batch")
    labels = label_vector(samples)
    if np.any((labels != 0) & (labels != 1)):
        raise DomainError("Labels must be 0 or 1")
    states = encode_for(circuit, feature_matrix(samples))
    return BatchLoss(circuit, states, labels).untraced(circuit.theta)


def finite_difference(
    loss: Callable[[np.ndarray], float],
    theta: Sequence[float],
    delta: float,
    scheme: str = "forward",
    threads: int = 1,
    base_loss: Optional[float] = None,
) -> np.ndarray:
    """Coordinate-wise difference quotients of ``loss`` at ``theta``.

    forward: (C(theta + delta*e_j) - C(theta)) / delta
    central: (C(theta + delta*e_j) - C(theta - delta*e_j)) / (2*delta)
    ``theta`` is never modified; each shifted point works on its own copy.
    """
    if delta <= 0:
        raise DomainError(f"delta must be > 0, got {delta}")
    if scheme not in FD_SCHEMES:
        raise DomainError(f"Unknown finite-difference scheme '{scheme}'. Use {FD_SCHEMES}.")
    theta = np.array(theta, dtype=np.float64)

    def shifted(j: int, step: float) -> float:
        point = theta.copy()
        point[j] += step
        return loss(point)

    def coordinate(j: int) -> float:
        if scheme == "forward":
            return (shifted(j, delta) - base) / delta
        return (shifted(j, delta) - shifted(j, -delta)) / (2 * delta)

    base = loss(theta.copy()) if scheme == "forward" and base_loss is None else base_loss
    if threads > 1 and theta.size > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(coordinate, range(theta.size))), dtype=np.float64)
    return np.array([coordinate(j) for j in range(theta.size)], dtype=np.float64)


def loss_and_gradient(
    circuit: ParameterizedCircuit,
    batch: Sequence[MarketSample],
    delta: float,
    scheme: str = "forward",
    threads: int = 1,
) -> tuple[float, np.ndarray]:
    if not batch:
        raise DomainError("Gradient needs a non-empty batch")
    states = encode_for(circuit, feature_matrix(batch))
    loss = make_loss(circuit, states, label_vector(batch))
    base = loss(circuit.theta.copy())
    grad = finite_difference(loss, circuit.theta, delta, scheme, threads, base_loss=base)
    return base, grad


def finite_diff_gradient(
    circuit: ParameterizedCircuit,
    batch: Sequence[MarketSample],
    delta: float,
    scheme: str = "forward",
    threads: int = 1,
) -> np.ndarray:
    return loss_and_gradient(circuit, batch, delta, scheme, threads)[1]


def count_operations(circuit: ParameterizedCircuit, scheme: str = "forward") -> OperationCount:
    params = circuit.slot_count
    per_gradient = 1 + params if scheme == "forward" else 2 * params
    return OperationCount(
        gate_applications=sum(len(layer.gates) for layer in circuit.layers),
        parameter_count=params,
        forward_passes_per_gradient=per_gradient,
    )
