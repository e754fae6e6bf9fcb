"""Unitary gate constructors for qubits (d=2) and qutrits (d=3)."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError

UNITARITY_TOLERANCE = 1e-9
MAX_QFT_SIZE = 256

QUTRIT_SUBSPACES = ((0, 1), (1, 2), (0, 2))


class GateKind(str, Enum):
    H = "h"
    X = "x"
    Y = "y"
    Z = "z"
    CNOT = "cnot"
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    CRX = "crx"
    CRY = "cry"
    CRZ = "crz"
    QFT = "qft"

    @property
    def axis(self) -> Optional[str]:
        return self.value[-1] if self.is_rotation else None

    @property
    def is_rotation(self) -> bool:
        return self in _ROTATIONS or self in _CONTROLLED_ROTATIONS

    @property
    def is_controlled(self) -> bool:
        return self is GateKind.CNOT or self in _CONTROLLED_ROTATIONS


_ROTATIONS = {GateKind.RX, GateKind.RY, GateKind.RZ}
_CONTROLLED_ROTATIONS = {GateKind.CRX, GateKind.CRY, GateKind.CRZ}


def dagger(matrix: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(matrix)).T


def is_unitary(matrix: np.ndarray, tol: float = UNITARITY_TOLERANCE) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    residual = dagger(matrix) @ matrix - np.eye(matrix.shape[0])
    return bool(np.max(np.abs(residual)) < tol)


@dataclass(frozen=True)
class GateMatrix:
    """A unitary matrix; unitarity is checked on construction."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.complex128)
        if not is_unitary(matrix):
            raise DomainError(f"Matrix of shape {matrix.shape} is not unitary")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "GateMatrix":
        return GateMatrix(dagger(self.matrix))

    def __matmul__(self, other: "GateMatrix") -> "GateMatrix":
        return GateMatrix(self.matrix @ other.matrix)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


@dataclass(frozen=True)
class GateSpec:
    """Placement of one gate: kind, angle, qutrit subspace, targets and control."""

    kind: GateKind
    targets: tuple[int, ...]
    dim: int = 2
    theta: Optional[float] = None
    subspace: Optional[tuple[int, int]] = None
    control: Optional[int] = None
    trigger_level: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.subspace is not None:
            object.__setattr__(self, "subspace", tuple(self.subspace))
            if self.dim != 3 or not self.kind.is_rotation:
                raise DomainError("subspace is only valid for qutrit rotations")
        if self.kind.is_controlled and self.control is None:
            raise DomainError(f"{self.kind.value} requires a control wire")
        if self.control is not None and self.control in self.targets:
            raise DomainError(f"Control wire {self.control} is also a target")

    @property
    def wires(self) -> tuple[int, ...]:
        if self.control is None:
            return self.targets
        return (self.control,) + self.targets


def _check_dim(d: int) -> None:
    if d not in (2, 3):
        raise DomainError(f"Unsupported level count d={d}. Supported: (2, 3)")


def _check_subspace(d: int, subspace: tuple[int, int]) -> tuple[int, int]:
    _check_dim(d)
    subspace = tuple(subspace)
    allowed = ((0, 1),) if d == 2 else QUTRIT_SUBSPACES
    if subspace not in allowed:
        raise DomainError(f"Invalid subspace {subspace} for d={d}. Allowed: {allowed}")
    return subspace


def qft(d: int, n: int) -> GateMatrix:
    """Fourier matrix on d**n levels: entries w^(jk)/sqrt(d**n), w = exp(2*pi*i/d**n)."""
    _check_dim(d)
    size = d ** n
    if size > MAX_QFT_SIZE:
        raise DomainError(f"QFT size {size} exceeds the cap of {MAX_QFT_SIZE}")
    idx = np.arange(size)
    exponent = np.outer(idx, idx) % size
    return GateMatrix(np.exp(2j * np.pi * exponent / size) / np.sqrt(size))


def hadamard(d: int) -> GateMatrix:
    """Standard Hadamard for d=2; the 3-level Fourier matrix for d=3."""
    _check_dim(d)
    if d == 2:
        return GateMatrix(np.array([[1, 1], [1, -1]]) / np.sqrt(2))
    return qft(3, 1)


def pauli_x(d: int) -> GateMatrix:
    """Cyclic shift |j> -> |j+1 mod d>."""
    _check_dim(d)
    matrix = np.zeros((d, d))
    for j in range(d):
        matrix[(j + 1) % d, j] = 1
    return GateMatrix(matrix)


def pauli_y(d: int) -> GateMatrix:
    if d != 2:
        raise DomainError("pauli_y is only defined for d=2")
    return GateMatrix(np.array([[0, -1j], [1j, 0]]))


def pauli_z(d: int) -> GateMatrix:
    """diag(1, -1) for qubits; the clock matrix diag(1, w, w^2) for qutrits."""
    _check_dim(d)
    return GateMatrix(np.diag(np.exp(2j * np.pi * np.arange(d) / d)))


def cnot(d: int) -> GateMatrix:
    """Controlled modular shift |c, t> -> |c, t + c mod d>, control on the first wire."""
    _check_dim(d)
    matrix = np.zeros((d * d, d * d))
    for c in range(d):
        for t in range(d):
            matrix[c * d + (t + c) % d, c * d + t] = 1
    return GateMatrix(matrix)


def _su2(axis: str, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "y":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if axis == "z":
        return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    raise DomainError(f"Unknown rotation axis '{axis}'. Use x, y or z.")


def _embedded_rotation(axis: str, theta: float, d: int, subspace: tuple[int, int]) -> np.ndarray:
    j, k = _check_subspace(d, subspace)
    block = _su2(axis, theta)
    matrix = np.eye(d, dtype=np.complex128)
    matrix[np.ix_([j, k], [j, k])] = block
    return matrix


def rotation(axis: str, theta: float, d: int, subspace: tuple[int, int] = (0, 1)) -> GateMatrix:
    """exp(-i*theta*sigma_axis/2) on the two levels of ``subspace``, identity elsewhere."""
    return GateMatrix(_embedded_rotation(axis, theta, d, subspace))


def controlled_rotation(
    axis: str,
    theta: float,
    d: int,
    subspace: tuple[int, int] = (0, 1),
    trigger_level: Optional[int] = None,
) -> GateMatrix:
    """Rotate the target wire iff the control wire (first) is in ``trigger_level``."""
    block = _embedded_rotation(axis, theta, d, subspace)
    if trigger_level is None:
        trigger_level = d - 1
    if not 0 <= trigger_level < d:
        raise DomainError(f"Trigger level {trigger_level} out of range [0, {d})")
    matrix = np.zeros((d * d, d * d), dtype=np.complex128)
    for level in range(d):
        projector = np.zeros((d, d))
        projector[level, level] = 1
        matrix += np.kron(projector, block if level == trigger_level else np.eye(d))
    return GateMatrix(matrix)


def gate_for(spec: GateSpec, theta: Optional[float] = None) -> GateMatrix:
    """Build the matrix for a placement; ``theta`` overrides ``spec.theta``."""
    kind = spec.kind
    angle = spec.theta if theta is None else theta
    if kind.is_rotation and angle is None:
        raise DomainError(f"{kind.value} needs an angle")
    subspace = spec.subspace or (0, 1)
    if kind is GateKind.H:
        return hadamard(spec.dim)
    if kind is GateKind.X:
        return pauli_x(spec.dim)
    if kind is GateKind.Y:
        return pauli_y(spec.dim)
    if kind is GateKind.Z:
        return pauli_z(spec.dim)
    if kind is GateKind.CNOT:
        return cnot(spec.dim)
    if kind is GateKind.QFT:
        return qft(spec.dim, len(spec.targets))
    if kind in _ROTATIONS:
        return rotation(kind.axis, angle, spec.dim, subspace)
    return controlled_rotation(kind.axis, angle, spec.dim, subspace, spec.trigger_level)
