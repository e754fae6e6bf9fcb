"""Encoding of classical feature vectors into qudit registers.

Schemes:
  amplitude  zero-pad to 2**n, L2-normalize, write as real amplitudes (qubits)
  phase      one feature per wire, tensor product of single-wire encodings
  basis      one-hot basis state for an integer symbol
  qft        Fourier transform of the basis encoding
"""

import math
from typing import Sequence

import numpy as np

from .errors import CapacityError, DomainError, EncodingError
from .gates import qft, rotation
from .qudit_state import QuditRegister, apply_unitary, basis_state, born_probabilities

SCHEMES = ("amplitude", "phase")


def _as_features(x: Sequence[float]) -> np.ndarray:
    values = np.asarray(x, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise EncodingError("Feature vector is empty.")
    if not np.all(np.isfinite(values)):
        raise EncodingError("Feature values must be finite.")
    return values


def _check_unit(v: float) -> float:
    if not isinstance(v, (int, float, np.floating, np.integer)) or math.isnan(v):
        raise DomainError(f"Feature value must be a number, got {v!r}")
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"Feature value {v} outside [0, 1]")
    return float(v)


def amplitude_wires(f: int) -> int:
    """Smallest qubit count whose 2**n amplitudes hold ``f`` features."""
    return max(1, math.ceil(math.log2(f)))


def _pad_and_normalize(values: np.ndarray, size: int, zero_to_ground: bool = False) -> np.ndarray:
    if values.shape[-1] > size:
        raise CapacityError(f"{values.shape[-1]} features do not fit into {size} amplitudes")
    padded = np.zeros(values.shape[:-1] + (size,))
    padded[..., : values.shape[-1]] = values
    norms = np.linalg.norm(padded, axis=-1, keepdims=True)
    if zero_to_ground:
        empty = norms[..., 0] == 0
        padded[empty, 0] = 1.0
        norms[empty] = 1.0
    if np.any(norms == 0):
        raise EncodingError("Cannot amplitude-encode an all-zero feature vector.")
    return padded / norms


def amplitude_encode(x: Sequence[float], d: int = 2, n: int = 3) -> QuditRegister:
    values = _as_features(x)
    return QuditRegister(d, n, _pad_and_normalize(values, d ** n))


def phase_encode_qubit(v: float) -> QuditRegister:
    """cos(pi*v/2)|0> + sin(pi*v/2)|1>."""
    half = math.pi * _check_unit(v) / 2
    return QuditRegister(2, 1, np.array([math.cos(half), math.sin(half)]))


def phase_encode_qutrit(v: float) -> QuditRegister:
    """Y-rotation by pi*v on levels (0,1), then on levels (1,2), applied to |0>."""
    angle = math.pi * _check_unit(v)
    reg = basis_state(3, 1, 0)
    reg = apply_unitary(reg, rotation("y", angle, 3, (0, 1)), [0])
    return apply_unitary(reg, rotation("y", angle, 3, (1, 2)), [0])


def _phase_columns(values: np.ndarray, d: int) -> np.ndarray:
    """Single-wire phase encodings in closed form: (..., f) -> (..., f, d)."""
    half = np.pi * values / 2
    c, s = np.cos(half), np.sin(half)
    if d == 2:
        return np.stack([c, s], axis=-1)
    return np.stack([c, s * c, s * s], axis=-1)


def _kron_rows(columns: np.ndarray) -> np.ndarray:
    """Row-wise Kronecker product over the feature axis: (m, f, d) -> (m, d**f)."""
    m = columns.shape[0]
    state = columns[:, 0, :]
    for i in range(1, columns.shape[1]):
        state = (state[:, :, None] * columns[:, i, None, :]).reshape(m, -1)
    return state


def encode_feature_register(x: Sequence[float], scheme: str, d: int) -> QuditRegister:
    values = _as_features(x)
    if scheme == "amplitude":
        if d != 2:
            raise DomainError("Amplitude encoding is defined for qubits (d=2) only.")
        return amplitude_encode(values, 2, amplitude_wires(values.size))
    if scheme == "phase":
        if d not in (2, 3):
            raise DomainError(f"Unsupported level count d={d}")
        single = phase_encode_qubit if d == 2 else phase_encode_qutrit
        reg = single(values[0])
        for v in values[1:]:
            reg = reg.tensor(single(v))
        return reg
    raise DomainError(f"Unknown encoding scheme '{scheme}'. Use one of {SCHEMES}.")


def encode_batch(X: np.ndarray, scheme: str, d: int, zero_to_ground: bool = False) -> np.ndarray:
    """Encode every row of an (m, f) feature matrix; returns (m, size) amplitudes.

    With ``zero_to_ground`` an all-zero row amplitude-encodes to |0...0>
    instead of raising; features clamped to the bottom of the training range
    produce such rows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not np.all(np.isfinite(X)):
        raise EncodingError("Feature values must be finite.")
    if scheme == "amplitude":
        if d != 2:
            raise DomainError("Amplitude encoding is defined for qubits (d=2) only.")
        size = 2 ** amplitude_wires(X.shape[1])
        return _pad_and_normalize(X, size, zero_to_ground).astype(np.complex128)
    if scheme == "phase":
        if np.any((X < 0) | (X > 1)):
            raise DomainError("Phase encoding requires features in [0, 1].")
        return _kron_rows(_phase_columns(X, d)).astype(np.complex128)
    raise DomainError(f"Unknown encoding scheme '{scheme}'. Use one of {SCHEMES}.")


def basis_encode(symbol: int, d: int, n: int) -> QuditRegister:
    return basis_state(d, n, symbol)


def qft_encode(symbol: int, d: int, n: int) -> QuditRegister:
    reg = basis_encode(symbol, d, n)
    return apply_unitary(reg, qft(d, n), list(range(n)))


def inverse_qft_decode(reg: QuditRegister) -> int:
    """Recover the symbol of a qft_encode'd register via the inverse transform."""
    restored = apply_unitary(reg, qft(reg.dim, reg.wires).dagger(), list(range(reg.wires)))
    return int(np.argmax(born_probabilities(restored)))
