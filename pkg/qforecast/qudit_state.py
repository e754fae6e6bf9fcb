"""Dense statevector simulation of n wires of dimension d.

Basis indices are big-endian mixed radix: wire 0 is the most significant
digit. Registers are immutable; every operation returns a new register.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError


SUPPORTED_DIMS = (2, 3)
MAX_WIRES = {2: 12, 3: 8}
NORM_TOLERANCE = 1e-9


def _check_shape(d: int, n: int) -> None:
    if d not in SUPPORTED_DIMS:
        raise DomainError(f"Unsupported level count d={d}. Supported: {SUPPORTED_DIMS}")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError(f"Wire count must be a positive integer, got {n!r}")
    if n > MAX_WIRES[d]:
        raise DomainError(f"At most {MAX_WIRES[d]} wires are supported for d={d}, got {n}")


@dataclass(frozen=True)
class QuditRegister:
    """Pure state of ``wires`` qudits with ``dim`` levels each."""

    dim: int
    wires: int
    amps: np.ndarray

    def __post_init__(self):
        _check_shape(self.dim, self.wires)
        amps = np.array(self.amps, dtype=np.complex128).reshape(-1)
        if amps.size != self.dim ** self.wires:
            raise DomainError(
                f"Expected {self.dim ** self.wires} amplitudes for d={self.dim}, "
                f"n={self.wires}; got {amps.size}"
            )
        if not np.all(np.isfinite(amps)):
            raise DomainError("Amplitudes must be finite.")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise DomainError(f"Register is not normalized (sum |a|^2 = {norm!r}).")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def size(self) -> int:
        return self.amps.size

    def tensor(self, other: "QuditRegister") -> "QuditRegister":
        """Kronecker product; ``self`` becomes the most significant wires."""
        if other.dim != self.dim:
            raise DomainError(f"Cannot tensor d={self.dim} with d={other.dim}")
        return QuditRegister(self.dim, self.wires + other.wires, np.kron(self.amps, other.amps))


def basis_state(d: int, n: int, index: int) -> QuditRegister:
    _check_shape(d, n)
    if not 0 <= index < d ** n:
        raise DomainError(f"Basis index {index} out of range [0, {d ** n})")
    amps = np.zeros(d ** n, dtype=np.complex128)
    amps[index] = 1.0
    return QuditRegister(d, n, amps)


def from_amplitudes(d: int, n: int, amps: Sequence[complex]) -> QuditRegister:
    return QuditRegister(d, n, np.asarray(amps, dtype=np.complex128))


def renormalize(d: int, n: int, amps: Sequence[complex]) -> QuditRegister:
    """Build a register from unnormalized amplitudes. Never applied implicitly."""
    vec = np.asarray(amps, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(vec)
    if norm == 0 or not np.isfinite(norm):
        raise DomainError("Cannot renormalize a zero or non-finite vector.")
    return QuditRegister(d, n, vec / norm)


def _check_wires(n: int, wires: Sequence[int]) -> tuple[int, ...]:
    wires = tuple(int(w) for w in wires)
    if not wires:
        raise DomainError("At least one wire is required.")
    if len(set(wires)) != len(wires):
        raise DomainError(f"Repeated wire in {wires}")
    for w in wires:
        if not 0 <= w < n:
            raise DomainError(f"Wire {w} out of range [0, {n})")
    return wires


def apply_unitary_batch(
    states: np.ndarray, d: int, n: int, gate: np.ndarray, wires: Sequence[int],
) -> np.ndarray:
    """Apply ``gate`` on ``wires`` to every row of an (m, d**n) state matrix."""
    wires = _check_wires(n, wires)
    k = len(wires)
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (d ** k, d ** k):
        raise DomainError(
            f"Gate of shape {gate.shape} does not act on {k} wire(s) of dimension {d}"
        )
    states = np.asarray(states, dtype=np.complex128)
    m = states.shape[0]
    if wires == tuple(range(wires[0], wires[0] + k)):
        # Ascending adjacent wires: one matrix product over a (rows, d**k, rest) view.
        right = d ** (n - wires[0] - k)
        psi = states.reshape(-1, d ** k, right)
        if right == 1:
            return (psi.reshape(-1, d ** k) @ gate.T).reshape(m, d ** n)
        return np.matmul(gate, psi).reshape(m, d ** n)
    psi = states.reshape((m,) + (d,) * n)
    g = gate.reshape((d,) * (2 * k))
    out = np.tensordot(g, psi, axes=(list(range(k, 2 * k)), [w + 1 for w in wires]))
    out = np.moveaxis(out, list(range(k)), [w + 1 for w in wires])
    return out.reshape(m, d ** n)


def apply_unitary(
    reg: QuditRegister, gate: ArrayLike, wires: Sequence[int],
) -> QuditRegister:
    """Apply ``gate`` (a GateMatrix or square array) to the listed wires."""
    matrix = np.asarray(gate, dtype=np.complex128)
    out = apply_unitary_batch(reg.amps[None, :], reg.dim, reg.wires, matrix, wires)
    return QuditRegister(reg.dim, reg.wires, out[0])


def born_probabilities(reg: QuditRegister) -> np.ndarray:
    return np.abs(reg.amps) ** 2


def marginals_batch(states: np.ndarray, d: int, n: int, wire: int) -> np.ndarray:
    """Per-row level distribution of one wire: (m, d**n) -> (m, d)."""
    _check_wires(n, [wire])
    m = states.shape[0]
    probs = (np.abs(states) ** 2).reshape((m,) + (d,) * n)
    other = tuple(ax + 1 for ax in range(n) if ax != wire)
    return probs.sum(axis=other) if other else probs


def marginal_probability(reg: QuditRegister, wire: int, level: int) -> float:
    if not 0 <= wire < reg.wires:
        raise DomainError(f"Wire {wire} out of range [0, {reg.wires})")
    if not 0 <= level < reg.dim:
        raise DomainError(f"Level {level} out of range [0, {reg.dim})")
    return float(marginals_batch(reg.amps[None, :], reg.dim, reg.wires, wire)[0, level])


def fidelity(a: QuditRegister, b: QuditRegister) -> float:
    if (a.dim, a.wires) != (b.dim, b.wires):
        raise DomainError(
            f"Shape mismatch: d={a.dim}, n={a.wires} vs d={b.dim}, n={b.wires}"
        )
    return float(abs(np.vdot(a.amps, b.amps)) ** 2)


def sample_many(reg: QuditRegister, shots: int, rng: np.random.Generator) -> np.ndarray:
    probs = born_probabilities(reg)
    return rng.choice(reg.size, size=shots, p=probs / probs.sum())


def sample(reg: QuditRegister, rng: np.random.Generator) -> int:
    return int(sample_many(reg, 1, rng)[0])


def estimate_marginal(
    reg: QuditRegister, wire: int, level: int, shots: int, rng: np.random.Generator,
) -> float:
    """Shot-based estimate of marginal_probability from repeated measurement."""
    if shots < 1:
        raise DomainError("shots must be >= 1")
    marginal_probability(reg, wire, level)  # validates wire and level
    outcomes = sample_many(reg, shots, rng)
    digits = (outcomes // reg.dim ** (reg.wires - 1 - wire)) % reg.dim
    return float(np.mean(digits == level))
