"""Multilayer perceptron with hand-written forward and backward passes.

Batches are laid out with samples as columns: X has shape (n0, m) and every
activation A[l] has shape (n_l, m).
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit, softmax

from .errors import DomainError

ACTIVATIONS = ("sigmoid", "relu", "tanh", "softmax")
OUTPUT_HEADS = ("softmax", "sigmoid")
REFERENCE_LAYER_SIZES = (5, 128, 64, 32, 2)
CLIP_EPSILON = 1e-12


@dataclass(frozen=True)
class MlpParams:
    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    output: str = "softmax"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        weights = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.array(b, dtype=np.float64).reshape(-1) for b in self.biases)
        if len(sizes) < 2 or len(weights) != len(sizes) - 1 or len(biases) != len(weights):
            raise DomainError(
                f"{len(weights)} weight matrices and {len(biases)} bias vectors "
                f"do not chain layer sizes {sizes}"
            )
        for l, (w, b) in enumerate(zip(weights, biases), start=1):
            if w.shape != (sizes[l], sizes[l - 1]) or b.shape != (sizes[l],):
                raise DomainError(
                    f"Layer {l}: W{w.shape} b{b.shape} do not match "
                    f"({sizes[l]}, {sizes[l - 1]})"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DomainError(f"Layer {l} holds non-finite parameters")
        if self.output not in OUTPUT_HEADS:
            raise DomainError(f"Unknown output head '{self.output}'. Use one of {OUTPUT_HEADS}.")
        if self.output == "sigmoid" and sizes[-1] != 1:
            raise DomainError("A sigmoid head needs exactly one output unit")
        if self.output == "softmax" and sizes[-1] < 2:
            raise DomainError("A softmax head needs at least two output units")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class ForwardCache:
    """Pre-activations Z[l] and activations A[l] of one forward pass; A[0] is the input."""

    Z: tuple[np.ndarray, ...]
    A: tuple[np.ndarray, ...]
    source: MlpParams

    @property
    def batch_width(self) -> int:
        return self.A[0].shape[1]


@dataclass(frozen=True)
class MlpGradients:
    dW: tuple[np.ndarray, ...]
    db: tuple[np.ndarray, ...]

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.reshape(-1) for pair in zip(self.dW, self.db) for a in pair])


def activation(kind: str, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if kind == "sigmoid":
        return expit(Z)
    if kind == "relu":
        return np.maximum(Z, 0.0)
    if kind == "tanh":
        return np.tanh(Z)
    if kind == "softmax":
        return softmax(Z, axis=0)
    raise DomainError(f"Unknown activation '{kind}'. Use one of {ACTIVATIONS}.")


def activation_backward(kind: str, dA: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """dZ = dA * g'(Z). ReLU's derivative is 0 at Z == 0."""
    dA = np.asarray(dA, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if dA.shape != Z.shape:
        raise DomainError(f"dA{dA.shape} and Z{Z.shape} differ in shape")
    if kind == "sigmoid":
        s = expit(Z)
        return dA * s * (1.0 - s)
    if kind == "relu":
        return np.where(Z > 0, dA, 0.0)
    if kind == "tanh":
        return dA * (1.0 - np.tanh(Z) ** 2)
    raise DomainError(f"No standalone backward form for '{kind}'")


def _paired(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y.shape != y_hat.shape:
        raise DomainError(f"Length mismatch: {y.size} targets vs {y_hat.size} predictions")
    if y.size == 0:
        raise DomainError("Cost of an empty batch is undefined")
    return y, y_hat


def bce_cost(y, y_hat) -> float:
    y, y_hat = _paired(y, y_hat)
    p = np.clip(y_hat, CLIP_EPSILON, 1.0 - CLIP_EPSILON)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def mse_cost(y, y_hat) -> float:
    y, y_hat = _paired(y, y_hat)
    return float(np.mean((y - y_hat) ** 2))


def cross_entropy_cost(labels, probs) -> float:
    """Categorical cross-entropy of integer labels against (classes, m) column probabilities."""
    labels = np.asarray(labels, dtype=int).reshape(-1)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] != labels.size:
        raise DomainError(f"Probabilities {probs.shape} do not match {labels.size} labels")
    picked = probs[labels, np.arange(labels.size)]
    return float(-np.mean(np.log(np.clip(picked, CLIP_EPSILON, 1.0))))


def model_cost(params: MlpParams, output: np.ndarray, labels) -> float:
    if params.output == "sigmoid":
        return bce_cost(labels, output)
    return cross_entropy_cost(labels, output)


def model_forward(
    params: MlpParams, X: np.ndarray, hidden: str = "relu",
) -> tuple[np.ndarray, ForwardCache]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != params.layer_sizes[0] or X.shape[1] < 1:
        raise DomainError(
            f"Input of shape {X.shape} does not match ({params.layer_sizes[0]}, m>=1)"
        )
    Zs, As = [], [X]
    A = X
    for l, (W, b) in enumerate(zip(params.weights, params.biases), start=1):
        Z = W @ A + b[:, None]
        A = activation(params.output if l == params.depth else hidden, Z)
        Zs.append(Z)
        As.append(A)
    return A, ForwardCache(tuple(Zs), tuple(As), params)


def _one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    Y = np.zeros((classes, labels.size))
    Y[labels, np.arange(labels.size)] = 1.0
    return Y


def model_backward(
    params: MlpParams, cache: ForwardCache, y, hidden: str = "relu",
) -> MlpGradients:
    """Gradients of the head's cost (BCE for sigmoid, CE for softmax).

    The output layer uses dZ = y_hat - y; hidden layers follow
    dW = dZ A_prev^T / m, db = mean(dZ), dA_prev = W^T dZ.
    """
    if cache.source is not params:
        raise DomainError("Forward cache was produced by different parameters")
    labels = np.asarray(y).reshape(-1)
    m = cache.batch_width
    if labels.size != m:
        raise DomainError(f"{labels.size} labels for a batch of width {m}")

    y_hat = cache.A[-1]
    if params.output == "sigmoid":
        dZ = y_hat - labels.astype(np.float64)[None, :]
    else:
        dZ = y_hat - _one_hot(labels.astype(int), params.layer_sizes[-1])

    dWs: list[np.ndarray] = [None] * params.depth
    dbs: list[np.ndarray] = [None] * params.depth
    for l in range(params.depth, 0, -1):
        A_prev = cache.A[l - 1]
        dWs[l - 1] = dZ @ A_prev.T / m
        dbs[l - 1] = dZ.sum(axis=1) / m
        if l > 1:
            dA_prev = params.weights[l - 1].T @ dZ
            dZ = activation_backward(hidden, dA_prev, cache.Z[l - 2])
    return MlpGradients(tuple(dWs), tuple(dbs))


def gd_update(params: MlpParams, grads: MlpGradients, alpha: float) -> MlpParams:
    """W <- W - alpha*dW, b <- b - alpha*db."""
    if alpha < 0:
        raise DomainError(f"Learning rate must be >= 0, got {alpha}")
    return replace(
        params,
        weights=tuple(W - alpha * dW for W, dW in zip(params.weights, grads.dW)),
        biases=tuple(b - alpha * db for b, db in zip(params.biases, grads.db)),
    )


def init_params(
    layer_sizes: Sequence[int], rng: np.random.Generator, output: str = "softmax",
) -> MlpParams:
    """He-scaled normal weights (std = sqrt(2 / fan_in)) and zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(tuple(layer_sizes), tuple(weights), tuple(biases), output)


def build_reference_ann(rng: Union[np.random.Generator, int, None] = None) -> MlpParams:
    """5 -> 128 -> 64 -> 32 -> 2 ReLU network with a softmax head."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return init_params(REFERENCE_LAYER_SIZES, rng, "softmax")


def predict_proba(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """p_up per sample for a samples-as-columns input."""
    out, _ = model_forward(params, X)
    return out[0] if params.output == "sigmoid" else out[1]


def count_macs(params: MlpParams) -> int:
    """Multiply-accumulates for one single-sample forward pass."""
    return sum(w.size for w in params.weights)


def flatten(params: MlpParams) -> np.ndarray:
    return np.concatenate(
        [a.reshape(-1) for pair in zip(params.weights, params.biases) for a in pair]
    )


def unflatten(params: MlpParams, vector: np.ndarray) -> MlpParams:
    """Inverse of flatten, using ``params`` for the shapes."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.size != params.param_count:
        raise DomainError(f"Expected {params.param_count} values, got {vector.size}")
    weights, biases, offset = [], [], 0
    for W, b in zip(params.weights, params.biases):
        weights.append(vector[offset: offset + W.size].reshape(W.shape))
        offset += W.size
        biases.append(vector[offset: offset + b.size].copy())
        offset += b.size
    return replace(params, weights=tuple(weights), biases=tuple(biases))


def params_to_dict(params: MlpParams) -> dict:
    return {
        "layer_sizes": list(params.layer_sizes),
        "output": params.output,
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def params_from_dict(doc: dict) -> MlpParams:
    try:
        return MlpParams(
            layer_sizes=tuple(doc["layer_sizes"]),
            weights=tuple(np.array(w, dtype=np.float64) for w in doc["weights"]),
            biases=tuple(np.array(b, dtype=np.float64) for b in doc["biases"]),
            output=doc.get("output", "softmax"),
        )
    except KeyError as e:
        raise DomainError(f"Checkpoint is missing field {e}") from e


def accuracy(params: MlpParams, X: np.ndarray, labels) -> Optional[float]:
    labels = np.asarray(labels).reshape(-1)
    if labels.size == 0:
        return None
    return float(np.mean((predict_proba(params, X) >= 0.5).astype(int) == labels))
