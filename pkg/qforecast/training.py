"""Training loops for the perceptron and the variational circuits.

Both loops flatten their parameters into one vector and go through
``optimizer_step``, so Adam and plain gradient descent have a single
implementation shared by the classical and quantum models.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from . import classical_nn as nn
from . import vqc
from .config import TrainConfig
from .errors import DomainError, InsufficientDataError, TrainingError
from .market_data import FLOAT_FORMAT, MarketSample, SplitDataset, feature_matrix, label_vector

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPSILON

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size))


def adam_step(
    params: np.ndarray, grads: np.ndarray, state: AdamState, alpha: float,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise DomainError(
            f"Shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    updated = params - alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated, replace(state, m=m, v=v, t=t)


def plain_gd_step(params: np.ndarray, grads: np.ndarray, alpha: float) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise DomainError(f"Shape mismatch: params {params.shape}, grads {grads.shape}")
    return params - alpha * grads


def optimizer_step(
    name: str, params: np.ndarray, grads: np.ndarray, state: AdamState, alpha: float,
) -> tuple[np.ndarray, AdamState]:
    if name == "adam":
        return adam_step(params, grads, state, alpha)
    if name == "plain_gd":
        return plain_gd_step(params, grads, alpha), replace(state, t=state.t + 1)
    raise DomainError(f"Unknown optimizer '{name}'")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float
    wall_time: float
    cumulative_ops: int


@dataclass
class TrainHistory:
    model: str
    records: list[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.records]

    def __len__(self) -> int:
        return len(self.records)

    def to_frame(self, include_wall_time: bool = False) -> pd.DataFrame:
        columns = ["epoch", "loss", "accuracy", "cumulative_ops"]
        if include_wall_time:
            columns.append("wall_time")
        return pd.DataFrame(
            [{c: getattr(r, c) for c in columns} for r in self.records], columns=columns,
        )

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def batches(n: int, size: int) -> list[slice]:
    """Contiguous slices covering range(n); the last one may be short."""
    return [slice(start, min(start + size, n)) for start in range(0, n, size)]


def _check_loss(model: str, epoch: int, loss: float) -> None:
    if not math.isfinite(loss):
        raise TrainingError(f"{model}: loss became non-finite at epoch {epoch}")


def train_classical(
    dataset: SplitDataset,
    config: TrainConfig,
    params: Optional[nn.MlpParams] = None,
) -> tuple[nn.MlpParams, TrainHistory]:
    config.validate()
    if not dataset.train:
        raise InsufficientDataError("Training set is empty")
    if params is None:
        params = nn.build_reference_ann(np.random.default_rng(config.seed))
    X = feature_matrix(dataset.train).T
    y = label_vector(dataset.train)
    m = y.size
    ops_per_epoch = nn.count_macs(params) * m
    state = AdamState.zeros(params.param_count)
    history = TrainHistory("ann")

    for epoch in range(1, config.epochs_for("ann") + 1):
        started = time.perf_counter()
        total = 0.0
        for batch in batches(m, config.batch_size):
            out, cache = nn.model_forward(params, X[:, batch])
            total += nn.model_cost(params, out, y[batch]) * (batch.stop - batch.start)
            grads = nn.model_backward(params, cache, y[batch])
            flat, state = optimizer_step(
                config.optimizer, nn.flatten(params), grads.flatten(), state, config.learning_rate,
            )
            params = nn.unflatten(params, flat)
        loss = total / m
        _check_loss("ann", epoch, loss)
        record = EpochRecord(
            epoch=epoch,
            loss=loss,
            accuracy=nn.accuracy(params, X, y),
            wall_time=time.perf_counter() - started,
            cumulative_ops=ops_per_epoch * epoch,
        )
        history.append(record)
        logger.info("ann epoch %d: loss=%.6f accuracy=%.4f", epoch, record.loss, record.accuracy)
    return params, history


def train_quantum(
    model: vqc.ParameterizedCircuit,
    dataset: SplitDataset,
    config: TrainConfig,
) -> tuple[vqc.ParameterizedCircuit, TrainHistory]:
    """Finite-difference gradients of the fidelity loss, one optimizer step per batch."""
    config.validate()
    if not dataset.train:
        raise InsufficientDataError("Training set is empty")
    name = model.name or "circuit"
    states = vqc.encode_for(model, feature_matrix(dataset.train))
    y = label_vector(dataset.train)
    m = y.size
    counts = vqc.count_operations(model, config.fd_scheme)
    ops_per_epoch = counts.gate_applications * counts.forward_passes_per_gradient * m
    theta = model.theta.copy()
    state = AdamState.zeros(theta.size)
    history = TrainHistory(name)

    for epoch in range(1, config.epochs_for(name) + 1):
        started = time.perf_counter()
        total = 0.0
        for batch in batches(m, config.batch_size):
            loss_fn = vqc.make_loss(model, states[batch], y[batch])
            base = loss_fn(theta)
            grad = vqc.finite_difference(
                loss_fn, theta, config.delta_theta, config.fd_scheme, config.threads, base_loss=base,
            )
            total += base * (batch.stop - batch.start)
            theta, state = optimizer_step(config.optimizer, theta, grad, state, config.learning_rate)
            logger.debug("%s epoch %d batch %d: loss=%.6f", name, epoch, batch.start, base)
        loss = total / m
        _check_loss(name, epoch, loss)
        p_up = vqc.p_up_from_states(model, states, theta)
        record = EpochRecord(
            epoch=epoch,
            loss=loss,
            accuracy=float(np.mean((p_up >= 0.5).astype(int) == y)),
            wall_time=time.perf_counter() - started,
            cumulative_ops=ops_per_epoch * epoch,
        )
        history.append(record)
        logger.info("%s epoch %d: loss=%.6f accuracy=%.4f", name, epoch, record.loss, record.accuracy)
    return model.with_theta(theta), history


@dataclass(frozen=True)
class Evaluation:
    p_up: np.ndarray
    predictions: np.ndarray
    labels: np.ndarray
    next_returns: np.ndarray


def evaluate(backend, samples: Sequence[MarketSample]) -> Evaluation:
    """Score ``samples`` with any fitted backend; ties at 0.5 predict up."""
    if not samples:
        raise InsufficientDataError("Nothing to evaluate")
    p_up = np.asarray(backend.predict_proba(feature_matrix(samples)), dtype=np.float64)
    return Evaluation(
        p_up=p_up,
        predictions=(p_up >= 0.5).astype(int),
        labels=label_vector(samples),
        next_returns=np.array([s.next_return for s in samples], dtype=np.float64),
    )
