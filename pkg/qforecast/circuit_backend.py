"""Variational circuit backends: qubit (qqbn) and qutrit (qqtn)."""

import logging
from typing import Optional

import numpy as np

from . import vqc
from .backend import ForecastBackend
from .config import TrainConfig
from .errors import DomainError
from .market_data import SplitDataset
from .metrics import OpCountRecord
from .training import TrainHistory, train_quantum

logger = logging.getLogger(__name__)

CIRCUIT_MODELS = ("qqbn", "qqtn")


def build_ansatz(model: str, encoding: Optional[str] = None) -> vqc.ParameterizedCircuit:
    if model == "qqbn":
        return vqc.build_qbn_ansatz(encoding=encoding or "amplitude")
    if model == "qqtn":
        if encoding not in (None, "phase"):
            raise DomainError("The qutrit circuit only supports phase encoding")
        return vqc.build_qqtn_ansatz()
    raise DomainError(f"Unknown circuit model '{model}'. Use one of {CIRCUIT_MODELS}.")


class CircuitBackend(ForecastBackend):
    def __init__(
        self,
        model_name: str,
        circuit: Optional[vqc.ParameterizedCircuit] = None,
        encoding: Optional[str] = None,
    ):
        if model_name not in CIRCUIT_MODELS:
            raise DomainError(f"Unknown circuit model '{model_name}'. Use one of {CIRCUIT_MODELS}.")
        self.model_name = model_name
        self.encoding = encoding
        self.circuit = circuit
        self.fitted = circuit is not None

    def fit(self, dataset: SplitDataset, config: TrainConfig) -> TrainHistory:
        template = self.circuit or build_ansatz(self.model_name, self.encoding)
        if not self.fitted:
            template = vqc.init_theta(template, np.random.default_rng(config.seed))
        logger.info(
            "Training %s: d=%d, %d wires, %d layers, %d angles, %s encoding",
            self.model_name, template.dim, template.wires, template.depth,
            template.slot_count, template.encoding,
        )
        self.circuit, history = train_quantum(template, dataset, config)
        self.fitted = True
        return history

    def _require_circuit(self) -> vqc.ParameterizedCircuit:
        if not self.fitted:
            raise DomainError(f"{self.model_name} backend is not fitted")
        return self.circuit

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return vqc.predict_batch(self._require_circuit(), X)

    def operation_counts(self, n_train: int, config: TrainConfig) -> OpCountRecord:
        circuit = self.circuit or build_ansatz(self.model_name, self.encoding)
        counts = vqc.count_operations(circuit, config.fd_scheme)
        return OpCountRecord(
            model=self.model_name,
            cost_per_forward=counts.gate_applications,
            parameter_count=counts.parameter_count,
            forward_passes_per_gradient=counts.forward_passes_per_gradient,
            ops_per_epoch=(
                counts.gate_applications * counts.forward_passes_per_gradient * n_train
            ),
        )

    def to_checkpoint(self) -> dict:
        return {"model": self.model_name, "circuit": self._require_circuit().describe()}

    @classmethod
    def from_checkpoint(cls, doc: dict) -> "CircuitBackend":
        circuit = vqc.ParameterizedCircuit.from_description(doc["circuit"])
        return cls(doc["model"], circuit, circuit.encoding)
