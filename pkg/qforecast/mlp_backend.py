"""Classical perceptron backend."""

import logging
from typing import Optional

import numpy as np

from . import classical_nn as nn
from .backend import ForecastBackend
from .config import TrainConfig
from .errors import DomainError
from .market_data import SplitDataset
from .metrics import OpCountRecord
from .training import TrainHistory, train_classical

logger = logging.getLogger(__name__)


class MlpBackend(ForecastBackend):
    model_name = "ann"

    def __init__(self, params: Optional[nn.MlpParams] = None):
        self.params = params

    def fit(self, dataset: SplitDataset, config: TrainConfig) -> TrainHistory:
        initial = self.params or nn.build_reference_ann(np.random.default_rng(config.seed))
        logger.info(
            "Training ann %s (%d parameters) on %d samples",
            list(initial.layer_sizes), initial.param_count, len(dataset.train),
        )
        self.params, history = train_classical(dataset, config, initial)
        return history

    def _require_params(self) -> nn.MlpParams:
        if self.params is None:
            raise DomainError("ann backend has no parameters; fit it or load a checkpoint")
        return self.params

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return nn.predict_proba(self._require_params(), X.T)

    def operation_counts(self, n_train: int, config: TrainConfig) -> OpCountRecord:
        params = self.params or nn.build_reference_ann(0)
        macs = nn.count_macs(params)
        return OpCountRecord(
            model=self.model_name,
            cost_per_forward=macs,
            parameter_count=params.param_count,
            forward_passes_per_gradient=1,
            ops_per_epoch=macs * n_train,
        )

    def to_checkpoint(self) -> dict:
        return {"model": self.model_name, "params": nn.params_to_dict(self._require_params())}

    @classmethod
    def from_checkpoint(cls, doc: dict) -> "MlpBackend":
        return cls(nn.params_from_dict(doc["params"]))
