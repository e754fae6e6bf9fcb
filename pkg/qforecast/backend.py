"""Abstract base class for forecasting model backends."""

from abc import ABC, abstractmethod

import numpy as np

from .config import TrainConfig
from .market_data import SplitDataset
from .metrics import OpCountRecord
from .training import TrainHistory


class ForecastBackend(ABC):
    """Abstract interface for one binary next-day-direction model.

    Each instance owns its parameters exclusively; ``fit`` replaces them.
    """

    model_name: str  # "ann", "qqbn" or "qqtn"

    @abstractmethod
    def fit(self, dataset: SplitDataset, config: TrainConfig) -> TrainHistory:
        """Train on ``dataset.train`` and keep the fitted parameters."""

    @abstractmethod
    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """p_up for each row of an (m, 5) feature matrix."""

    @abstractmethod
    def operation_counts(self, n_train: int, config: TrainConfig) -> OpCountRecord:
        """Cost-model counts for one training epoch over ``n_train`` samples."""

    @abstractmethod
    def to_checkpoint(self) -> dict:
        """JSON-serialisable snapshot of the fitted parameters."""

    @classmethod
    @abstractmethod
    def from_checkpoint(cls, doc: dict) -> "ForecastBackend":
        """Rebuild a backend from ``to_checkpoint`` output."""

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Hard labels; p_up of exactly 0.5 predicts up."""
        return (self.predict_proba(X) >= 0.5).astype(int)
