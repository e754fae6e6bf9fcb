"""qforecast - classical, qubit and qutrit models for next-day stock direction."""

from .agent import MODEL_NAMES, ComparisonRun, ForecastAgent, run_comparison
from .config import AgentConfig, TrainConfig, load_config
from .errors import DataError, DomainError, QForecastError, TrainingError

__version__ = "0.1.0"
__all__ = [
    "ForecastAgent",
    "ComparisonRun",
    "run_comparison",
    "MODEL_NAMES",
    "AgentConfig",
    "TrainConfig",
    "load_config",
    "QForecastError",
    "DomainError",
    "DataError",
    "TrainingError",
]
