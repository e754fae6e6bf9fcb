import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

from .errors import ConfigError
from .market_data import FEATURE_SETS

OPTIMIZERS = ("adam", "plain_gd")
FD_SCHEMES = ("forward", "central")
DEFAULT_EPOCHS = {"ann": 200, "qqbn": 100, "qqtn": 100}
# Execution settings that never change a trained result.
RUNTIME_KEYS = ("threads",)

_NUMBER = (int, float)
FIELD_TYPES = {
    "learning_rate": _NUMBER,
    "batch_size": int,
    "epochs": int,
    "seed": int,
    "delta_theta": _NUMBER,
    "optimizer": str,
    "fd_scheme": str,
    "threads": int,
    "train_ratio": _NUMBER,
    "feature_set": str,
}


def _type_name(expected) -> str:
    if isinstance(expected, tuple):
        return "a number"
    return {int: "an integer", str: "a string"}[expected]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by all three models."""

    learning_rate: float = 0.001
    batch_size: int = 32
    epochs: Optional[int] = None
    seed: int = 0
    delta_theta: float = 1e-3
    optimizer: str = "adam"
    fd_scheme: str = "forward"
    threads: int = 1
    train_ratio: float = 0.8
    feature_set: str = "relative"

    def _check_types(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None and f.name == "epochs":
                continue
            expected = FIELD_TYPES[f.name]
            if isinstance(value, bool) or not isinstance(value, expected):
                raise ConfigError(
                    f"{f.name} must be {_type_name(expected)}, "
                    f"got {type(value).__name__} {value!r}"
                )

    def validate(self) -> "TrainConfig":
        self._check_types()
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs is not None and self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not self.delta_theta > 0:
            raise ConfigError(f"delta_theta must be > 0, got {self.delta_theta}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"Unknown optimizer '{self.optimizer}'. Use one of {OPTIMIZERS}.")
        if self.fd_scheme not in FD_SCHEMES:
            raise ConfigError(f"Unknown fd_scheme '{self.fd_scheme}'. Use one of {FD_SCHEMES}.")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigError(f"train_ratio must lie in (0, 1), got {self.train_ratio}")
        if self.feature_set not in FEATURE_SETS:
            raise ConfigError(f"Unknown feature_set '{self.feature_set}'. Use one of {FEATURE_SETS}.")
        return self

    def epochs_for(self, model: str) -> int:
        if self.epochs is not None:
            return self.epochs
        return DEFAULT_EPOCHS.get(model, DEFAULT_EPOCHS["qqbn"])

    def with_overrides(self, **overrides) -> "TrainConfig":
        """Copy with every non-None override applied."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    def hyperparameters(self) -> dict:
        """to_dict without the runtime keys; this is what reports record and hash."""
        return {k: v for k, v in asdict(self).items() if k not in RUNTIME_KEYS}


def load_config(path) -> TrainConfig:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    try:
        return TrainConfig().with_overrides(**doc).validate()
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from e


def _default_output_dir() -> str:
    return os.environ.get("QFORECAST_OUT", "./qforecast-out")


@dataclass
class AgentConfig:
    """Where artifacts go and how reports are annotated."""

    output_dir: str = field(default_factory=_default_output_dir)
    published_reference: bool = False
