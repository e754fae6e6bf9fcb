"""Classification and trading metrics, operation-count comparison and report output."""

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from .errors import DegenerateMetricError, DomainError
from .market_data import FLOAT_FORMAT

logger = logging.getLogger(__name__)

TRADING_DAYS = 252


class ReproductionStatus(str, Enum):
    MATCHED = "matched"
    NOT_ATTEMPTED = "not_attempted"
    NOT_REPRODUCIBLE = "not_reproducible"


# Published figures, carried verbatim as annotations next to measured values.
PUBLISHED_BENCHMARK = {
    "ann": {
        "training_time_relative": "100% (Baseline)",
        "accuracy_pct": 69.2,
        "computational_steps_reduction": "N/A",
    },
    "qqbn": {
        "training_time_relative": "3.2% of ANN",
        "accuracy_pct": 71.6,
        "computational_steps_reduction": "96.8% Faster than ANN",
    },
    "qqtn": {
        "training_time_relative": "60-65% of QQBN",
        "accuracy_pct": 73.5,
        "computational_steps_reduction": "35-40% Faster than QQBN",
    },
}
PUBLISHED_CLASSIFICATION = {
    "ann": {"accuracy_pct": 69.2, "precision_pct": 67.5, "recall_pct": 70.0, "f1_pct": 68.7},
    "qqbn": {"accuracy_pct": 71.6, "precision_pct": 70.5, "recall_pct": 71.9, "f1_pct": 71.2},
    "qqtn": {"accuracy_pct": 73.5, "precision_pct": 73.0, "recall_pct": 73.8, "f1_pct": 73.4},
}
METRIC_DEFINITIONS = {
    "sharpe": "long/flat next-day strategy, zero risk-free rate, n-1 std, sqrt(252) annualized; "
              "definition supplied by artifact",
    "ic": "Spearman rank correlation of p_up against next-day return, average ranks for ties; "
          "definition supplied by artifact",
    "op_counts": "circuits: gate applications x forward passes per gradient x training samples; "
                 "ann: multiply-accumulates per sample forward x training samples",
}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion_counts(labels: Sequence[int], predictions: Sequence[int]) -> ConfusionCounts:
    y = np.asarray(labels, dtype=int).reshape(-1)
    p = np.asarray(predictions, dtype=int).reshape(-1)
    if y.shape != p.shape:
        raise DomainError(f"{y.size} labels vs {p.size} predictions")
    return ConfusionCounts(
        tp=int(np.sum((p == 1) & (y == 1))),
        fp=int(np.sum((p == 1) & (y == 0))),
        fn=int(np.sum((p == 0) & (y == 1))),
        tn=int(np.sum((p == 0) & (y == 0))),
    )


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    precision_degenerate: bool = False
    recall_degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def classification_metrics(counts: ConfusionCounts) -> ClassificationMetrics:
    """Accuracy, precision, recall, F1; a zero denominator yields 0 and sets its flag."""
    if counts.total == 0:
        raise DomainError("No evaluated samples")
    accuracy = (counts.tp + counts.tn) / counts.total
    predicted_up = counts.tp + counts.fp
    actual_up = counts.tp + counts.fn
    precision = counts.tp / predicted_up if predicted_up else 0.0
    recall = counts.tp / actual_up if actual_up else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassificationMetrics(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        precision_degenerate=predicted_up == 0,
        recall_degenerate=actual_up == 0,
    )


def sharpe_ratio(
    predictions: Sequence[int], realized_returns: Sequence[float], periods: int = TRADING_DAYS,
) -> float:
    """Annualized Sharpe ratio of holding the asset on days predicted up."""
    preds = np.asarray(predictions, dtype=np.float64).reshape(-1)
    returns = np.asarray(realized_returns, dtype=np.float64).reshape(-1)
    if preds.shape != returns.shape:
        raise DomainError(f"{preds.size} predictions vs {returns.size} returns")
    if preds.size < 2:
        raise DomainError("Sharpe ratio needs at least 2 periods")
    strategy = preds * returns
    std = float(np.std(strategy, ddof=1))
    if std == 0.0:
        raise DegenerateMetricError("Strategy returns have zero standard deviation")
    return float(np.mean(strategy) / std * math.sqrt(periods))


def information_coefficient(scores: Sequence[float], realized_returns: Sequence[float]) -> float:
    """Spearman rank correlation of scores with realized returns; ties get average ranks."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    r = np.asarray(realized_returns, dtype=np.float64).reshape(-1)
    if s.shape != r.shape:
        raise DomainError(f"{s.size} scores vs {r.size} returns")
    if s.size < 3:
        raise DomainError("Information coefficient needs at least 3 observations")
    if np.any(np.isnan(s)) or np.any(np.isnan(r)):
        raise DomainError("Scores and returns must not contain NaN")
    if np.all(s == s[0]) or np.all(r == r[0]):
        raise DegenerateMetricError("Rank correlation is undefined for a constant series")
    return float(spearmanr(s, r)[0])


@dataclass(frozen=True)
class OpCountRecord:
    """Abstract cost model of one model's training."""

    model: str
    cost_per_forward: int
    parameter_count: int
    forward_passes_per_gradient: int
    ops_per_epoch: int

    def to_dict(self) -> dict:
        return asdict(self)


def op_count_comparison(records: Mapping[str, OpCountRecord]) -> dict:
    if len(records) < 2:
        raise DomainError("Need at least two models to compare")
    names = list(records)
    ratios = {}
    for a in names:
        for b in names:
            if a == b:
                continue
            denominator = records[b].ops_per_epoch
            ratios[f"{a}/{b}"] = records[a].ops_per_epoch / denominator if denominator else None
    return {
        "absolute": {name: records[name].to_dict() for name in names},
        "ratios": ratios,
        "published_claims": {
            name: {
                "training_time_relative": PUBLISHED_BENCHMARK[name]["training_time_relative"],
                "computational_steps_reduction":
                    PUBLISHED_BENCHMARK[name]["computational_steps_reduction"],
                "status": ReproductionStatus.NOT_REPRODUCIBLE.value,
            }
            for name in names if name in PUBLISHED_BENCHMARK
        },
    }


@dataclass
class ModelRow:
    model: str
    status: str = "ok"
    error: Optional[str] = None
    metrics: Optional[ClassificationMetrics] = None
    sharpe: Optional[float] = None
    ic: Optional[float] = None
    op_counts: Optional[OpCountRecord] = None
    final_train_loss: Optional[float] = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "status": self.status,
            "error": self.error,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "sharpe": self.sharpe,
            "ic": self.ic,
            "op_counts": self.op_counts.to_dict() if self.op_counts else None,
            "final_train_loss": self.final_train_loss,
            "notes": list(self.notes),
        }


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


@dataclass
class ComparisonReport:
    seed: int
    config: dict
    data_fingerprint: str
    n_train: int
    n_test: int
    rows: list[ModelRow] = field(default_factory=list)
    op_comparison: Optional[dict] = None

    @property
    def failed(self) -> bool:
        return any(r.status != "ok" for r in self.rows)

    def row(self, model: str) -> ModelRow:
        for r in self.rows:
            if r.model == model:
                return r
        raise KeyError(model)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "data_fingerprint": self.data_fingerprint,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "models": [r.to_dict() for r in self.rows],
            "op_comparison": self.op_comparison,
            "definitions": METRIC_DEFINITIONS,
            "published_reference": {
                "benchmark": PUBLISHED_BENCHMARK,
                "classification": PUBLISHED_CLASSIFICATION,
                "status": {
                    "accuracy": ReproductionStatus.NOT_ATTEMPTED.value,
                    "classification": ReproductionStatus.NOT_ATTEMPTED.value,
                    "training_time": ReproductionStatus.NOT_REPRODUCIBLE.value,
                    "computational_steps": ReproductionStatus.NOT_REPRODUCIBLE.value,
                },
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(value: Optional[float], pct: bool = False) -> str:
    if value is None:
        return "-"
    return f"{value * 100:.1f}" if pct else f"{value:.3f}"


def format_summary(report: ComparisonReport, published: bool = False) -> str:
    """Plain-text comparison table, optionally with the published figures alongside."""
    header = f"{'model':<6} {'acc%':>6} {'prec%':>6} {'rec%':>6} {'f1%':>6} " \
             f"{'sharpe':>8} {'ic':>7} {'ops/epoch':>12}"
    lines = [header, "-" * len(header)]
    for row in report.rows:
        if row.status != "ok":
            lines.append(f"{row.model:<6} FAILED: {row.error}")
            continue
        m = row.metrics
        ops = row.op_counts.ops_per_epoch if row.op_counts else None
        lines.append(
            f"{row.model:<6} {_fmt(m.accuracy, True):>6} {_fmt(m.precision, True):>6} "
            f"{_fmt(m.recall, True):>6} {_fmt(m.f1, True):>6} {_fmt(row.sharpe):>8} "
            f"{_fmt(row.ic):>7} {ops if ops is not None else '-':>12}"
        )
    if published:
        lines.append("")
        lines.append("Published reference (not desk-reproduced):")
        for name, values in PUBLISHED_CLASSIFICATION.items():
            bench = PUBLISHED_BENCHMARK[name]
            lines.append(
                f"{name:<6} {values['accuracy_pct']:>6} {values['precision_pct']:>6} "
                f"{values['recall_pct']:>6} {values['f1_pct']:>6}  "
                f"time: {bench['training_time_relative']} "
                f"[{ReproductionStatus.NOT_REPRODUCIBLE.value}]; "
                f"steps: {bench['computational_steps_reduction']} "
                f"[{ReproductionStatus.NOT_REPRODUCIBLE.value}]"
            )
    return "\n".join(lines)


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e}") from e
    return path


def emit_plot_data(
    histories: Mapping[str, object],
    predictions: Mapping[str, Sequence[float]],
    actuals: Sequence[int],
    out_dir,
) -> list[Path]:
    """Write cost_curves.csv, predictions.csv and residuals_<model>.csv.

    ``histories`` maps model name to a TrainHistory; ``predictions`` maps model
    name to p_up scores aligned with ``actuals``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"Cannot create {out}: {e}") from e
    actuals = np.asarray(actuals, dtype=int).reshape(-1)

    cost_rows = [
        {"epoch": r.epoch, "model": name, "loss": r.loss}
        for name, history in histories.items()
        for r in history.records
    ]
    written = [_write_frame(pd.DataFrame(cost_rows, columns=["epoch", "model", "loss"]),
                            out / "cost_curves.csv")]

    table = pd.DataFrame({"index": np.arange(actuals.size), "actual": actuals})
    for name, p_up in predictions.items():
        scores = np.asarray(p_up, dtype=np.float64).reshape(-1)
        if scores.size != actuals.size:
            raise DomainError(f"{name}: {scores.size} predictions for {actuals.size} actuals")
        table[name] = scores
    written.append(_write_frame(table, out / "predictions.csv"))

    for name in predictions:
        residuals = pd.DataFrame({
            "index": table["index"],
            "actual": table["actual"],
            "p_up": table[name],
            "residual": table["actual"] - table[name],
        })
        written.append(_write_frame(residuals, out / f"residuals_{name}.csv"))
    logger.debug("Wrote %d plot-data files to %s", len(written), out)
    return written
