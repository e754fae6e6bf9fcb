"""qforecast agent: trains, evaluates and compares the three forecasting models."""

import asyncio
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .backend import ForecastBackend
from .checkpoints import CheckpointStore, atomic_write_text
from .circuit_backend import CIRCUIT_MODELS, CircuitBackend
from .config import AgentConfig, TrainConfig
from .errors import DomainError
from .market_data import SplitDataset, write_samples_csv
from .metrics import (
    ComparisonReport,
    ModelRow,
    classification_metrics,
    confusion_counts,
    emit_plot_data,
    format_summary,
    information_coefficient,
    op_count_comparison,
    sharpe_ratio,
)
from .mlp_backend import MlpBackend
from .training import Evaluation, TrainHistory, evaluate

logger = logging.getLogger(__name__)

MODEL_NAMES = ("ann",) + CIRCUIT_MODELS


@dataclass
class ComparisonRun:
    """Everything a comparison produced, in model order."""

    report: ComparisonReport
    histories: dict[str, TrainHistory] = field(default_factory=dict)
    evaluations: dict[str, Evaluation] = field(default_factory=dict)
    backends: dict[str, ForecastBackend] = field(default_factory=dict)


class ForecastAgent:
    """Facade over the model backends."""

    def __init__(self, config: Optional[AgentConfig] = None):
        self.config = config or AgentConfig()
        self.backends: dict[str, ForecastBackend] = {}
        self.checkpoints = CheckpointStore(self.config.output_dir)

    @staticmethod
    def _validate_model(model: str) -> str:
        if model not in MODEL_NAMES:
            raise DomainError(f"Unknown model '{model}'. Use one of {MODEL_NAMES}.")
        return model

    def make_backend(self, model: str, encoding: Optional[str] = None) -> ForecastBackend:
        self._validate_model(model)
        if model == "ann":
            return MlpBackend()
        return CircuitBackend(model, encoding=encoding)

    def backend_from_checkpoint(self, doc: dict) -> ForecastBackend:
        model = self._validate_model(doc.get("model", ""))
        if model == "ann":
            return MlpBackend.from_checkpoint(doc)
        return CircuitBackend.from_checkpoint(doc)

    def train_model(
        self,
        model: str,
        dataset: SplitDataset,
        config: TrainConfig,
        encoding: Optional[str] = None,
    ) -> tuple[ForecastBackend, TrainHistory]:
        backend = self.make_backend(model, encoding)
        history = backend.fit(dataset, config)
        self.backends[model] = backend
        return backend, history

    def evaluate_model(
        self, backend: ForecastBackend, dataset: SplitDataset, config: TrainConfig,
    ) -> tuple[ModelRow, Evaluation]:
        result = evaluate(backend, dataset.test)
        row = ModelRow(
            model=backend.model_name,
            metrics=classification_metrics(confusion_counts(result.labels, result.predictions)),
            op_counts=backend.operation_counts(len(dataset.train), config),
        )
        try:
            row.sharpe = sharpe_ratio(result.predictions, result.next_returns)
        except DomainError as e:
            row.notes.append(f"sharpe undefined: {e}")
        try:
            row.ic = information_coefficient(result.p_up, result.next_returns)
        except DomainError as e:
            row.notes.append(f"ic undefined: {e}")
        return row, result

    async def _train_and_evaluate(
        self, model: str, dataset: SplitDataset, config: TrainConfig, gate: asyncio.Semaphore,
    ) -> tuple[ModelRow, Optional[TrainHistory], Optional[Evaluation], ForecastBackend]:
        backend = self.make_backend(model)
        async with gate:
            try:
                history = await asyncio.to_thread(backend.fit, dataset, config)
                row, result = self.evaluate_model(backend, dataset, config)
            except Exception as e:
                logger.exception("%s failed during comparison", model)
                row = ModelRow(
                    model=model,
                    status="failed",
                    error=f"{type(e).__name__}: {e}",
                    op_counts=backend.operation_counts(len(dataset.train), config),
                )
                return row, None, None, backend
        if history.records:
            row.final_train_loss = history.records[-1].loss
        self.backends[model] = backend
        return row, history, result, backend

    async def run_comparison_async(
        self,
        dataset: SplitDataset,
        config: TrainConfig,
        models: Sequence[str] = MODEL_NAMES,
    ) -> ComparisonRun:
        """Train and evaluate every model under one config; at most ``config.threads`` at once."""
        config.validate()
        for model in models:
            self._validate_model(model)
        gate = asyncio.Semaphore(config.threads)
        outcomes = await asyncio.gather(
            *(self._train_and_evaluate(m, dataset, config, gate) for m in models)
        )

        report = ComparisonReport(
            seed=config.seed,
            config=config.hyperparameters(),
            data_fingerprint=dataset.fingerprint,
            n_train=len(dataset.train),
            n_test=len(dataset.test),
        )
        run = ComparisonRun(report)
        for model, (row, history, result, backend) in zip(models, outcomes):
            report.rows.append(row)
            run.backends[model] = backend
            if history is not None:
                run.histories[model] = history
                run.evaluations[model] = result
        if len(models) >= 2:
            report.op_comparison = op_count_comparison({r.model: r.op_counts for r in report.rows})
        return run

    def run_comparison(
        self,
        dataset: SplitDataset,
        config: TrainConfig,
        models: Sequence[str] = MODEL_NAMES,
    ) -> ComparisonRun:
        return asyncio.run(self.run_comparison_async(dataset, config, models))

    def summary(self, run: ComparisonRun) -> str:
        """Text table of a comparison; published figures follow when the agent is configured for them."""
        return format_summary(run.report, self.config.published_reference)

    def write_model_artifacts(
        self, backend: ForecastBackend, history: TrainHistory, out_dir=None,
    ) -> list[Path]:
        out = Path(out_dir or self.config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        store = CheckpointStore(out)
        written = [store.save(backend.model_name, backend.to_checkpoint())]
        history_path = out / f"history_{backend.model_name}.csv"
        history.write_csv(history_path)
        written.append(history_path)
        return written

    def write_comparison(self, run: ComparisonRun, dataset: SplitDataset, out_dir=None) -> list[Path]:
        """report.json, plot data, per-model histories, checkpoints and the test samples."""
        out = Path(out_dir or self.config.output_dir)
        written = [atomic_write_text(out / "report.json", run.report.to_json())]
        actuals = [s.label for s in dataset.test]
        written += emit_plot_data(
            run.histories,
            {m: e.p_up for m, e in run.evaluations.items()},
            actuals,
            out,
        )
        for model, history in run.histories.items():
            written += self.write_model_artifacts(run.backends[model], history, out)
        samples_path = out / "test_samples.csv"
        write_samples_csv(dataset.test, samples_path)
        written.append(samples_path)
        return written


def run_comparison(
    dataset: SplitDataset, config: TrainConfig, models: Sequence[str] = MODEL_NAMES,
) -> ComparisonReport:
    """Model comparison without writing anything."""
    return ForecastAgent().run_comparison(dataset, config, models).report
