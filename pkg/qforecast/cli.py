"""CLI interface for qforecast."""

import functools
import logging
import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np

from .agent import MODEL_NAMES, ForecastAgent
from .checkpoints import load_checkpoint
from .config import FD_SCHEMES, OPTIMIZERS, AgentConfig, TrainConfig, load_config
from .encoders import basis_encode, encode_feature_register, inverse_qft_decode, qft_encode
from .errors import ConfigError, DataError, DomainError, QForecastError
from .market_data import (
    FEATURE_SETS,
    load_csv,
    normalize_and_label,
    prepare_dataset,
    synthetic_series,
    write_ohlcv_csv,
)
from .metrics import emit_plot_data
from .qudit_state import QuditRegister, born_probabilities

ENCODE_SCHEMES = ("amplitude", "phase-qubit", "phase-qutrit", "basis", "qft")


class DataFailure(click.ClickException):
    exit_code = 3


class TrainingFailure(click.ClickException):
    exit_code = 4


def train_options(f):
    """Flags shared by train, eval and bench; each overrides the --config file."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="JSON file with TrainConfig keys"),
        click.option("--seed", type=int, help="Single source of randomness"),
        click.option("--epochs", type=click.IntRange(min=0), help="Epochs (default 200 ann, 100 circuits)"),
        click.option("--lr", type=float, help="Learning rate"),
        click.option("--batch", type=click.IntRange(min=1), help="Mini-batch size"),
        click.option("--delta-theta", type=float, help="Finite-difference step in radians"),
        click.option("--fd-scheme", type=click.Choice(FD_SCHEMES), help="Finite-difference scheme"),
        click.option("--optimizer", type=click.Choice(OPTIMIZERS), help="Optimizer"),
        click.option("--threads", type=click.IntRange(min=1), help="Worker threads"),
        click.option("--feature-set", type=click.Choice(FEATURE_SETS),
                     help="relative (returns on the previous close) or raw prices"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def out_option(f):
    return click.option(
        "--out", "out_dir", envvar="QFORECAST_OUT", default="./qforecast-out",
        show_default=True, help="Output directory (env QFORECAST_OUT)",
    )(f)


def _build_config(
    config_path, seed, epochs, lr, batch, delta_theta, fd_scheme, optimizer, threads, feature_set,
):
    try:
        base = load_config(config_path) if config_path else TrainConfig()
        return base.with_overrides(
            seed=seed, epochs=epochs, learning_rate=lr, batch_size=batch,
            delta_theta=delta_theta, fd_scheme=fd_scheme, optimizer=optimizer, threads=threads,
            feature_set=feature_set,
        ).validate()
    except ConfigError as e:
        raise click.UsageError(str(e))


def _load_dataset(data: str, config: TrainConfig):
    try:
        return prepare_dataset(load_csv(data), config.train_ratio, config.feature_set)
    except (DataError, OSError) as e:
        raise DataFailure(str(e))


def _guard_training(fn):
    """Map failures raised while fitting to the CLI's exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DataError, OSError) as e:
            raise DataFailure(str(e))
        except (QForecastError, FloatingPointError) as e:
            raise TrainingFailure(str(e))

    return wrapper


def _echo_metrics(label: str, row) -> None:
    m = row.metrics
    click.echo(
        f"{label}: accuracy={m.accuracy:.4f} precision={m.precision:.4f} "
        f"recall={m.recall:.4f} f1={m.f1:.4f}"
    )
    if row.sharpe is not None:
        click.echo(f"  sharpe={row.sharpe:.4f}")
    if row.ic is not None:
        click.echo(f"  ic={row.ic:.4f}")
    for note in row.notes:
        click.echo(f"  note: {note}")


@click.group()
@click.option("--verbose", "-v", count=True, help="-v for info, -vv for debug logging")
@click.pass_context
def cli(ctx, verbose):
    """qforecast - classical vs qubit vs qutrit next-day direction models."""
    ctx.ensure_object(dict)
    logging.basicConfig(
        level=max(logging.DEBUG, logging.WARNING - 10 * verbose),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.option("--model", type=click.Choice(MODEL_NAMES), required=True, help="Model to train")
@click.option("--data", required=True, help="OHLCV CSV file")
@click.option("--encoding", type=click.Choice(["amplitude", "phase"]),
              help="Input encoding for qqbn (default amplitude)")
@train_options
@out_option
def train(model, data, encoding, out_dir, config_path, **flags):
    """Train one model and write its checkpoint, history and plot data."""
    config = _build_config(config_path, **flags)
    if encoding and model == "ann":
        raise click.UsageError("--encoding applies to circuit models only")
    dataset = _load_dataset(data, config)
    agent = ForecastAgent(AgentConfig(output_dir=out_dir))

    @_guard_training
    def run():
        backend, history = agent.train_model(model, dataset, config, encoding)
        row, result = agent.evaluate_model(backend, dataset, config)
        agent.write_model_artifacts(backend, history, out_dir)
        emit_plot_data({model: history}, {model: result.p_up}, result.labels, out_dir)
        return history, row

    history, row = run()
    if history.records:
        last = history.records[-1]
        click.echo(f"train: loss={last.loss:.6f} accuracy={last.accuracy:.4f}")
    _echo_metrics("test", row)
    click.echo(f"Wrote artifacts to {out_dir}")


@cli.command(name="eval")
@click.option("--model", type=click.Choice(MODEL_NAMES), help="Load <out>/<model>.checkpoint.json")
@click.option("--checkpoint", type=click.Path(dir_okay=False), help="Explicit checkpoint file")
@click.option("--data", required=True, help="OHLCV CSV file")
@train_options
@out_option
def eval_(model, checkpoint, data, out_dir, config_path, **flags):
    """Evaluate a trained checkpoint on the test split of --data."""
    if not model and not checkpoint:
        raise click.UsageError("Give --model or --checkpoint")
    config = _build_config(config_path, **flags)
    agent = ForecastAgent(AgentConfig(output_dir=out_dir))
    if not checkpoint and not agent.checkpoints.exists(model):
        raise DataFailure(f"No {model} checkpoint in {out_dir}; run train first")
    try:
        doc = load_checkpoint(checkpoint) if checkpoint else agent.checkpoints.load(model)
    except (DataError, OSError) as e:
        raise DataFailure(str(e))
    dataset = _load_dataset(data, config)

    @_guard_training
    def run():
        backend = agent.backend_from_checkpoint(doc)
        return agent.evaluate_model(backend, dataset, config)[0]

    _echo_metrics(f"{doc['model']} test", run())


@cli.command()
@click.option("--data", required=True, help="OHLCV CSV file")
@click.option("--paper-reference", "published", is_flag=True,
              help="Print published reference figures with reproduction flags")
@train_options
@out_option
def bench(data, published, out_dir, config_path, **flags):
    """Train all three models and write report.json plus plot data."""
    config = _build_config(config_path, **flags)
    dataset = _load_dataset(data, config)
    agent = ForecastAgent(AgentConfig(output_dir=out_dir, published_reference=published))
    run = agent.run_comparison(dataset, config)
    try:
        agent.write_comparison(run, dataset, out_dir)
    except OSError as e:
        raise DataFailure(str(e))
    click.echo(agent.summary(run))
    if run.report.failed:
        failed = [r.model for r in run.report.rows if r.status != "ok"]
        raise TrainingFailure(f"Models failed: {', '.join(failed)}")


def _parse_features(value: Optional[str]) -> Optional[list[float]]:
    if value is None:
        return None
    try:
        features = [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"'{value}' is not a comma-separated list of numbers",
                                 param_hint="--features")
    if not features:
        raise click.BadParameter("no feature values given", param_hint="--features")
    for v in features:
        if not 0.0 <= v <= 1.0:
            raise click.BadParameter(f"feature value {v} outside [0, 1]", param_hint="--features")
    return features


def _basis_label(index: int, d: int, n: int) -> str:
    return np.base_repr(index, base=d).zfill(n)


@cli.command()
@click.option("--scheme", type=click.Choice(ENCODE_SCHEMES), default="amplitude", show_default=True)
@click.option("--features", help="Comma-separated features in [0, 1]")
@click.option("--data", help="OHLCV CSV to take a normalized row from")
@click.option("--row", type=click.IntRange(min=0), default=0, show_default=True,
              help="Sample index within --data")
@click.option("--symbol", type=click.IntRange(min=0), help="Basis index for basis/qft")
@click.option("--dim", type=click.Choice(["2", "3"]), default="2", show_default=True)
@click.option("--wires", type=click.IntRange(min=1), default=2, show_default=True)
def encode(scheme, features, data, row, symbol, dim, wires):
    """Print the encoded statevector and its Born probabilities."""
    d = int(dim)
    try:
        if scheme in ("basis", "qft"):
            if symbol is None:
                raise click.UsageError(f"--symbol is required for the {scheme} scheme")
            reg = (basis_encode if scheme == "basis" else qft_encode)(symbol, d, wires)
        else:
            values = _parse_features(features)
            if values is None:
                if not data:
                    raise click.UsageError("Give --features or --data")
                try:
                    samples, _ = normalize_and_label(load_csv(data))
                except (DataError, OSError) as e:
                    raise DataFailure(str(e))
                if row >= len(samples):
                    raise click.BadParameter(f"row {row} out of range ({len(samples)} samples)",
                                             param_hint="--row")
                values = list(samples[row].features)
            if scheme == "amplitude":
                reg = encode_feature_register(values, "amplitude", 2)
            else:
                reg = encode_feature_register(values, "phase", 2 if scheme == "phase-qubit" else 3)
    except DomainError as e:
        raise click.BadParameter(str(e))
    _echo_register(reg)
    if scheme == "qft":
        click.echo(f"inverse-qft decode: {inverse_qft_decode(reg)}")


def _echo_register(reg: QuditRegister) -> None:
    click.echo(f"d={reg.dim} wires={reg.wires}")
    for i, (amp, p) in enumerate(zip(reg.amps, born_probabilities(reg))):
        if abs(amp) < 1e-15:
            continue
        label = _basis_label(i, reg.dim, reg.wires)
        click.echo(f"|{label}>  amp={amp.real:+.6f}{amp.imag:+.6f}j  p={p:.6f}")


@cli.command(name="synth-data")
@click.option("--days", type=click.IntRange(min=2), required=True, help="Number of trading days")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--signal", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True,
              help="Probability that a day repeats the previous day's direction")
@click.option("--trend", type=float, default=0.0005, show_default=True, help="Log drift per day")
@click.option("--noise", type=click.FloatRange(min=0.0), default=0.01, show_default=True,
              help="Daily log-return volatility")
@click.option("--out", "out_path", required=True, help="CSV file to write")
def synth_data(days, seed, signal, trend, noise, out_path):
    """Write a seeded synthetic OHLCV series."""
    rows = synthetic_series(seed, days, trend=trend, noise=noise, signal_strength=signal)
    try:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        write_ohlcv_csv(rows, out_path)
    except OSError as e:
        raise DataFailure(f"Cannot write {out_path}: {e}")
    click.echo(f"Wrote {len(rows)} rows to {out_path}")


def main():
    cli(obj={})


if __name__ == "__main__":
    main()
