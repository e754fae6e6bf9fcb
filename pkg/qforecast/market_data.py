"""OHLCV ingestion, normalization, next-day labels and synthetic series."""

import hashlib
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DomainError,
    FormatError,
    InsufficientDataError,
    NormalizationError,
    OrderingError,
    ParseError,
    RowValidationError,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["date", "open", "high", "low", "close", "volume"]
# Feature i feeds wire i of a phase-encoded circuit; close sits on readout wire 0.
FEATURES = ("close", "open", "high", "low", "volume")
FEATURE_SETS = ("relative", "raw")
SAMPLE_COLUMNS = [f"f{i + 1}" for i in range(len(FEATURES))] + ["label"]
FLOAT_FORMAT = "%.12g"
MIN_SPLIT_SAMPLES = 5


@dataclass(frozen=True)
class OhlcvRow:
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def validate(self, line: int) -> None:
        values = (self.open, self.high, self.low, self.close, self.volume)
        if not all(math.isfinite(v) for v in values):
            raise RowValidationError(f"non-finite value in row dated {self.date}", line)
        if not self.low <= min(self.open, self.close) <= max(self.open, self.close) <= self.high:
            raise RowValidationError(
                f"row dated {self.date} violates low <= open/close <= high "
                f"(open={self.open}, high={self.high}, low={self.low}, close={self.close})",
                line,
            )
        if self.volume < 0:
            raise RowValidationError(f"row dated {self.date} has negative volume", line)

    def feature_values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in FEATURES)


@dataclass(frozen=True)
class MarketSample:
    """Normalized features with a next-day direction label.

    ``date`` and ``next_return`` are carried for chronology checks and the
    trading metrics; neither is a model input.
    """

    features: tuple[float, ...]
    label: int
    date: Optional[date] = None
    next_return: float = 0.0


@dataclass(frozen=True)
class NormalizationStats:
    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    features: tuple[str, ...] = FEATURES
    feature_set: str = "relative"

    def to_dict(self) -> dict:
        return {
            "features": list(self.features),
            "feature_set": self.feature_set,
            "min": list(self.mins),
            "max": list(self.maxs),
        }


@dataclass
class SplitDataset:
    train: list[MarketSample]
    test: list[MarketSample]
    normalization_stats: Optional[NormalizationStats] = None
    fingerprint: str = field(default="")

    def __post_init__(self):
        if not self.fingerprint:
            self.fingerprint = data_fingerprint(self.train + self.test)


def load_csv(path) -> list[OhlcvRow]:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
    if [c.strip() for c in header.split(",")] != CSV_COLUMNS:
        raise FormatError(f"{path}: expected header '{','.join(CSV_COLUMNS)}', got '{header}'")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise ParseError(str(e), int(match.group(1)) if match else 0) from e
    rows: list[OhlcvRow] = []
    for i, record in enumerate(frame.itertuples(index=False)):
        line = i + 2
        try:
            row = OhlcvRow(
                date=date.fromisoformat(record.date.strip()),
                open=float(record.open),
                high=float(record.high),
                low=float(record.low),
                close=float(record.close),
                volume=float(record.volume),
            )
        except (TypeError, ValueError, AttributeError) as e:
            raise ParseError(f"malformed row {tuple(record)!r}: {e}", line) from e
        row.validate(line)
        if rows and row.date <= rows[-1].date:
            raise OrderingError(
                f"line {line}: date {row.date} does not follow {rows[-1].date}"
            )
        rows.append(row)
    logger.debug("Loaded %d rows from %s", len(rows), path)
    return rows


def write_ohlcv_csv(rows: Sequence[OhlcvRow], path) -> None:
    frame = pd.DataFrame(
        [(r.date.isoformat(), r.open, r.high, r.low, r.close, r.volume) for r in rows],
        columns=CSV_COLUMNS,
    )
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def feature_table(rows: Sequence[OhlcvRow], feature_set: str = "relative") -> np.ndarray:
    """Unscaled (rows, 5) features in FEATURES order.

    raw: the day's prices and volume as quoted. relative: every price as a
    return on the previous close (the first row is measured against its own
    open); volume is left as quoted.
    """
    if feature_set not in FEATURE_SETS:
        raise DomainError(f"Unknown feature set '{feature_set}'. Use one of {FEATURE_SETS}.")
    values = np.array([r.feature_values() for r in rows], dtype=np.float64).reshape(-1, len(FEATURES))
    if feature_set == "raw" or not rows:
        return values
    reference = np.array([rows[0].open] + [r.close for r in rows[:-1]], dtype=np.float64)
    if np.any(reference <= 0):
        raise NormalizationError("Relative features need positive reference prices")
    values[:, :4] = values[:, :4] / reference[:, None] - 1.0
    return values


def fit_normalization(rows: Sequence[OhlcvRow], feature_set: str = "relative") -> NormalizationStats:
    if len(rows) < 2:
        raise InsufficientDataError(f"Need at least 2 rows to fit normalization, got {len(rows)}")
    values = feature_table(rows, feature_set)
    mins, maxs = values.min(axis=0), values.max(axis=0)
    for name, lo, hi in zip(FEATURES, mins, maxs):
        if hi == lo:
            raise NormalizationError(f"Feature '{name}' is constant ({lo}); cannot min-max scale")
    return NormalizationStats(tuple(mins.tolist()), tuple(maxs.tolist()), feature_set=feature_set)


def apply_normalization(rows: Sequence[OhlcvRow], stats: NormalizationStats) -> np.ndarray:
    """Min-max scale with the given stats, clamping out-of-range values to [0, 1]."""
    values = feature_table(rows, stats.feature_set)
    mins, maxs = np.array(stats.mins), np.array(stats.maxs)
    return np.clip((values - mins) / (maxs - mins), 0.0, 1.0)


def normalize_and_label(
    rows: Sequence[OhlcvRow], fit_rows: Optional[int] = None, feature_set: str = "relative",
) -> tuple[list[MarketSample], NormalizationStats]:
    """Label day i with 1 iff close[i+1] > close[i]; the final row has no label.

    Normalization stats are fit on the first ``fit_rows`` rows (all by default).
    """
    if len(rows) < 2:
        raise InsufficientDataError(f"Need at least 2 rows, got {len(rows)}")
    stats = fit_normalization(rows[: fit_rows or len(rows)], feature_set)
    scaled = apply_normalization(rows, stats)
    returns = realized_returns(rows)
    samples = [
        MarketSample(
            features=tuple(scaled[i].tolist()),
            label=1 if rows[i + 1].close > rows[i].close else 0,
            date=rows[i].date,
            next_return=float(returns[i]),
        )
        for i in range(len(rows) - 1)
    ]
    return samples, stats


def chronological_split(
    samples: Sequence[MarketSample],
    ratio: float = 0.8,
    stats: Optional[NormalizationStats] = None,
) -> SplitDataset:
    if len(samples) < MIN_SPLIT_SAMPLES:
        raise InsufficientDataError(
            f"Need at least {MIN_SPLIT_SAMPLES} samples to split, got {len(samples)}"
        )
    if not 0.0 < ratio < 1.0:
        raise InsufficientDataError(f"Split ratio must lie in (0, 1), got {ratio}")
    cut = math.floor(ratio * len(samples))
    return SplitDataset(list(samples[:cut]), list(samples[cut:]), stats)


def prepare_dataset(
    rows: Sequence[OhlcvRow], ratio: float = 0.8, feature_set: str = "relative",
) -> SplitDataset:
    """Label, normalize with training-range stats only, and split chronologically."""
    if len(rows) < 2:
        raise InsufficientDataError(f"Need at least 2 rows, got {len(rows)}")
    n_train = math.floor(ratio * (len(rows) - 1))
    samples, stats = normalize_and_label(rows, fit_rows=max(n_train, 2), feature_set=feature_set)
    return chronological_split(samples, ratio, stats)


def write_samples_csv(samples: Sequence[MarketSample], path) -> None:
    frame = pd.DataFrame(
        [s.features + (s.label,) for s in samples], columns=SAMPLE_COLUMNS,
    )
    frame["label"] = frame["label"].astype(int)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def load_samples_csv(path) -> list[MarketSample]:
    frame = pd.read_csv(path)
    if list(frame.columns) != SAMPLE_COLUMNS:
        raise FormatError(f"{path}: expected header '{','.join(SAMPLE_COLUMNS)}'")
    features = frame[SAMPLE_COLUMNS[:-1]].to_numpy(dtype=np.float64)
    labels = frame["label"].to_numpy(dtype=int)
    return [MarketSample(tuple(f.tolist()), int(y)) for f, y in zip(features, labels)]


def data_fingerprint(samples: Sequence[MarketSample]) -> str:
    digest = hashlib.sha256()
    for s in samples:
        digest.update(np.asarray(s.features, dtype=np.float64).tobytes())
        digest.update(bytes([s.label]))
    return digest.hexdigest()


def feature_matrix(samples: Sequence[MarketSample]) -> np.ndarray:
    """(m, 5) feature matrix; rows are samples."""
    return np.array([s.features for s in samples], dtype=np.float64).reshape(len(samples), -1)


def label_vector(samples: Sequence[MarketSample]) -> np.ndarray:
    return np.array([s.label for s in samples], dtype=int)


def synthetic_series(
    seed: int,
    n_days: int,
    trend: float = 0.0005,
    noise: float = 0.01,
    signal_strength: float = 0.0,
    start: date = date(2015, 1, 1),
    base_price: float = 100.0,
) -> list[OhlcvRow]:
    """Seeded log-price random walk over business days.

    With probability ``signal_strength`` a day's move repeats the sign of the
    previous day's move; otherwise the sign is a fair coin. The open gaps away
    from the previous close by a small independent draw while the close follows
    the walk alone, so gaps never change a label. Every random draw is taken on
    every day so the stream does not depend on branching.
    """
    if n_days < 2:
        raise InsufficientDataError(f"n_days must be >= 2, got {n_days}")
    if not 0.0 <= signal_strength <= 1.0:
        raise InsufficientDataError(f"signal_strength must lie in [0, 1], got {signal_strength}")
    rng = np.random.default_rng(seed)
    dates = pd.bdate_range(start=start, periods=n_days)

    rows = []
    prev_close = base_price
    prev_move = 0.0
    for t in range(n_days):
        magnitude, follow, coin, wick_hi, wick_lo, vol, gap = (
            abs(rng.normal(0.0, 1.0)) * noise,
            rng.random(),
            rng.random(),
            abs(rng.normal(0.0, 0.5)) * noise,
            abs(rng.normal(0.0, 0.5)) * noise,
            rng.normal(0.0, 0.3),
            rng.normal(0.0, 0.25) * noise,
        )
        if t == 0:
            move = 0.0
        else:
            if follow < signal_strength and prev_move != 0.0:
                direction = 1.0 if prev_move > 0 else -1.0
            else:
                direction = 1.0 if coin < 0.5 else -1.0
            move = trend + direction * magnitude
        open_ = prev_close * math.exp(gap)
        close = prev_close * math.exp(move)
        rows.append(OhlcvRow(
            date=dates[t].date(),
            open=open_,
            high=max(open_, close) * math.exp(wick_hi),
            low=min(open_, close) * math.exp(-wick_lo),
            close=close,
            volume=1e6 * math.exp(vol),
        ))
        prev_close, prev_move = close, move
    return rows


def momentum_oracle_accuracy(rows: Sequence[OhlcvRow]) -> float:
    """Accuracy of predicting that tomorrow repeats today's close-to-close direction."""
    if len(rows) < 3:
        raise InsufficientDataError("Need at least 3 rows for the momentum oracle")
    closes = np.array([r.close for r in rows])
    today_up = closes[1:-1] > closes[:-2]
    tomorrow_up = closes[2:] > closes[1:-1]
    return float(np.mean(today_up == tomorrow_up))


def realized_returns(rows: Sequence[OhlcvRow]) -> np.ndarray:
    """Next-day close-to-close returns, aligned with the samples of normalize_and_label."""
    closes = np.array([r.close for r in rows], dtype=np.float64)
    return closes[1:] / closes[:-1] - 1.0
