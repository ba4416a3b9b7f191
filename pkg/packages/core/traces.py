"""greenshop: grid carbon-intensity traces on the 15-minute epoch grid."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import accumulate
from pathlib import Path
from typing import IO, Iterable

import numpy as np
import pandas as pd

from .errors import ParameterError, TraceExhaustedError, TraceParseError
from .models import as_fraction

logger = logging.getLogger(__name__)

EPOCHS_PER_HOUR = 4
REQUIRED_COLUMNS = ("timestamp", "carbon_intensity")


@dataclass(frozen=True)
class CarbonTrace:
    """Carbon intensity (gCO2/kWh) per epoch."""

    intensities: tuple[Fraction, ...]
    origin_label: str = ""

    def __post_init__(self) -> None:
        values = tuple(as_fraction(v) for v in self.intensities)
        if not values:
            raise ParameterError("carbon trace is empty")
        for i, v in enumerate(values):
            if v < 0:
                raise ParameterError(f"carbon trace epoch {i} is negative ({v})")
        object.__setattr__(self, "intensities", values)

    def __len__(self) -> int:
        return len(self.intensities)

    def __getitem__(self, epoch: int) -> Fraction:
        return self.intensities[epoch]

    @cached_property
    def prefix(self) -> tuple[Fraction, ...]:
        return (Fraction(0),) + tuple(accumulate(self.intensities))

    def require(self, length: int) -> None:
        if length > len(self.intensities):
            raise TraceExhaustedError(length, len(self.intensities))

    def window_sum(self, start: int, end: int) -> Fraction:
        """Sum of intensities over epochs [start, end)."""
        self.require(end)
        return self.prefix[end] - self.prefix[start]

    def shifted(self, delta: int | Fraction) -> CarbonTrace:
        return CarbonTrace(tuple(v + delta for v in self.intensities), f"{self.origin_label}+{delta}")


def expand_hourly(values: Iterable[Fraction], label: str = "") -> CarbonTrace:
    """Replicate each hourly value into EPOCHS_PER_HOUR consecutive epochs."""
    epochs = [v for v in values for _ in range(EPOCHS_PER_HOUR)]
    return CarbonTrace(tuple(epochs), label)


def load_hourly_csv(
    source: str | Path | IO[str],
    start_row_offset: int = 0,
    length: int | None = None,
    label: str | None = None,
) -> CarbonTrace:
    """Load an hourly `timestamp,carbon_intensity` CSV and expand it to epochs.

    Rows are numbered from 1 for the first data row. The trace starts at
    `start_row_offset` (0-based data row) and is optionally cut to `length` epochs.
    """
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise TraceParseError(0, f"unreadable CSV: {e}") from e
    except UnicodeDecodeError as e:
        raise TraceParseError(0, f"CSV is not UTF-8 text: {e}") from e

    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise TraceParseError(0, f"missing columns {missing}")
    if frame.empty:
        raise TraceParseError(0, "no data rows")

    values: list[Fraction] = []
    previous = None
    for row, (raw_ts, raw_ci) in enumerate(zip(frame["timestamp"], frame["carbon_intensity"]), start=1):
        try:
            ts = pd.Timestamp(raw_ts.strip())
        except ValueError as e:
            raise TraceParseError(row, f"bad timestamp {raw_ts!r}") from e
        if pd.isna(ts):
            raise TraceParseError(row, f"bad timestamp {raw_ts!r}")
        if ts.tzinfo is None:
            ts = ts.tz_localize("UTC")
        if previous is not None and ts <= previous:
            raise TraceParseError(row, f"timestamp {raw_ts} does not increase")
        previous = ts
        try:
            ci = Fraction(raw_ci.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise TraceParseError(row, f"non-numeric carbon_intensity {raw_ci!r}") from e
        if ci < 0:
            raise TraceParseError(row, f"negative carbon_intensity {raw_ci}")
        values.append(ci)

    if not 0 <= start_row_offset < len(values):
        raise ParameterError(f"start_row_offset {start_row_offset} outside [0, {len(values)})")

    name = label if label is not None else f"{Path(str(getattr(source, 'name', source))).stem}@{start_row_offset}"
    trace = expand_hourly(values[start_row_offset:], name)
    logger.info("loaded %d hourly rows from %s (offset %d)", len(values), name, start_row_offset)
    if length is not None:
        trace.require(length)
        trace = CarbonTrace(trace.intensities[:length], name)
    return trace


def synthetic_sinusoid(
    mean: float | Fraction,
    amplitude: float | Fraction,
    period_epochs: int,
    phase_epochs: int,
    length: int,
    label: str | None = None,
) -> CarbonTrace:
    """mean + amplitude * sin(2*pi*(tau + phase) / period), clamped at zero."""
    if amplitude < 0 or mean < amplitude:
        raise ParameterError(f"need mean >= amplitude >= 0, got mean={mean} amplitude={amplitude}")
    if period_epochs < 1:
        raise ParameterError(f"period_epochs must be >= 1, got {period_epochs}")
    if length < 1:
        raise ParameterError(f"length must be >= 1, got {length}")

    tau = np.arange(length, dtype=np.float64)
    wave = float(mean) + float(amplitude) * np.sin(2 * np.pi * (tau + phase_epochs) / period_epochs)
    wave = np.maximum(wave, 0.0)
    name = label or f"sin(mean={mean},amp={amplitude},period={period_epochs},phase={phase_epochs})"
    # Quantized to 6 decimals so carbon totals stay short exact fractions.
    return CarbonTrace(tuple(Fraction(str(round(float(v), 6))) for v in wave), name)
