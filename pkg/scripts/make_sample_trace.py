#!/usr/bin/env python3
"""greenshop: write a small hourly carbon-intensity CSV so the ingestion path runs without external data.

Usage:
    python scripts/make_sample_trace.py                     # data/sample_trace.csv, 2 weeks
    python scripts/make_sample_trace.py --hours 72 --out /tmp/trace.csv
    python scripts/make_sample_trace.py --dry-run           # Preview the first rows only
"""

import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from packages.core.traces import load_hourly_csv


def sample_frame(hours: int, mean: float, amplitude: float, period_hours: int, start: str) -> pd.DataFrame:
    t = np.arange(hours, dtype=np.float64)
    values = np.maximum(mean + amplitude * np.sin(2 * np.pi * t / period_hours), 0.0)
    return pd.DataFrame({
        "timestamp": pd.date_range(start, periods=hours, freq="h", tz="UTC").strftime("%Y-%m-%dT%H:%M:%SZ"),
        "carbon_intensity": np.round(values, 1),
    })


@click.command()
@click.option("--hours", default=24 * 14, show_default=True, type=int)
@click.option("--mean", default=300.0, show_default=True, type=float, help="gCO2/kWh")
@click.option("--amplitude", default=250.0, show_default=True, type=float, help="gCO2/kWh")
@click.option("--period", "period_hours", default=24, show_default=True, type=int, help="Hours per cycle")
@click.option("--start", default="2024-01-01", show_default=True)
@click.option("--out", "-o", default="data/sample_trace.csv", show_default=True)
@click.option("--dry-run", is_flag=True, help="Print the first rows without writing")
def main(hours, mean, amplitude, period_hours, start, out, dry_run):
    frame = sample_frame(hours, mean, amplitude, period_hours, start)
    if dry_run:
        print(frame.head(8).to_string(index=False))
        print(f"\n[DRY RUN] {len(frame)} rows not written. Remove --dry-run to write {out}.")
        return

    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    trace = load_hourly_csv(path)
    print(f"Wrote {len(frame)} hourly rows to {path} ({len(trace)} epochs after expansion)")


if __name__ == "__main__":
    main()
