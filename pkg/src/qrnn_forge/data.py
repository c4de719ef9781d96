"""Daily market-data ingestion, feature pipelines, windowing, and synthetic series.

Input CSV schema: `date,open,high,low,close[,<named numeric columns>...]` with
ISO dates. Two feature specs are built in:

  yahoo3:  [return, log(high / prev close), log(low / prev close)]
  oxford7: [spx return, spx realized vol, previous-day spx open-close return,
            dia return, dia realized vol, ndx return, ndx realized vol]

Returns are computed from closes; realized-volatility and open-close columns
pass through from the input. The first row is dropped (no previous close).
A seeded geometric-Brownian generator with a GARCH-like volatility column
stands in for licensed market data in tests and CI runs.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

BASE_COLUMNS = ("date", "open", "high", "low", "close")

FEATURE_SPECS = {
    "yahoo3": {"extra_columns": (), "n_features": 3},
    "oxford7": {
        "extra_columns": ("spx_rv", "spx_open_close", "dia_close", "dia_rv",
                          "ndx_close", "ndx_rv"),
        "n_features": 7,
    },
}


@dataclass(frozen=True)
class OhlcRecord:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    extras: dict = field(default_factory=dict)

    def validate(self, row: int) -> None:
        if not (self.low > 0):
            raise ValueError(f"row {row}: non-positive low price {self.low}")
        if not (self.high >= max(self.open, self.close)
                and min(self.open, self.close) >= self.low):
            raise ValueError(
                f"row {row}: OHLC ordering violated "
                f"(o={self.open}, h={self.high}, l={self.low}, c={self.close})"
            )


@dataclass
class SequenceSample:
    """seq_len preprocessed feature rows plus the next row's target.

    target is in the units of the windowed matrix; target_probability repeats
    it, which equals p^x when the matrix is min-max scaled with the target
    feature's training bounds.
    """

    inputs: np.ndarray
    target: float
    target_probability: float
    target_date: dt.date | None = None
    input_dates: tuple = ()


def load_csv(path, extra_columns=()) -> list[OhlcRecord]:
    """Parse, validate, and date-sort daily records; duplicates are rejected."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (*BASE_COLUMNS, *extra_columns):
            if col not in header:
                raise ValueError(f"missing required column '{col}' in {path}")
        records = []
        for row_num, row in enumerate(reader, start=2):  # header is line 1
            try:
                date = dt.date.fromisoformat(row["date"].strip())
            except ValueError as exc:
                raise ValueError(f"row {row_num}: bad date {row['date']!r}") from exc
            values = {}
            for col in (*BASE_COLUMNS[1:], *extra_columns):
                try:
                    values[col] = float(row[col])
                except (TypeError, ValueError) as exc:
                    raise ValueError(
                        f"row {row_num}: unparseable number {row[col]!r} in column '{col}'"
                    ) from exc
            record = OhlcRecord(
                date=date,
                open=values["open"], high=values["high"],
                low=values["low"], close=values["close"],
                extras={c: values[c] for c in extra_columns},
            )
            record.validate(row_num)
            records.append(record)
    seen = {}
    for i, r in enumerate(records):
        if r.date in seen:
            raise ValueError(f"duplicate date {r.date} (rows {seen[r.date]} and {i})")
        seen[r.date] = i
    return sorted(records, key=lambda r: r.date)


def _returns(closes: np.ndarray) -> np.ndarray:
    return closes[1:] / closes[:-1] - 1.0


def compute_features(records: list[OhlcRecord], spec: str) -> tuple[np.ndarray, list]:
    """Feature matrix plus the date of each row; the first record is dropped."""
    if spec not in FEATURE_SPECS:
        raise ValueError(f"unknown feature spec '{spec}' (have {sorted(FEATURE_SPECS)})")
    if len(records) < 2:
        raise ValueError("need at least 2 records to compute returns")
    closes = np.array([r.close for r in records])
    dates = [r.date for r in records[1:]]
    if spec == "yahoo3":
        highs = np.array([r.high for r in records[1:]])
        lows = np.array([r.low for r in records[1:]])
        prev_close = closes[:-1]
        if np.any(highs <= 0) or np.any(lows <= 0) or np.any(prev_close <= 0):
            raise ValueError("non-positive price in a log argument")
        matrix = np.column_stack([
            _returns(closes),
            np.log(highs / prev_close),
            np.log(lows / prev_close),
        ])
        return matrix, dates
    extra = lambda name: np.array([r.extras[name] for r in records])
    dia_close, ndx_close = extra("dia_close"), extra("ndx_close")
    matrix = np.column_stack([
        _returns(closes),
        extra("spx_rv")[1:],
        extra("spx_open_close")[:-1],  # previous day's open-to-close return
        _returns(dia_close),
        extra("dia_rv")[1:],
        _returns(ndx_close),
        extra("ndx_rv")[1:],
    ])
    return matrix, dates


def windowize(matrix: np.ndarray, seq_len: int, target_index: int,
              dates=None) -> list[SequenceSample]:
    """Overlapping stride-1 windows; sample t gets rows [t, t+seq_len) and the
    target_index column of row t+seq_len."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    rows = len(matrix)
    if rows < seq_len + 1:
        raise ValueError(f"too few rows: {rows} < seq_len + 1 = {seq_len + 1}")
    if not 0 <= target_index < matrix.shape[1]:
        raise ValueError(f"target_index {target_index} out of range")
    samples = []
    for t in range(rows - seq_len):
        value = float(matrix[t + seq_len, target_index])
        samples.append(SequenceSample(
            inputs=matrix[t:t + seq_len].copy(),
            target=value,
            target_probability=value,
            target_date=dates[t + seq_len] if dates else None,
            input_dates=tuple(dates[t:t + seq_len]) if dates else (),
        ))
    return samples


def split(samples: list[SequenceSample], test_ratio: float):
    """Chronological split: first ceil((1 - ratio) * M) samples train, rest test."""
    if not 0.0 <= test_ratio < 1.0:
        raise ValueError("test_ratio must lie in [0, 1)")
    n_train = math.ceil((1.0 - test_ratio) * len(samples))
    train, test = samples[:n_train], samples[n_train:]
    if not test:
        warnings.warn("test split is empty at this ratio", stacklevel=2)
    return train, test


def synthetic(seed: int, n_days: int, spec: str = "yahoo3", drift: float = 2e-4,
              volatility: float = 0.01) -> list[OhlcRecord]:
    """Geometric-Brownian closes with intraday envelopes and a GARCH-like
    volatility column; fully deterministic per seed. volatility == 0 yields
    constant returns."""
    if n_days < 2:
        raise ValueError("n_days must be >= 2")
    if spec not in FEATURE_SPECS:
        raise ValueError(f"unknown feature spec '{spec}'")
    rng = np.random.default_rng(seed)
    alpha, beta = 0.08, 0.90
    base_var = volatility**2
    omega = base_var * (1 - alpha - beta)
    records = []
    date = dt.date(2017, 1, 2)
    closes = {"spx": 100.0, "dia": 180.0, "ndx": 55.0}
    variances = {"spx": base_var, "dia": base_var, "ndx": base_var}
    last_innovation = {"spx": 0.0, "dia": 0.0, "ndx": 0.0}
    last_ret = 0.0
    for _ in range(n_days):
        z = rng.normal(size=3)
        shocks = {
            "spx": z[0],
            "dia": 0.8 * z[0] + 0.6 * z[1],
            "ndx": 0.7 * z[0] + math.sqrt(1 - 0.49) * z[2],
        }
        sigma = {}
        for key in closes:
            variances[key] = omega + alpha * last_innovation[key] ** 2 + beta * variances[key]
            sigma[key] = math.sqrt(variances[key])
            innovation = sigma[key] * shocks[key]
            last_innovation[key] = innovation
            ret = drift + innovation
            if key == "spx":
                last_ret = ret
            closes[key] *= math.exp(ret)
        prev_close = closes["spx"] / math.exp(last_ret)
        open_px = prev_close * math.exp(0.3 * sigma["spx"] * rng.normal())
        close_px = closes["spx"]
        span_hi = abs(rng.normal()) * 0.5 * sigma["spx"]
        span_lo = abs(rng.normal()) * 0.5 * sigma["spx"]
        high = max(open_px, close_px) * math.exp(span_hi)
        low = min(open_px, close_px) * math.exp(-span_lo)
        extras = {}
        if spec == "oxford7":
            extras = {
                "spx_rv": sigma["spx"],
                "spx_open_close": close_px / open_px - 1.0,
                "dia_close": closes["dia"],
                "dia_rv": sigma["dia"],
                "ndx_close": closes["ndx"],
                "ndx_rv": sigma["ndx"],
            }
        records.append(OhlcRecord(date, open_px, high, low, close_px, extras))
        date += dt.timedelta(days=1)
    return records


def samples_to_jsonl(samples: list[SequenceSample], path) -> None:
    """One JSON object per sample: inputs, target, target_probability, dates."""
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps({
                "inputs": s.inputs.tolist(),
                "target": s.target,
                "target_probability": s.target_probability,
                "target_date": s.target_date.isoformat() if s.target_date else None,
                "input_dates": [d.isoformat() for d in s.input_dates],
            }) + "\n")


def samples_from_jsonl(path) -> list[SequenceSample]:
    samples = []
    with open(path) as fh:
        for line in fh:
            doc = json.loads(line)
            samples.append(SequenceSample(
                inputs=np.array(doc["inputs"], dtype=float),
                target=doc["target"],
                target_probability=doc["target_probability"],
                target_date=(dt.date.fromisoformat(doc["target_date"])
                             if doc["target_date"] else None),
                input_dates=tuple(dt.date.fromisoformat(d) for d in doc["input_dates"]),
            ))
    return samples


def records_to_csv(records: list[OhlcRecord], path) -> None:
    """Write records in the load_csv schema (used to materialize synthetic data)."""
    extra_columns = sorted(records[0].extras) if records and records[0].extras else []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*BASE_COLUMNS, *extra_columns])
        for r in records:
            writer.writerow([r.date.isoformat(), repr(r.open), repr(r.high),
                             repr(r.low), repr(r.close),
                             *[repr(r.extras[c]) for c in extra_columns]])
