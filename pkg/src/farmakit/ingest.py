"""Reading per-minute measurement CSVs and turning them into functional data.

Input rows look like ``date,minute,value`` with an empty value for a missing
reading. Optional ``lane,count`` columns hold per-lane readings, which are
combined into one value per minute weighted by ``count``.
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field

import numpy as np

from .fnspace import BasisSpec, FunctionSample, FunctionSeries, minute_grid, smooth_series

__all__ = [
    "RawDayRecord",
    "IngestResult",
    "PreprocessReport",
    "ingest",
    "write_raw_csv",
    "preprocess",
]

MAX_MISSING = 0.2


@dataclass(frozen=True, eq=False)
class RawDayRecord:
    """One day of gap-filled readings; ``missing_mask`` marks interpolated minutes."""

    date: _dt.date
    values: np.ndarray
    missing_mask: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        m = np.array(self.missing_mask, dtype=bool)
        if v.shape != m.shape or v.ndim != 1:
            raise ValueError("values and missing_mask must be 1-d arrays of equal length")
        v.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "missing_mask", m)


@dataclass
class IngestResult:
    records: list
    dropped: list = field(default_factory=list)  # (date, missing fraction)
    interpolated: int = 0

    @property
    def n_input(self) -> int:
        return len(self.records) + len(self.dropped)


@dataclass
class PreprocessReport:
    """Bookkeeping of :func:`preprocess`.

    ``kept + sum(dropped.values()) == n_input`` always holds.
    """

    n_input: int
    kept: int
    dropped: dict
    interpolated: int
    weekday_means: dict
    screening: dict
    dates: list

    def summary(self) -> str:
        drops = ", ".join(f"{k}={v}" for k, v in self.dropped.items()) or "none"
        return (
            f"days in={self.n_input} kept={self.kept} dropped: {drops}; "
            f"interpolated minutes={self.interpolated}; "
            f"variance drift ratio={self.screening.get('variance_ratio', float('nan')):.3f}"
        )


def _parse_float(text, lineno, what):
    try:
        x = float(text)
    except ValueError:
        raise ValueError(f"line {lineno}: {what} {text!r} is not a number") from None
    if not np.isfinite(x):
        raise ValueError(f"line {lineno}: {what} must be finite")
    return x


def ingest(path, minutes: int = 1440, max_missing: float = MAX_MISSING) -> IngestResult:
    """Read a measurement CSV into gap-filled daily records.

    Days with more than ``max_missing`` of their minutes missing are dropped
    and reported. Remaining gaps are filled by linear interpolation between
    the neighbouring readings (held constant before the first and after the
    last reading of the day).

    Raises
    ------
    ValueError
        For an empty file, a bad header, or a malformed row (the message
        names the line number).
    """
    sums: dict = {}
    weights: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: file is empty")
        header = [h.strip().lower() for h in header]
        if header[:3] != ["date", "minute", "value"]:
            raise ValueError(f"{path}: line 1: expected header date,minute,value[,lane,count], got {','.join(header)}")
        lanes = len(header) >= 5 and header[3:5] == ["lane", "count"]
        if len(header) not in (3, 5) or (len(header) == 5 and not lanes):
            raise ValueError(f"{path}: line 1: unexpected columns {','.join(header[3:])}")
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                date = _dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: bad date {row[0]!r}") from None
            try:
                minute = int(row[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: bad minute {row[1]!r}") from None
            if not 0 <= minute < minutes:
                raise ValueError(f"{path}: line {lineno}: minute {minute} outside 0..{minutes - 1}")
            key = (date, minute, row[3].strip() if lanes else None)
            if key in seen:
                raise ValueError(f"{path}: line {lineno}: duplicate reading for {date} minute {minute}")
            seen.add(key)
            sums.setdefault(date, np.zeros(minutes))
            weights.setdefault(date, np.zeros(minutes))
            text = row[2].strip()
            if not text:
                continue
            value = _parse_float(text, lineno, "value")
            w = 1.0
            if lanes:
                w = _parse_float(row[4].strip() or "nan", lineno, "count")
                if w < 0:
                    raise ValueError(f"{path}: line {lineno}: negative count")
                if w == 0:
                    continue
            sums[date][minute] += w * value
            weights[date][minute] += w
    if not sums:
        raise ValueError(f"{path}: no data rows")

    result = IngestResult(records=[])
    grid = np.arange(minutes)
    for date in sorted(sums):
        w = weights[date]
        present = w > 0
        frac = 1.0 - present.mean()
        if frac > max_missing or not present.any():
            result.dropped.append((date, float(frac)))
            continue
        values = np.zeros(minutes)
        values[present] = sums[date][present] / w[present]
        missing = ~present
        if missing.any():
            values[missing] = np.interp(grid[missing], grid[present], values[present])
            result.interpolated += int(missing.sum())
        result.records.append(RawDayRecord(date, values, missing))
    return result


def write_raw_csv(records, path) -> None:
    """Write records as ``date,minute,value``; interpolated minutes are left empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "minute", "value"])
        for rec in records:
            d = rec.date.isoformat()
            for m, (v, miss) in enumerate(zip(rec.values, rec.missing_mask)):
                w.writerow([d, m, "" if miss else repr(float(v))])


def _screen(coeffs: np.ndarray, windows: int = 4) -> dict:
    # descriptive only: mean squared norm of the curves per block of days
    n = coeffs.shape[0]
    k = max(1, min(windows, n // 2))
    blocks = np.array_split(np.arange(n), k)
    energy = [float((coeffs[b] ** 2).sum(axis=1).mean()) for b in blocks]
    lo, hi = min(energy), max(energy)
    return {
        "windows": k,
        "window_energy": energy,
        "variance_ratio": hi / lo if lo > 0 else (1.0 if hi == 0 else float("inf")),
    }


def preprocess(records, basis: BasisSpec | None = None, weekday_mean: bool = True,
               weekdays_only: bool = True, K: int = 31):
    """Smooth daily records onto a Fourier basis and remove weekday means.

    Parameters
    ----------
    records : list of RawDayRecord or IngestResult
    basis : BasisSpec, optional
        Defaults to ``K`` Fourier functions on the records' minute grid.
    weekday_mean : bool
        Subtract the empirical mean function of each weekday.
    weekdays_only : bool
        Keep Monday to Friday only.

    Returns
    -------
    series : FunctionSeries
        One curve per kept day, labelled ``0..N-1`` in date order.
    report : PreprocessReport
    """
    dropped = {}
    interpolated = 0
    if isinstance(records, IngestResult):
        if records.dropped:
            dropped["missing"] = len(records.dropped)
        interpolated = records.interpolated
        records = records.records
    records = sorted(records, key=lambda r: r.date)
    n_input = len(records) + sum(dropped.values())
    if weekdays_only:
        kept = [r for r in records if r.date.weekday() < 5]
        if len(kept) < len(records):
            dropped["weekend"] = len(records) - len(kept)
        records = kept
    if len(records) < 2:
        raise ValueError(f"need at least 2 days after filtering, got {len(records)}")
    n_points = records[0].values.size
    if any(r.values.size != n_points for r in records):
        raise ValueError("records have different numbers of grid points")
    if basis is None:
        basis = BasisSpec(K, minute_grid(n_points))
    raw = np.stack([r.values for r in records])
    coeffs = smooth_series(raw, basis).coeffs.copy()
    means = {}
    if weekday_mean:
        wd = np.array([r.date.weekday() for r in records])
        for day in sorted(set(wd)):
            sel = wd == day
            mu = coeffs[sel].mean(axis=0)
            coeffs[sel] -= mu
            means[int(day)] = FunctionSample(mu, basis)
    series = FunctionSeries(coeffs, basis, 0)
    report = PreprocessReport(
        n_input=n_input,
        kept=len(records),
        dropped=dropped,
        interpolated=interpolated,
        weekday_means=means,
        screening=_screen(coeffs),
        dates=[r.date for r in records],
    )
    return series, report
