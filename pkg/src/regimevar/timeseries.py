"""Loading, aligning, transforming, and summarizing timestamped series.

Timestamps are stored as naive UTC ``datetime64[s]`` instants; monthly data
are keyed to the first of the month.  Values live in a ``(T, k)`` float
matrix in which ``NaN`` is the explicit missing-data marker -- operations
never impute, they either tolerate missing cells (``describe``) or reject
them outright.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import DataError

_TS_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d")

MONTHLY = "monthly"
HOURLY = "hourly"
IRREGULAR = "irregular"
_FREQUENCIES = (MONTHLY, HOURLY, IRREGULAR)


def parse_timestamp(text: str) -> np.datetime64:
    """Parse ``YYYY-MM-DD`` or ``YYYY-MM-DD HH:MM:SS`` into datetime64[s]."""
    text = text.strip()
    for fmt in _TS_FORMATS:
        try:
            return np.datetime64(datetime.strptime(text, fmt), "s")
        except ValueError:
            continue
    raise DataError(f"unparseable timestamp {text!r} (expected ISO-8601 date or datetime)")


def format_timestamp(ts: np.datetime64, date_only: bool = False) -> str:
    text = str(np.datetime64(ts, "s"))
    if date_only:
        return text[:10]
    return text.replace("T", " ")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """An ordered multivariate sample: T timestamps against a T x k value matrix."""

    timestamps: np.ndarray
    names: tuple[str, ...]
    values: np.ndarray
    frequency: str

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        names = tuple(str(n) for n in self.names)
        if vals.ndim != 2:
            raise DataError("values must be a T x k matrix")
        if len(ts) != vals.shape[0]:
            raise DataError(
                f"{len(ts)} timestamps for {vals.shape[0]} value rows"
            )
        if len(ts) == 0:
            raise DataError("no observations")
        if vals.shape[1] != len(names):
            raise DataError(f"{len(names)} names for {vals.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError(f"duplicate column names: {names}")
        if len(ts) > 1 and not np.all(ts[1:] > ts[:-1]):
            raise DataError("timestamps must be strictly increasing")
        if np.isinf(vals).any():
            raise DataError("non-finite value (inf) in series")
        if np.isnan(vals).all(axis=0).any():
            bad = [names[j] for j in np.flatnonzero(np.isnan(vals).all(axis=0))]
            raise DataError(f"column(s) entirely missing: {bad}")
        if self.frequency not in _FREQUENCIES:
            raise DataError(f"unknown frequency {self.frequency!r}")
        object.__setattr__(self, "timestamps", _freeze(ts))
        object.__setattr__(self, "values", _freeze(vals))
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise DataError(f"no column named {name!r}; have {self.names}")
        return self.values[:, self.names.index(name)]

    def select(self, names: tuple[str, ...] | list[str]) -> "TimeSeries":
        idx = [self.names.index(n) if n in self.names else -1 for n in names]
        missing = [n for n, i in zip(names, idx) if i < 0]
        if missing:
            raise DataError(f"no column named {missing[0]!r}; have {self.names}")
        return TimeSeries(self.timestamps, tuple(names), self.values[:, idx], self.frequency)

    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())


@dataclass(frozen=True)
class StatsSummary:
    """Per-column sample moments.

    Skewness and kurtosis use the bias-corrected spreadsheet estimators
    (kurtosis is *excess*: a large normal sample scores near 0); the exact
    formulas are spelled out in the README.
    """

    columns: tuple[str, ...]
    mean: np.ndarray
    median: np.ndarray
    std: np.ndarray
    kurtosis: np.ndarray
    skewness: np.ndarray
    range: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    count: np.ndarray

    FIELDS = ("mean", "median", "std", "kurtosis", "skewness", "range", "minimum", "maximum", "count")

    def __post_init__(self):
        for f in self.FIELDS:
            arr = np.asarray(getattr(self, f))
            if arr.shape != (len(self.columns),):
                raise DataError(f"StatsSummary field {f} has shape {arr.shape}")
            object.__setattr__(self, f, _freeze(arr))
        if not np.array_equal(self.range, self.maximum - self.minimum):
            raise DataError("range must equal maximum - minimum exactly")
        if np.any(self.median < self.minimum) or np.any(self.median > self.maximum):
            raise DataError("median outside [minimum, maximum]")

    def for_column(self, name: str) -> dict:
        j = self.columns.index(name)
        out = {f: getattr(self, f)[j] for f in self.FIELDS}
        out["count"] = int(out["count"])
        return out


@dataclass(frozen=True)
class EventCalendar:
    """Scheduled policy announcements: instant plus actual/forecast/previous rates.

    Rates are fractions (0.0550 means 5.5%).
    """

    timestamps: np.ndarray
    actual: np.ndarray
    forecast: np.ndarray
    previous: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        if len(ts) == 0:
            raise DataError("empty event calendar")
        if len(ts) > 1 and not np.all(ts[1:] > ts[:-1]):
            raise DataError("event datetimes must be strictly increasing")
        object.__setattr__(self, "timestamps", _freeze(ts))
        for f in ("actual", "forecast", "previous"):
            arr = np.asarray(getattr(self, f), dtype=float)
            if arr.shape != ts.shape:
                raise DataError(f"event field {f} length mismatch")
            if not np.isfinite(arr).all():
                raise DataError(f"non-finite rate in event field {f}")
            object.__setattr__(self, f, _freeze(arr))

    def __len__(self) -> int:
        return len(self.timestamps)


def _infer_frequency(ts: np.ndarray) -> str:
    sec = ts.astype("datetime64[s]").astype("int64")
    days = ts.astype("datetime64[D]")
    months = ts.astype("datetime64[M]")
    first_of_month = (days == months.astype("datetime64[D]")) & (sec % 86400 == 0)
    if first_of_month.all():
        return MONTHLY
    if (sec % 3600 == 0).all():
        return HOURLY
    return IRREGULAR


def load_csv(
    path,
    timestamp_column: str = "date",
    value_columns: tuple[str, ...] | list[str] | None = None,
    frequency: str | None = None,
) -> TimeSeries:
    """Read a header-rowed CSV into a TimeSeries, sorted by timestamp.

    ``value_columns=None`` takes every non-timestamp column.  Empty cells
    become explicit missing values; anything else that fails to parse is
    rejected with its line and column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if timestamp_column not in header:
            raise DataError(f"{path}: no timestamp column {timestamp_column!r} in header {header}")
        if value_columns is None:
            value_columns = tuple(h for h in header if h != timestamp_column)
        else:
            value_columns = tuple(value_columns)
            for c in value_columns:
                if c not in header:
                    raise DataError(f"{path}: no column {c!r} in header {header}")
        if not value_columns:
            raise DataError(f"{path}: schema selects no value columns")
        t_idx = header.index(timestamp_column)
        v_idx = [header.index(c) for c in value_columns]

        stamps, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise DataError(f"{path}: line {lineno}: {len(row)} cells, expected {len(header)}")
            try:
                stamps.append(parse_timestamp(row[t_idx]))
            except DataError as exc:
                raise DataError(f"{path}: line {lineno}, column {timestamp_column!r}: {exc}") from None
            vals = []
            for c, j in zip(value_columns, v_idx):
                cell = row[j].strip()
                if cell == "":
                    vals.append(math.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: line {lineno}, column {c!r}: unparseable numeric cell {cell!r}"
                    ) from None
            rows.append(vals)

    if not rows:
        raise DataError(f"{path}: no observations")
    ts = np.array(stamps, dtype="datetime64[s]")
    vals = np.array(rows, dtype=float)
    order = np.argsort(ts, kind="stable")
    ts, vals = ts[order], vals[order]
    if len(ts) > 1 and (ts[1:] == ts[:-1]).any():
        dup = ts[1:][ts[1:] == ts[:-1]][0]
        raise DataError(f"{path}: duplicate timestamp {format_timestamp(dup)}")
    freq = frequency if frequency is not None else _infer_frequency(ts)
    return TimeSeries(ts, tuple(value_columns), vals, freq)


def to_csv(series: TimeSeries, path, timestamp_column: str = "date") -> None:
    """Write a TimeSeries back to the CSV schema ``load_csv`` reads."""
    sec = series.timestamps.astype("int64")
    date_only = bool((sec % 86400 == 0).all())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([timestamp_column, *series.names])
        for t, row in zip(series.timestamps, series.values):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in row]
            writer.writerow([format_timestamp(t, date_only=date_only), *cells])


def load_event_calendar(path) -> EventCalendar:
    """Read an event CSV with columns datetime, actual, forecast, previous."""
    series = load_csv(path, timestamp_column="datetime",
                      value_columns=("actual", "forecast", "previous"))
    if series.has_missing():
        raise DataError(f"{path}: missing rate cells in event calendar")
    return EventCalendar(series.timestamps, series.values[:, 0],
                         series.values[:, 1], series.values[:, 2])


def log_returns(series: TimeSeries) -> TimeSeries:
    """ln(P_t / P_{t-1}) per column; output keyed to the later timestamp."""
    if series.has_missing():
        bad = int(np.flatnonzero(np.isnan(series.values).any(axis=1))[0])
        raise DataError(f"missing value at row {bad} ({format_timestamp(series.timestamps[bad])}); "
                        "log returns require complete data")
    nonpos = series.values <= 0.0
    if nonpos.any():
        i, j = np.argwhere(nonpos)[0]
        raise DataError(
            f"non-positive value {series.values[i, j]!r} in column {series.names[j]!r} "
            f"at row {int(i)} ({format_timestamp(series.timestamps[i])})"
        )
    if len(series) < 2:
        raise DataError("need at least 2 observations for returns")
    rets = np.log(series.values[1:] / series.values[:-1])
    return TimeSeries(series.timestamps[1:], series.names, rets, series.frequency)


def _moments(x: np.ndarray) -> tuple:
    """One column's moments via the spreadsheet conventions; x has no NaN."""
    n = len(x)
    mean = float(np.mean(x))
    med = float(np.median(x))
    sd = float(np.std(x, ddof=1))
    if n >= 3 and sd > 0:
        z3 = float(np.sum(((x - mean) / sd) ** 3))
        skew = n / ((n - 1) * (n - 2)) * z3
    else:
        skew = math.nan
    if n >= 4 and sd > 0:
        z4 = float(np.sum(((x - mean) / sd) ** 4))
        kurt = (n * (n + 1)) / ((n - 1) * (n - 2) * (n - 3)) * z4 \
            - 3 * (n - 1) ** 2 / ((n - 2) * (n - 3))
    else:
        kurt = math.nan
    return mean, med, sd, kurt, skew


def describe(series: TimeSeries) -> StatsSummary:
    """Per-column descriptive statistics over the non-missing observations."""
    cols = series.names
    out = {f: [] for f in StatsSummary.FIELDS}
    for j in range(series.k):
        x = series.values[:, j]
        x = x[~np.isnan(x)]
        if len(x) < 2:
            raise DataError(f"column {cols[j]!r}: dispersion undefined with {len(x)} observation(s)")
        mean, med, sd, kurt, skew = _moments(x)
        mn, mx = float(np.min(x)), float(np.max(x))
        out["mean"].append(mean)
        out["median"].append(med)
        out["std"].append(sd)
        out["kurtosis"].append(kurt)
        out["skewness"].append(skew)
        out["minimum"].append(mn)
        out["maximum"].append(mx)
        out["range"].append(mx - mn)
        out["count"].append(len(x))
    return StatsSummary(
        columns=cols,
        mean=np.array(out["mean"]),
        median=np.array(out["median"]),
        std=np.array(out["std"]),
        kurtosis=np.array(out["kurtosis"]),
        skewness=np.array(out["skewness"]),
        range=np.array(out["range"]),
        minimum=np.array(out["minimum"]),
        maximum=np.array(out["maximum"]),
        count=np.array(out["count"], dtype=int),
    )


def _merged_names(a: TimeSeries, b: TimeSeries) -> tuple[str, ...]:
    names = list(a.names)
    for n in b.names:
        cand, i = n, 2
        while cand in names:
            cand = f"{n}_{i}"
            i += 1
        names.append(cand)
    return tuple(names)


def align(a: TimeSeries, b: TimeSeries, policy: str = "inner-join") -> TimeSeries:
    """Merge two series into one multivariate series.

    ``inner-join`` keeps the timestamp intersection (frequencies must match);
    ``forward-fill`` keys the result to ``b``'s timestamps and carries the
    most recent ``a`` row at or before each of them.
    """
    if policy == "inner-join":
        if a.frequency != b.frequency:
            raise DataError(
                f"inner-join requires identical frequency ({a.frequency} vs {b.frequency}); "
                "use forward-fill to mix resolutions"
            )
        common, ia, ib = np.intersect1d(a.timestamps, b.timestamps, return_indices=True)
        if len(common) == 0:
            raise DataError("inner-join produced no common timestamps")
        vals = np.hstack([a.values[ia], b.values[ib]])
        ts = common
    elif policy == "forward-fill":
        pos = np.searchsorted(a.timestamps, b.timestamps, side="right") - 1
        if (pos < 0).any():
            first = b.timestamps[int(np.flatnonzero(pos < 0)[0])]
            raise DataError(
                f"forward-fill: timestamp {format_timestamp(first)} precedes the filling series"
            )
        vals = np.hstack([a.values[pos], b.values])
        ts = b.timestamps
    else:
        raise DataError(f"unknown align policy {policy!r} (inner-join or forward-fill)")
    return TimeSeries(ts, _merged_names(a, b), vals, _infer_frequency(ts))


def event_returns(prices: TimeSeries, calendar: EventCalendar, window: int = 1) -> TimeSeries:
    """Per event: log price return over the ``window`` hours after the
    announcement instant, paired with the rate change (actual - previous)."""
    if prices.frequency != HOURLY:
        raise DataError(f"event returns need hourly prices, got {prices.frequency}")
    if prices.k != 1:
        raise DataError(f"event returns need a single price column, got {prices.names}")
    if window < 1:
        raise DataError("window must be at least 1 hour")
    if prices.has_missing():
        raise DataError("missing price cells; event returns require complete data")
    px = prices.values[:, 0]
    if (px <= 0).any():
        i = int(np.flatnonzero(px <= 0)[0])
        raise DataError(f"non-positive price at {format_timestamp(prices.timestamps[i])}")
    rets = np.empty(len(calendar))
    for i, instant in enumerate(calendar.timestamps):
        start = np.searchsorted(prices.timestamps, instant)
        if start >= len(prices) or prices.timestamps[start] != instant:
            raise DataError(f"event {format_timestamp(instant)}: no matching price bar")
        end_ts = instant + np.timedelta64(window * 3600, "s")
        end = np.searchsorted(prices.timestamps, end_ts)
        if end >= len(prices) or prices.timestamps[end] != end_ts:
            raise DataError(
                f"event {format_timestamp(instant)}: no price bar {window}h later "
                f"({format_timestamp(end_ts)})"
            )
        rets[i] = math.log(px[end] / px[start])
    rate_change = calendar.actual - calendar.previous
    return TimeSeries(calendar.timestamps, ("return", "rate_change"),
                      np.column_stack([rets, rate_change]), IRREGULAR)
