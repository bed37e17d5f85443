"""Ingestion of the PV meter and weather-station CSV exports.

The PV file is a cumulative energy counter sampled every ~5 minutes; the weather
file is hourly. Both are brought onto one uniform window grid per forecast
horizon, and remaining gaps are filled by linear interpolation.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
import re
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    ColumnAllMissing,
    EmptyInput,
    FrameMismatch,
    NoOverlap,
    ParseError,
    SchemaMismatch,
)

logger = logging.getLogger(__name__)

PV_COLUMNS = ("id", "datetime", "value", "unit")
PV_VALUE_RANGE = (-3600.0, 365365.0)

# canonical name -> normalised header aliases accepted in the weather CSV
WEATHER_FIELDS = {
    "cloud_coverage": ("cloudcoverage", "cloudcover", "clouds"),
    "air_pressure": ("airpressure", "pressure"),
    "temperature": ("temperature", "airtemperature"),
    "relative_humidity": ("relativehumidity", "humidity"),
    "wind_direction": ("winddirection",),
    "wind_speed_max": ("windspeedmax", "maxwindspeed"),
    "wind_speed_avg": ("windspeedaverage", "windspeedavg", "averagewindspeed", "windspeed"),
    "precipitation": ("precipitation",),
    "ghi": ("globalhorizontalirradiance", "ghi"),
    "sunshine": ("sunshine", "sunshineduration"),
}
WEATHER_COLUMNS = tuple(WEATHER_FIELDS)

WEATHER_RANGES = {
    "cloud_coverage": (0.0, 9.0),
    "air_pressure": (964.0, 1043.0),
    "temperature": (-24.9, 32.5),
    "relative_humidity": (17.0, 100.0),
    "wind_direction": (1.0, 360.0),
    "wind_speed_max": (0.5, 19.3),
    "wind_speed_avg": (0.2, 8.6),
    "precipitation": (0.0, 19.6),
    "ghi": (-1.0, 886.0),
    "sunshine": (0.0, 60.0),
}

# accumulations are summed when coarsening to 4 h; everything else is averaged
SUMMED_FIELDS = frozenset({"precipitation", "sunshine"})

TIMESTAMP_FORMATS = (
    "%m/%d/%Y %I:%M:%S %p",
    "%m/%d/%Y %I:%M %p",
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
)


class TimeFrame(enum.Enum):
    THIRTY_MIN = "30min"
    ONE_HOUR = "1h"
    FOUR_HOURS = "4h"

    @property
    def minutes(self) -> int:
        return {"30min": 30, "1h": 60, "4h": 240}[self.value]

    @property
    def delta(self) -> timedelta:
        return timedelta(minutes=self.minutes)

    @classmethod
    def parse(cls, text) -> "TimeFrame":
        if isinstance(text, TimeFrame):
            return text
        aliases = {"30min": "30min", "30m": "30min", "1h": "1h", "60min": "1h",
                   "4h": "4h", "240min": "4h"}
        key = str(text).strip().lower()
        if key not in aliases:
            raise ValueError(f"unknown time frame {text!r}; expected 30min, 1h or 4h")
        return cls(aliases[key])


ALL_FRAMES = (TimeFrame.THIRTY_MIN, TimeFrame.ONE_HOUR, TimeFrame.FOUR_HOURS)


@dataclass(frozen=True)
class RawPvRecord:
    panel_id: str
    timestamp: datetime
    cumulative_kwh: float
    unit: str


@dataclass(frozen=True)
class RawWeatherRecord:
    timestamp: datetime
    cloud_coverage: float
    air_pressure: float
    temperature: float
    relative_humidity: float
    wind_direction: float
    wind_speed_max: float
    wind_speed_avg: float
    precipitation: float
    ghi: float
    sunshine: float

    def values(self) -> list[float]:
        return [getattr(self, name) for name in WEATHER_COLUMNS]


@dataclass
class Reject:
    row: int
    reason: str


@dataclass
class ParsedFile:
    """Records of one CSV file plus everything that was wrong with it.

    ``row`` numbers count data rows from 1 (the header is row 0).
    """

    path: Path
    records: list
    rejects: list[Reject] = field(default_factory=list)
    out_of_range: list[Reject] = field(default_factory=list)
    order_violations: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


@dataclass
class IntervalEnergySeries:
    frame: TimeFrame
    timestamps: np.ndarray  # datetime64[s], window starts
    energy_kwh: np.ndarray
    missing_mask: np.ndarray
    n_resets: int = 0
    n_glitch_readings: int = 0

    def __len__(self):
        return len(self.timestamps)


@dataclass
class AlignedFrame:
    frame: TimeFrame
    timestamps: np.ndarray  # datetime64[s]
    features: np.ndarray  # (rows, columns), NaN marks missing
    target: np.ndarray
    column_names: list[str]
    filled: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.timestamps)
        if self.features.shape != (n, len(self.column_names)) or len(self.target) != n:
            raise ValueError("features, target and timestamps disagree in length")

    def __len__(self):
        return len(self.timestamps)

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.column_names.index(name)]

    def to_dataframe(self) -> pd.DataFrame:
        df = pd.DataFrame(self.features, columns=self.column_names)
        df.insert(0, "timestamp", pd.to_datetime(self.timestamps).strftime("%Y-%m-%dT%H:%M:%S"))
        df["target_kwh"] = self.target
        return df

    def to_csv(self, path) -> None:
        self.to_dataframe().to_csv(path, index=False, float_format="%.10g", lineterminator="\n")


def read_frame_csv(path, frame: TimeFrame | str | None = None) -> AlignedFrame:
    """Load an AlignedFrame previously written by :meth:`AlignedFrame.to_csv`."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"frame file not found: {path}")
    df = pd.read_csv(path)
    if "timestamp" not in df.columns or df.columns[-1] != "target_kwh":
        raise SchemaMismatch(f"{path}: expected 'timestamp' first and 'target_kwh' last")
    stamps = pd.to_datetime(df["timestamp"]).to_numpy().astype("datetime64[s]")
    if frame is None:
        if len(stamps) < 2:
            raise SchemaMismatch(f"{path}: cannot infer time frame from fewer than 2 rows")
        step = int((stamps[1] - stamps[0]).astype(int)) // 60
        frame = {30: TimeFrame.THIRTY_MIN, 60: TimeFrame.ONE_HOUR, 240: TimeFrame.FOUR_HOURS}[step]
    cols = [c for c in df.columns if c not in ("timestamp", "target_kwh")]
    return AlignedFrame(
        frame=TimeFrame.parse(frame),
        timestamps=stamps,
        features=df[cols].to_numpy(dtype=float),
        target=df["target_kwh"].to_numpy(dtype=float),
        column_names=cols,
    )


def _normalise_header(name: str) -> str:
    return re.sub(r"[^a-z0-9]", "", name.strip().lower())


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    for fmt in TIMESTAMP_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    raise ValueError(f"unrecognised timestamp {text!r}")


def _read_rows(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatch(f"{path}: file is empty, header row missing")
    return path, rows[0], rows[1:]


def parse_pv(file_path, strict: bool = False) -> ParsedFile:
    """Parse the PV meter export (``ID,DateTime,Value,Unit``).

    Malformed rows go to ``rejects``; with ``strict=True`` the first one raises
    :class:`ParseError` instead.
    """
    path, header, rows = _read_rows(file_path)
    if tuple(_normalise_header(h) for h in header) != PV_COLUMNS:
        raise SchemaMismatch(f"{path}: header {header} does not match ID,DateTime,Value,Unit")
    out = ParsedFile(path=path, records=[])
    lo, hi = PV_VALUE_RANGE
    prev = None
    for i, row in enumerate(rows, start=1):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != 4:
            if strict:
                raise ParseError(f"expected 4 fields, got {len(row)}", row=i)
            out.rejects.append(Reject(i, f"expected 4 fields, got {len(row)}"))
            continue
        try:
            stamp = parse_timestamp(row[1])
            value = float(row[2])
            if not math.isfinite(value):
                raise ValueError(f"non-finite value {row[2]!r}")
        except ValueError as exc:
            if strict:
                raise ParseError(str(exc), row=i) from None
            out.rejects.append(Reject(i, str(exc)))
            continue
        if not lo <= value <= hi:
            out.out_of_range.append(Reject(i, f"value {value} outside [{lo}, {hi}]"))
        if prev is not None and stamp <= prev:
            out.order_violations.append(i)
        prev = stamp
        out.records.append(RawPvRecord(row[0].strip(), stamp, value, row[3].strip()))
    logger.info("%s: %d PV records, %d rejects", path, len(out.records), len(out.rejects))
    return out


def _weather_column_map(path, header):
    norm = [_normalise_header(h) for h in header]
    if not norm or norm[0] not in ("datetime", "timestamp", "time", "date"):
        raise SchemaMismatch(f"{path}: first column must be the timestamp, got {header[:1]}")
    mapping = {}
    for name, aliases in WEATHER_FIELDS.items():
        hits = [j for j, h in enumerate(norm) if h in aliases]
        if len(hits) != 1:
            raise SchemaMismatch(f"{path}: weather column for {name!r} not found exactly once in {header}")
        mapping[name] = hits[0]
    return mapping


def parse_weather(file_path, strict: bool = False) -> ParsedFile:
    """Parse the hourly weather export.

    The first column holds the timestamp; the remaining columns are matched to
    the ten weather variables by (case/punctuation-insensitive) header name.
    Values outside the documented ranges are kept and listed in
    ``out_of_range``.
    """
    path, header, rows = _read_rows(file_path)
    mapping = _weather_column_map(path, header)
    out = ParsedFile(path=path, records=[])
    prev = None
    for i, row in enumerate(rows, start=1):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            if strict:
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=i)
            out.rejects.append(Reject(i, f"expected {len(header)} fields, got {len(row)}"))
            continue
        try:
            stamp = parse_timestamp(row[0])
            vals = {}
            for name, j in mapping.items():
                try:
                    vals[name] = float(row[j])
                except ValueError:
                    raise ValueError(f"{name}: non-numeric value {row[j]!r}") from None
        except ValueError as exc:
            if strict:
                raise ParseError(str(exc), row=i) from None
            out.rejects.append(Reject(i, str(exc)))
            continue
        for name, v in vals.items():
            lo, hi = WEATHER_RANGES[name]
            if not lo <= v <= hi:
                out.out_of_range.append(Reject(i, f"{name}={v} outside [{lo}, {hi}]"))
        if prev is not None and stamp <= prev:
            out.order_violations.append(i)
        prev = stamp
        out.records.append(RawWeatherRecord(timestamp=stamp, **vals))
    logger.info("%s: %d weather records, %d rejects", path, len(out.records), len(out.rejects))
    return out


def _to_seconds(stamps) -> np.ndarray:
    return np.array(stamps, dtype="datetime64[s]").astype(np.int64)


def _window_start(seconds: np.ndarray, frame: TimeFrame) -> np.ndarray:
    width = frame.minutes * 60
    return (seconds // width) * width


def cumulative_to_interval(records, frame: TimeFrame) -> IntervalEnergySeries:
    """Turn cumulative meter readings into energy produced per window.

    A reading taken at time ``tau`` closes the window ``(tau - w, tau]``, so a
    reading exactly on a boundary belongs to the window that ends there. Each
    window's energy is the sum of the consecutive differences of the readings it
    closes. A window is missing if it closes no difference, or if any of its
    differences is negative (meter reset). Negative readings are physically
    impossible for a cumulative counter and are discarded before differencing.
    Several panel IDs are differenced independently and summed; a window is
    then missing if it is missing for any panel.
    """
    records = list(records)
    if not records:
        raise EmptyInput("no PV records to convert")
    frame = TimeFrame.parse(frame)
    width = frame.minutes * 60

    by_panel: dict[str, list[RawPvRecord]] = {}
    for r in records:
        by_panel.setdefault(r.panel_id, []).append(r)

    n_glitch = sum(1 for r in records if r.cumulative_kwh < 0)
    per_panel = []
    n_resets = 0
    for recs in by_panel.values():
        recs = sorted((r for r in recs if r.cumulative_kwh >= 0), key=lambda r: r.timestamp)
        if len(recs) < 2:
            continue
        t = _to_seconds([r.timestamp for r in recs])
        c = np.array([r.cumulative_kwh for r in recs])
        diff = np.diff(c)
        # window whose end (exclusive of start, inclusive of end) contains the later reading
        win = ((t[1:] - 1) // width) * width
        n_resets += int(np.sum(diff < 0))
        per_panel.append((win, diff))
    if not per_panel:
        raise EmptyInput("fewer than two valid cumulative readings")

    first = min(w.min() for w, _ in per_panel)
    last = max(w.max() for w, _ in per_panel)
    n_win = (last - first) // width + 1
    energy = np.zeros(n_win)
    missing = np.zeros(n_win, dtype=bool)
    for win, diff in per_panel:
        idx = (win - first) // width
        total = np.bincount(idx, weights=diff, minlength=n_win)
        count = np.bincount(idx, minlength=n_win)
        neg = np.bincount(idx, weights=(diff < 0).astype(float), minlength=n_win) > 0
        energy += total
        missing |= (count == 0) | neg
    energy[missing] = np.nan
    stamps = (first + np.arange(n_win) * width).astype("datetime64[s]")
    return IntervalEnergySeries(frame, stamps, energy, missing, n_resets=n_resets,
                                n_glitch_readings=n_glitch)


def _weather_hourly(weather) -> tuple[np.ndarray, np.ndarray]:
    """Hourly seconds grid and a (hours, fields) array with NaN for absent hours."""
    recs = list(weather)
    if not recs:
        raise EmptyInput("no weather records")
    secs = _to_seconds([r.timestamp for r in recs])
    vals = np.array([r.values() for r in recs], dtype=float)
    hour = (secs // 3600) * 3600
    first, last = hour.min(), hour.max()
    n = (last - first) // 3600 + 1
    grid = first + np.arange(n) * 3600
    out = np.full((n, len(WEATHER_COLUMNS)), np.nan)
    idx = (hour - first) // 3600
    # first record wins for duplicated hours
    seen = np.zeros(n, dtype=bool)
    for k in range(len(idx)):
        if not seen[idx[k]]:
            out[idx[k]] = vals[k]
            seen[idx[k]] = True
    return grid, out


def align(weather, energy: IntervalEnergySeries, frame: TimeFrame) -> AlignedFrame:
    """Put weather and per-window energy on a common window grid.

    Hourly weather attaches one-to-one at 1 h, is linearly interpolated to the
    half-hour stamps at 30 min, and is aggregated over the four contained hours
    at 4 h (sum for precipitation and sunshine, mean otherwise). Rows cover the
    intersection of both sources; gaps stay NaN for :func:`interpolate_missing`.
    """
    frame = TimeFrame.parse(frame)
    if energy.frame != frame:
        raise FrameMismatch(f"energy series is {energy.frame.value}, requested {frame.value}")
    width = frame.minutes * 60
    hgrid, hvals = _weather_hourly(weather)

    e_secs = energy.timestamps.astype(np.int64)
    w_first, w_last = hgrid[0], hgrid[-1]
    if frame is TimeFrame.FOUR_HOURS:
        w_first = -(-w_first // width) * width
        w_last = _window_start(np.array([w_last]), frame)[0]
        if w_last + width - 3600 > hgrid[-1]:
            w_last -= width
    start = max(w_first, e_secs[0])
    stop = min(w_last, e_secs[-1])
    start = -(-start // width) * width
    if stop < start:
        raise NoOverlap("weather and PV series do not overlap")
    grid = np.arange(start, stop + 1, width, dtype=np.int64)

    if frame is TimeFrame.ONE_HOUR:
        feats = hvals[(grid - hgrid[0]) // 3600]
    elif frame is TimeFrame.THIRTY_MIN:
        pos = (grid - hgrid[0]) / 3600.0
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, len(hgrid) - 1)
        frac = pos - lo
        feats = hvals[lo] * (1 - frac)[:, None] + hvals[hi] * frac[:, None]
        on_hour = frac == 0
        feats[on_hour] = hvals[lo[on_hour]]
    else:
        base = (grid - hgrid[0]) // 3600
        block = np.stack([hvals[np.minimum(base + k, len(hgrid) - 1)] for k in range(4)], axis=1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN blocks stay NaN
            mean = np.nanmean(block, axis=1)
        feats = mean.copy()
        for j, name in enumerate(WEATHER_COLUMNS):
            if name in SUMMED_FIELDS:
                feats[:, j] = mean[:, j] * 4
    target = energy.energy_kwh[(grid - e_secs[0]) // width].astype(float)
    return AlignedFrame(frame, grid.astype("datetime64[s]"), np.asarray(feats, dtype=float),
                        target, list(WEATHER_COLUMNS))


def _fill_column(values: np.ndarray, name: str) -> np.ndarray:
    ok = np.isfinite(values)
    if not ok.any():
        raise ColumnAllMissing(name)
    if ok.all():
        return values.copy()
    idx = np.arange(len(values))
    # np.interp clamps to the nearest valid value outside the known range
    return np.interp(idx, idx[ok], values[ok])


def interpolate_missing(frame: AlignedFrame) -> AlignedFrame:
    """Fill NaN gaps linearly in time; leading/trailing gaps take the nearest value."""
    feats = frame.features.copy()
    filled = {}
    for j, name in enumerate(frame.column_names):
        n_missing = int(np.sum(~np.isfinite(feats[:, j])))
        feats[:, j] = _fill_column(feats[:, j], name)
        filled[name] = n_missing
    n_missing = int(np.sum(~np.isfinite(frame.target)))
    target = _fill_column(frame.target, "target_kwh")
    filled["target_kwh"] = n_missing
    return AlignedFrame(frame.frame, frame.timestamps.copy(), feats, target,
                        list(frame.column_names), filled)


def build_frame(pv_records, weather_records, frame: TimeFrame) -> AlignedFrame:
    """Full ingestion path for one horizon: differencing, alignment, gap filling."""
    frame = TimeFrame.parse(frame)
    series = cumulative_to_interval(pv_records, frame)
    return interpolate_missing(align(weather_records, series, frame))
