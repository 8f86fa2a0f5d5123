"""Event manifests, flux slices, observation/lag windowing and scenarios.

Timestamps are handled as integer seconds since the Unix epoch (UTC) so all
window arithmetic is exact.  Observation windows are half-open:
``[t_sep - lag - obs_len, t_sep - lag)``.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    EmptyResult,
    InsufficientCoverage,
    MissingFile,
    NonMonotonicTimestamps,
    SchemaViolation,
    UnknownCategory,
)

# CSV column name -> channel name; the value is the physical meaning.
CHANNELS = {
    "P3": "proton flux >=10 MeV",
    "P5": "proton flux >=50 MeV",
    "P7": "proton flux >=100 MeV",
    "XL": "X-ray flux 1-8 A",
}
DEFAULT_CHANNELS = ("P3", "P5", "P7")

#: Longest run of consecutive missing samples that is filled by interpolation.
MAX_INTERPOLATED_GAP = 15

DEFAULT_LOG_FLOOR = 1e-3


class Category(enum.Enum):
    STRONG = "Strong"
    WEAK = "Weak"
    NO_EVENT = "NoEvent"

    @property
    def code(self) -> int:
        return {"Strong": 1, "Weak": 0, "NoEvent": -1}[self.value]

    @classmethod
    def parse(cls, value) -> "Category":
        if isinstance(value, cls):
            return value
        for member in cls:
            if value == member.value or value == member.code:
                return member
        raise UnknownCategory(f"unknown event category {value!r}")


class Scenario(enum.Enum):
    STRONG_VS_WEAK = "StrongVsWeak"
    STRONG_VS_REST = "StrongVsRest"
    EVENT_VS_NO_EVENT = "EventVsNoEvent"

    @classmethod
    def parse(cls, value) -> "Scenario":
        if isinstance(value, cls):
            return value
        for member in cls:
            if value in (member.value, member.name):
                return member
        raise SchemaViolation(f"unknown scenario {value!r}")

    def label_for(self, category: Category):
        """Return 1 (positive), 0 (negative) or None (excluded)."""
        return _SCENARIO_LABELS[self][category]


_SCENARIO_LABELS = {
    Scenario.STRONG_VS_WEAK: {Category.STRONG: 1, Category.WEAK: 0, Category.NO_EVENT: None},
    Scenario.STRONG_VS_REST: {Category.STRONG: 1, Category.WEAK: 0, Category.NO_EVENT: 0},
    Scenario.EVENT_VS_NO_EVENT: {Category.STRONG: 1, Category.WEAK: 1, Category.NO_EVENT: 0},
}


def parse_time(text: str) -> int:
    """ISO-8601 timestamp -> integer UTC epoch seconds (naive times are UTC)."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise SchemaViolation(f"bad timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(round(dt.timestamp()))


def format_time(epoch: int) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class TimeSeriesSlice:
    """Fixed-cadence multivariate flux series.

    ``values`` and ``gap_mask`` have shape ``(n_channels, n)``.  Samples that
    were missing and filled by interpolation are flagged in ``gap_mask``;
    samples inside gaps too long to fill stay NaN.
    """

    start_time: int
    cadence: int
    channels: tuple
    values: np.ndarray
    gap_mask: np.ndarray = None

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[0] != len(self.channels):
            raise SchemaViolation("one value row per channel required")
        if len(set(self.channels)) != len(self.channels):
            raise SchemaViolation("duplicate channel names")
        if values.shape[1] < 2:
            raise SchemaViolation("a slice needs at least 2 samples")
        if self.cadence <= 0:
            raise SchemaViolation("cadence must be positive")
        mask = self.gap_mask
        mask = np.zeros(values.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape != values.shape:
            raise SchemaViolation("gap_mask shape must match values")
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gap_mask", mask)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def end_time(self) -> int:
        """Exclusive end: time of the sample after the last one."""
        return self.start_time + self.n * self.cadence

    @property
    def timestamps(self) -> np.ndarray:
        return self.start_time + self.cadence * np.arange(self.n, dtype=np.int64)

    def channel(self, name: str) -> np.ndarray:
        return self.values[self.channels.index(name)]

    def select(self, channels) -> "TimeSeriesSlice":
        idx = []
        for name in channels:
            if name not in self.channels:
                raise SchemaViolation(f"channel {name} not in slice")
            idx.append(self.channels.index(name))
        return replace(self, channels=tuple(channels), values=self.values[idx], gap_mask=self.gap_mask[idx])


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    sep_onset: int
    category: Category
    slice: TimeSeriesSlice


@dataclass(frozen=True)
class WindowSpec:
    """Observation length and lag, both in seconds."""

    obs_len: int
    lag: int

    def __post_init__(self):
        if self.obs_len <= 0:
            raise ValueError("observation window must be positive")
        if self.lag < 0:
            raise ValueError("lag must be non-negative")

    @classmethod
    def from_units(cls, obs_hours: float, lag_mins: float) -> "WindowSpec":
        return cls(obs_len=int(round(obs_hours * 3600)), lag=int(round(lag_mins * 60)))


@dataclass(frozen=True)
class LabeledInstance:
    event_id: str
    window: TimeSeriesSlice
    label: int


@dataclass
class ScenarioTally:
    """Bookkeeping for :func:`apply_scenario`."""

    positives: int = 0
    negatives: int = 0
    excluded: int = 0
    cut_failures: list = field(default_factory=list)


# --------------------------------------------------------------------------
# Parsing and serialization


def fill_gaps(values: np.ndarray, max_gap: int = MAX_INTERPOLATED_GAP):
    """Linearly interpolate interior NaN runs of at most ``max_gap`` samples.

    Returns ``(filled, mask)`` where ``mask`` flags every originally missing
    sample.  Runs that are too long, or touch either end, remain NaN.
    """
    values = np.array(values, dtype=float)
    mask = np.isnan(values)
    if not mask.any():
        return values, mask
    n = values.size
    i = 0
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j < n and mask[j]:
            j += 1
        # run is [i, j)
        if i > 0 and j < n and j - i <= max_gap:
            left, right = values[i - 1], values[j]
            frac = np.arange(1, j - i + 1) / (j - i + 1)
            values[i:j] = left + frac * (right - left)
        i = j
    return values, mask


def read_slice_csv(path, channels=None) -> TimeSeriesSlice:
    """Parse a slice CSV with header ``timestamp,p3,p5,p7[,xl]``."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"slice file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise SchemaViolation(f"{path}: empty file") from None
        if not header or header[0] != "timestamp":
            raise SchemaViolation(f"{path}: first column must be 'timestamp'")
        names = [h.upper() for h in header[1:]]
        unknown = [h for h in names if h not in CHANNELS]
        if unknown:
            raise SchemaViolation(f"{path}: unknown channel columns {unknown}")
        times, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaViolation(f"{path}:{lineno}: expected {len(header)} fields")
            times.append(parse_time(row[0]))
            try:
                rows.append([float(c) if c.strip() else math.nan for c in row[1:]])
            except ValueError as exc:
                raise SchemaViolation(f"{path}:{lineno}: {exc}") from None
    if len(times) < 2:
        raise SchemaViolation(f"{path}: need at least 2 samples")
    diffs = np.diff(times)
    if np.any(diffs <= 0):
        raise NonMonotonicTimestamps(f"{path}: timestamps must strictly increase")
    if np.any(diffs != diffs[0]):
        raise SchemaViolation(f"{path}: irregular cadence")

    raw = np.array(rows, dtype=float).T
    filled, masks = zip(*(fill_gaps(r) for r in raw))
    sl = TimeSeriesSlice(
        start_time=times[0],
        cadence=int(diffs[0]),
        channels=tuple(names),
        values=np.vstack(filled),
        gap_mask=np.vstack(masks),
    )
    if channels is not None:
        sl = sl.select(channels)
    return sl


def write_slice_csv(sl: TimeSeriesSlice, path) -> None:
    """Write a slice in the CSV format read by :func:`read_slice_csv`.

    Samples flagged in ``gap_mask`` are written as empty cells, so re-reading
    reproduces the same interpolation and mask.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + [c.lower() for c in sl.channels])
        for i, ts in enumerate(sl.timestamps):
            cells = ["" if sl.gap_mask[c, i] else repr(float(sl.values[c, i])) for c in range(len(sl.channels))]
            writer.writerow([format_time(int(ts))] + cells)


_MANIFEST_FIELDS = {"event_id": str, "sep_onset": str, "category": str, "slice_path": str}


def parse_manifest(path, channels=DEFAULT_CHANNELS) -> list:
    """Load every event listed in a JSON manifest.

    Slice paths are resolved relative to the manifest's directory.  Only the
    requested ``channels`` are kept (``None`` keeps every column).
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    try:
        entries = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(entries, list):
        raise SchemaViolation(f"{path}: manifest must be a JSON array")

    records = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise SchemaViolation(f"{path}: entry {i} is not an object")
        for key, typ in _MANIFEST_FIELDS.items():
            if key not in entry:
                raise SchemaViolation(f"{path}: entry {i} missing {key!r}")
            if not isinstance(entry[key], typ):
                raise SchemaViolation(f"{path}: entry {i} field {key!r} must be a string")
        category = Category.parse(entry["category"])
        onset = parse_time(entry["sep_onset"])
        sl = read_slice_csv(path.parent / entry["slice_path"], channels=channels)
        if sl.end_time > onset + sl.cadence:
            # last sample must not be later than the onset itself
            raise SchemaViolation(f"{path}: slice of {entry['event_id']} extends past its onset")
        records.append(EventRecord(entry["event_id"], onset, category, sl))
    return records


def write_manifest(records, directory, slice_dir="slices") -> Path:
    """Persist records as ``manifest.json`` plus one CSV per event."""
    directory = Path(directory)
    (directory / slice_dir).mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in records:
        rel = f"{slice_dir}/{rec.event_id}.csv"
        write_slice_csv(rec.slice, directory / rel)
        entries.append(
            {
                "event_id": rec.event_id,
                "sep_onset": format_time(rec.sep_onset),
                "category": rec.category.value,
                "slice_path": rel,
            }
        )
    out = directory / "manifest.json"
    out.write_text(json.dumps(entries, indent=2) + "\n")
    return out


# --------------------------------------------------------------------------
# Windowing


def cut_window(record: EventRecord, spec: WindowSpec) -> TimeSeriesSlice:
    """Cut ``[t_sep - lag - obs_len, t_sep - lag)`` out of the record's slice."""
    sl = record.slice
    end = record.sep_onset - spec.lag
    start = end - spec.obs_len
    if spec.obs_len % sl.cadence:
        raise InsufficientCoverage(f"observation length {spec.obs_len}s is not a multiple of the {sl.cadence}s cadence")
    offset = start - sl.start_time
    if offset < 0 or offset % sl.cadence or end > sl.end_time:
        raise InsufficientCoverage(
            f"{record.event_id}: slice [{format_time(sl.start_time)}, {format_time(sl.end_time)}) "
            f"does not cover [{format_time(start)}, {format_time(end)})"
        )
    i0 = offset // sl.cadence
    i1 = i0 + spec.obs_len // sl.cadence
    values = sl.values[:, i0:i1]
    if np.isnan(values).any():
        raise InsufficientCoverage(f"{record.event_id}: window contains an unfilled data gap")
    return TimeSeriesSlice(start, sl.cadence, sl.channels, values.copy(), sl.gap_mask[:, i0:i1].copy())


def log_transform(sl: TimeSeriesSlice, floor: float = DEFAULT_LOG_FLOOR) -> TimeSeriesSlice:
    """Replace every value ``v`` with ``log10(max(v, floor))``."""
    if not floor > 0:
        raise ValueError("floor must be positive")
    with np.errstate(invalid="ignore"):
        logged = np.log10(np.maximum(sl.values, floor))
    return replace(sl, values=logged)


def apply_scenario(records, scenario, spec: WindowSpec):
    """Label records for a scenario and cut their observation windows.

    Records whose category the scenario excludes are skipped; records whose
    slice cannot supply the window are dropped and listed in the tally.
    Returns ``(instances, tally)``.
    """
    scenario = Scenario.parse(scenario)
    if not records:
        raise ValueError("no records given")
    tally = ScenarioTally()
    out = []
    for rec in records:
        label = scenario.label_for(rec.category)
        if label is None:
            tally.excluded += 1
            continue
        try:
            window = cut_window(rec, spec)
        except InsufficientCoverage:
            tally.cut_failures.append(rec.event_id)
            continue
        out.append(LabeledInstance(rec.event_id, window, label))
        if label:
            tally.positives += 1
        else:
            tally.negatives += 1
    if not out:
        raise EmptyResult(
            f"no instances for {scenario.value}: {tally.excluded} excluded, {len(tally.cut_failures)} cut failures"
        )
    return out, tally


def stratified_split(labels, test_fraction=0.5, seed=0):
    """Seeded stratified train/test split; returns sorted index arrays.

    Each class with at least two members contributes at least one sample to
    both sides.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        n_test = int(round(idx.size * test_fraction))
        if idx.size >= 2:
            n_test = min(max(n_test, 1), idx.size - 1)
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def category_counts(records) -> dict:
    counts = Counter(r.category.value for r in records)
    return {c.value: counts.get(c.value, 0) for c in Category}
