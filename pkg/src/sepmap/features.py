"""Multi-scale sliding-window interval features with localized pooling.

Index convention: intervals are stored 0-based and half-open, ``[start,
stop)``, so ``values[start:stop]`` is the interval.  In 1-based inclusive
notation the same interval runs from ``s = start + 1`` to ``e = stop``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateInterval, IndexOutOfRange, NoValidIntervals

STATISTICS = ("mean", "std", "slope")
POOLINGS = ("pooled_max", "pooled_min", "pooled_mean")
MIN_INTERVAL_LENGTH = 3


def _check_bounds(values, start, stop, min_len):
    n = len(values)
    if start < 0 or stop > n or start >= stop:
        raise IndexOutOfRange(f"interval [{start}, {stop}) outside series of length {n}")
    if stop - start < min_len:
        raise DegenerateInterval(f"interval of {stop - start} samples, need {min_len}")


def interval_mean(values, start: int, stop: int) -> float:
    values = np.asarray(values, dtype=float)
    _check_bounds(values, start, stop, 1)
    return float(np.mean(values[start:stop]))


def interval_std(values, start: int, stop: int) -> float:
    """Sample standard deviation (denominator = length - 1)."""
    values = np.asarray(values, dtype=float)
    _check_bounds(values, start, stop, 2)
    v = values[start:stop]
    if v.max() == v.min():
        return 0.0  # exact for constant runs, where the mean may round
    return float(np.std(v, ddof=1))


def interval_slope(values, start: int, stop: int) -> float:
    """Least-squares slope against the within-interval sample index."""
    values = np.asarray(values, dtype=float)
    _check_bounds(values, start, stop, 2)
    v = values[start:stop]
    if v.max() == v.min():
        return 0.0
    x = np.arange(v.size) - (v.size - 1) / 2.0
    return float(np.dot(x, v - v.mean()) / np.dot(x, x))


@dataclass(frozen=True)
class Interval:
    start: int
    stop: int
    scale_id: str

    @property
    def s(self) -> int:
        return self.start + 1

    @property
    def e(self) -> int:
        return self.stop

    @property
    def length(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class ExtractionConfig:
    """Window scales as ``(length, stride)`` sample counts.

    ``scales=None`` derives the defaults from the series length ``n``:
    windows of ceil(n/8), ceil(n/4) and ceil(n/2) samples, each sliding by
    half its length.
    """

    scales: tuple | None = None
    pool_size: int = 3
    include_pooled: bool = True

    def __post_init__(self):
        if self.scales is not None:
            scales = tuple((int(w), int(s)) for w, s in self.scales)
            for w, s in scales:
                if w < MIN_INTERVAL_LENGTH:
                    raise ValueError(f"window length {w} < {MIN_INTERVAL_LENGTH}")
                if s < 1:
                    raise ValueError("stride must be >= 1")
            if len(set(scales)) != len(scales):
                raise ValueError("duplicate scales")
            object.__setattr__(self, "scales", scales)
        if self.pool_size < 2:
            raise ValueError("pool_size must be >= 2")

    def resolve_scales(self, n: int) -> tuple:
        if self.scales is not None:
            return self.scales
        out = []
        for frac in (8, 4, 2):
            w = max(MIN_INTERVAL_LENGTH, math.ceil(n / frac))
            pair = (w, max(1, w // 2))
            if pair not in out:
                out.append(pair)
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "scales": None if self.scales is None else [list(s) for s in self.scales],
            "pool_size": self.pool_size,
            "include_pooled": self.include_pooled,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExtractionConfig":
        scales = d.get("scales")
        return cls(
            scales=None if scales is None else tuple(tuple(s) for s in scales),
            pool_size=d.get("pool_size", 3),
            include_pooled=d.get("include_pooled", True),
        )


def scale_id(window: int, stride: int) -> str:
    return f"w{window}s{stride}"


def generate_intervals(n: int, config: ExtractionConfig) -> list:
    """Enumerate intervals scale by scale, then by start index."""
    intervals = []
    for w, stride in config.resolve_scales(n):
        sid = scale_id(w, stride)
        for start in range(0, n - w + 1, stride):
            intervals.append(Interval(start, start + w, sid))
    if not intervals:
        raise NoValidIntervals(f"series of length {n} is shorter than every window")
    return intervals


def pool_consecutive(per_interval, pool_size: int):
    """Tile a stream into groups of ``pool_size`` and return (max, min, mean).

    A trailing partial group is kept when it has at least two members.
    """
    stream = np.asarray(per_interval, dtype=float)
    bounds = _pool_bounds(stream.size, pool_size)
    if not bounds:
        empty = np.empty(0)
        return empty, empty.copy(), empty.copy()
    groups = [stream[a:b] for a, b in bounds]
    return (
        np.array([g.max() for g in groups]),
        np.array([g.min() for g in groups]),
        np.array([g.mean() for g in groups]),
    )


def _pool_bounds(m: int, pool_size: int) -> list:
    bounds = []
    for a in range(0, m, pool_size):
        b = min(a + pool_size, m)
        if b - a >= 2:
            bounds.append((a, b))
    return bounds


@dataclass(frozen=True)
class FeatureDescriptor:
    """Provenance of one feature column.

    ``start``/``stop`` are the sample span covered (the interval, or the
    union of a pooling group's intervals) and ``n`` the window length, so
    temporal positions can be recovered without the original config.
    """

    channel: str
    scale_id: str
    interval_index: int | None
    statistic: str
    pooling: str = "none"
    pool_group: int | None = None
    start: int = 0
    stop: int = 0
    n: int = 0

    @property
    def name(self) -> str:
        if self.pooling == "none":
            where = f"i{self.interval_index}"
        else:
            where = f"g{self.pool_group}"
        name = f"{self.channel.lower()}.{self.scale_id}.{where}.{self.statistic}"
        if self.pooling != "none":
            name += "." + self.pooling.replace("pooled_", "")
        return name

    @property
    def midpoint_samples_before_end(self) -> float:
        """Distance from the span's midpoint sample to the window end, in samples."""
        return self.n - (self.start + self.stop - 1) / 2.0

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "scale_id": self.scale_id,
            "interval_index": self.interval_index,
            "statistic": self.statistic,
            "pooling": self.pooling,
            "pool_group": self.pool_group,
            "start": self.start,
            "stop": self.stop,
            "n": self.n,
        }


@dataclass(frozen=True)
class FeatureVector:
    descriptors: tuple
    values: np.ndarray


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature vectors of a whole instance set sharing one descriptor list."""

    descriptors: tuple
    X: np.ndarray
    y: np.ndarray
    event_ids: tuple

    @property
    def names(self) -> list:
        return [d.name for d in self.descriptors]


@lru_cache(maxsize=64)
def build_descriptors(n: int, channels: tuple, config: ExtractionConfig) -> tuple:
    """Descriptor list for a window of ``n`` samples; a pure function of its inputs."""
    scales = config.resolve_scales(n)
    per_scale = {}
    for iv in generate_intervals(n, config):
        per_scale.setdefault(iv.scale_id, []).append(iv)
    out = []
    for ch in channels:
        for w, stride in scales:
            for k, iv in enumerate(per_scale.get(scale_id(w, stride), [])):
                for stat in STATISTICS:
                    out.append(FeatureDescriptor(ch, iv.scale_id, k, stat, start=iv.start, stop=iv.stop, n=n))
    if config.include_pooled:
        for ch in channels:
            for w, stride in scales:
                ivs = per_scale.get(scale_id(w, stride), [])
                for stat in STATISTICS:
                    for g, (a, b) in enumerate(_pool_bounds(len(ivs), config.pool_size)):
                        for pool in POOLINGS:
                            out.append(
                                FeatureDescriptor(
                                    ch,
                                    ivs[0].scale_id,
                                    None,
                                    stat,
                                    pooling=pool,
                                    pool_group=g,
                                    start=ivs[a].start,
                                    stop=ivs[b - 1].stop,
                                    n=n,
                                )
                            )
    return tuple(out)


def _window_stats(values, w, stride):
    """mean/std/slope of every window of one scale, for all channels at once.

    ``values`` has shape (channels, n); each result has shape (channels, m).
    """
    win = sliding_window_view(values, w, axis=-1)[:, ::stride, :]
    mean = win.mean(axis=-1)
    centered = win - mean[..., None]
    std = np.sqrt(np.einsum("cmw,cmw->cm", centered, centered) / (w - 1))
    x = np.arange(w) - (w - 1) / 2.0
    slope = centered @ x / np.dot(x, x)
    const = win.max(axis=-1) == win.min(axis=-1)
    std[const] = 0.0
    slope[const] = 0.0
    return {"mean": mean, "std": std, "slope": slope}


def extract_values(values: np.ndarray, config: ExtractionConfig) -> np.ndarray:
    """Feature values for one (channels, n) array, ordered as :func:`build_descriptors`."""
    values = np.asarray(values, dtype=float)
    n_ch, n = values.shape
    if n_ch == 0:
        return np.empty(0)
    scales = config.resolve_scales(n)
    generate_intervals(n, config)  # raises when nothing fits
    stats = []
    for w, stride in scales:
        if w <= n:
            stats.append(_window_stats(values, w, stride))
        else:
            stats.append(None)

    base = []
    for c in range(n_ch):
        for st in stats:
            if st is None:
                continue
            base.append(np.stack([st[k][c] for k in STATISTICS], axis=1).ravel())
    parts = base
    if config.include_pooled:
        pooled = []
        for c in range(n_ch):
            for st in stats:
                if st is None:
                    continue
                for stat in STATISTICS:
                    mx, mn, av = pool_consecutive(st[stat][c], config.pool_size)
                    pooled.append(np.stack([mx, mn, av], axis=1).ravel())
        parts = base + pooled
    return np.concatenate(parts) if parts else np.empty(0)


def extract(instance, config: ExtractionConfig) -> FeatureVector:
    """Features of one labeled instance (or any object with a ``window``)."""
    window = instance.window
    descriptors = build_descriptors(window.n, tuple(window.channels), config) if window.channels else ()
    vals = extract_values(window.values, config) if window.channels else np.empty(0)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"non-finite feature values for {instance.event_id}")
    return FeatureVector(descriptors, vals)


def extract_matrix(instances, config: ExtractionConfig) -> FeatureMatrix:
    """Stack the feature vectors of instances that share one window length."""
    instances = list(instances)
    if not instances:
        raise ValueError("no instances to extract")
    vectors = [extract(inst, config) for inst in instances]
    descriptors = vectors[0].descriptors
    for v in vectors[1:]:
        if v.descriptors != descriptors:
            raise ValueError("instances yield different descriptor lists; windows must share length and channels")
    X = np.vstack([v.values for v in vectors]) if descriptors else np.empty((len(vectors), 0))
    y = np.array([inst.label for inst in instances], dtype=int)
    return FeatureMatrix(descriptors, X, y, tuple(inst.event_id for inst in instances))


def write_feature_csv(fm: FeatureMatrix, path) -> None:
    """One column per descriptor name, one row per instance, label last."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fm.names + ["label"])
        for row, label in zip(fm.X, fm.y):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
