"""Global feature mapping from repeated bootstrap importances.

Each bootstrap iteration resamples the dataset with replacement, fits a
forest and records its normalized MDI vector.  Summing those vectors gives
the cumulative importance distribution; features that matter in only a
few resamples stay small while consistently useful ones accumulate mass.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeding
from .errors import InconsistentDimensions, SingleClassInput, SingleClassResample
from .forest import ForestParams, fit_forest, mdi_importance

MAX_RESAMPLE_RETRIES = 10

# stream tags under the master seed
_RESAMPLE = 0
_FOREST = 1


@dataclass(frozen=True)
class BootstrapRecord:
    iteration: int
    importance: np.ndarray
    selected: np.ndarray


@dataclass(frozen=True)
class CumulativeImportance:
    cumulative: np.ndarray
    frequency: np.ndarray
    iterations: int


def bootstrap_iteration(X, y, params: ForestParams, b: int, master_seed: int) -> BootstrapRecord:
    """Run iteration ``b``: resample, fit, record MDI and selection flags.

    A resample containing a single class is redrawn from the next derived
    stream, at most ``MAX_RESAMPLE_RETRIES`` times.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = X.shape[0]
    for attempt in range(MAX_RESAMPLE_RETRIES + 1):
        sample = seeding.rng(master_seed, _RESAMPLE, b, attempt).integers(0, n, size=n)
        if np.unique(y[sample]).size >= 2:
            break
    else:
        raise SingleClassResample(f"iteration {b}: {MAX_RESAMPLE_RETRIES + 1} single-class resamples in a row")
    forest = fit_forest(X[sample], y[sample], params.replace(seed=seeding.derive_seed(master_seed, _FOREST, b)))
    importance = mdi_importance(forest)
    return BootstrapRecord(b, importance, importance > 0)


def bootstrap_importances(X, y, params: ForestParams, B: int, master_seed: int, n_jobs: int = 1) -> list:
    if B < 1:
        raise ValueError("B must be >= 1")
    if np.unique(np.asarray(y)).size < 2:
        raise SingleClassInput("bootstrap needs both classes")

    def one(b):
        return bootstrap_iteration(X, y, params, b, master_seed)

    if n_jobs == 1:
        return [one(b) for b in range(B)]
    with ThreadPoolExecutor(max_workers=n_jobs if n_jobs and n_jobs > 0 else None) as pool:
        return list(pool.map(one, range(B)))


def accumulate(records) -> CumulativeImportance:
    """Sum importances and selection flags over records.

    Records are reduced in iteration order, so the result is bit-identical
    whatever order they arrive in.
    """
    records = sorted(records, key=lambda r: r.iteration)
    if not records:
        raise ValueError("no bootstrap records")
    d = records[0].importance.size
    cumulative = np.zeros(d)
    frequency = np.zeros(d, dtype=np.int64)
    for r in records:
        if r.importance.size != d or r.selected.size != d:
            raise InconsistentDimensions(f"record {r.iteration} has {r.importance.size} features, expected {d}")
        cumulative += r.importance
        frequency += r.selected
    return CumulativeImportance(cumulative, frequency, len(records))


@dataclass(frozen=True)
class RankedFeature:
    index: int
    descriptor: object
    cumulative: float
    share: float
    frequency: int


def _shares(cum: CumulativeImportance) -> np.ndarray:
    total = cum.cumulative.sum()
    return cum.cumulative / total if total > 0 else np.zeros_like(cum.cumulative)


def rank_features(cum: CumulativeImportance, descriptors) -> list:
    """Features by descending share; ties by higher frequency, then descriptor order."""
    if len(descriptors) != cum.cumulative.size:
        raise InconsistentDimensions(f"{len(descriptors)} descriptors for {cum.cumulative.size} features")
    shares = _shares(cum)
    order = sorted(range(len(descriptors)), key=lambda j: (-shares[j], -cum.frequency[j], j))
    return [
        RankedFeature(j, descriptors[j], float(cum.cumulative[j]), float(shares[j]), int(cum.frequency[j]))
        for j in order
    ]


@dataclass(frozen=True)
class ChannelImportanceProfile:
    """Importance shares per channel and temporal position.

    ``positions[ch]`` holds minutes before the observation-window end (sorted
    ascending) and ``shares[ch]`` the share attributed there.
    """

    channels: tuple
    positions: dict
    shares: dict

    def channel_share(self, channel) -> float:
        return float(self.shares[channel].sum())

    @property
    def channel_totals(self) -> dict:
        return {ch: self.channel_share(ch) for ch in self.channels}


def channel_profile(cum: CumulativeImportance, descriptors, cadence: int = 60) -> ChannelImportanceProfile:
    """Attribute each feature's share to its channel at its span midpoint.

    Pooled features are placed at the midpoint of their whole group.
    """
    if len(descriptors) != cum.cumulative.size:
        raise InconsistentDimensions(f"{len(descriptors)} descriptors for {cum.cumulative.size} features")
    shares = _shares(cum)
    channels = tuple(dict.fromkeys(d.channel for d in descriptors))
    acc = {ch: {} for ch in channels}
    for d, s in zip(descriptors, shares):
        pos = d.midpoint_samples_before_end * cadence / 60.0
        acc[d.channel][pos] = acc[d.channel].get(pos, 0.0) + s
    positions, out = {}, {}
    for ch in channels:
        keys = sorted(acc[ch])
        positions[ch] = np.array(keys, dtype=float)
        out[ch] = np.array([acc[ch][k] for k in keys], dtype=float)
    return ChannelImportanceProfile(channels, positions, out)


IMPORTANCE_COLUMNS = (
    "feature_name",
    "cumulative",
    "share",
    "frequency",
    "channel",
    "scale",
    "position_mins_before_end",
    "statistic",
    "pooling",
)


def write_importance_csv(ranked, path, cadence: int = 60) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(IMPORTANCE_COLUMNS)
        for r in ranked:
            d = r.descriptor
            writer.writerow(
                [
                    d.name,
                    repr(r.cumulative),
                    repr(r.share),
                    r.frequency,
                    d.channel,
                    d.scale_id,
                    repr(d.midpoint_samples_before_end * cadence / 60.0),
                    d.statistic,
                    d.pooling,
                ]
            )


def write_profile_csv(profile: ChannelImportanceProfile, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "position_mins_before_end", "share"])
        for ch in profile.channels:
            for pos, share in zip(profile.positions[ch], profile.shares[ch]):
                writer.writerow([ch, repr(float(pos)), repr(float(share))])
