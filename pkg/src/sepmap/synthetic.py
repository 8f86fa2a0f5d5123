"""Synthetic event sets with a controllable, lag-dependent precursor.

Every event gets a log-normal background: a per-event baseline level, a
slow AR(1) drift and white measurement noise, all in decades of flux.
Events of signal-bearing categories additionally receive an additive
precursor ``A * exp(-decay * tau)`` in the designated channels, with
``tau`` the minutes remaining before onset.  Any observation window that
ends ``lag`` minutes before onset therefore closes on a rising precursor
of height ``A * exp(-decay * lag)``: the signal strength decays with lag,
and with ``decay = 0`` it does not depend on lag at all.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from . import seeding
from .dataset import Category, EventRecord, TimeSeriesSlice, parse_time, write_manifest
from .errors import InvalidSpec, IoFailure

_EPOCH = parse_time("2000-01-01T12:00:00Z")


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs of the synthetic generator.

    Flux levels and amplitudes are in pfu; ``noise_scale``, ``drift_scale``
    and the scatter terms are standard deviations in decades (log10).
    ``decay`` is per minute.  ``category_scale`` multiplies the precursor
    amplitude per event category.
    """

    n_events: dict = field(default_factory=lambda: {"Strong": 20, "Weak": 20, "NoEvent": 0})
    channels: tuple = ("P3", "P5", "P7")
    background: tuple = (1.0, 0.3, 0.1)
    noise_scale: float = 0.05
    drift_scale: float = 0.15
    drift_memory: float = 0.98
    level_scatter: float = 0.3
    amplitudes: tuple = (5.0, 0.0, 0.0)
    amplitude_scatter: float = 0.3
    category_scale: dict = field(default_factory=lambda: {"Strong": 1.0, "Weak": 0.0, "NoEvent": 0.0})
    decay: float = 0.01
    cadence: int = 60
    slice_hours: float = 12.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "background", tuple(float(b) for b in self.background))
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        self.validate()

    def validate(self):
        nch = len(self.channels)
        if nch == 0:
            raise InvalidSpec("at least one channel required")
        if len(self.background) != nch or len(self.amplitudes) != nch:
            raise InvalidSpec("background and amplitudes need one entry per channel")
        if any(b <= 0 for b in self.background):
            raise InvalidSpec("background levels must be positive")
        if any(a < 0 for a in self.amplitudes):
            raise InvalidSpec("amplitudes must be >= 0")
        if self.decay < 0:
            raise InvalidSpec("decay must be >= 0")
        if min(self.noise_scale, self.drift_scale, self.level_scatter, self.amplitude_scatter) < 0:
            raise InvalidSpec("scales must be >= 0")
        if not 0 <= self.drift_memory < 1:
            raise InvalidSpec("drift_memory must lie in [0, 1)")
        if self.cadence <= 0 or self.slice_hours * 3600 < 2 * self.cadence:
            raise InvalidSpec("slice must hold at least two samples")
        for name, count in self.n_events.items():
            try:
                Category.parse(name)
            except Exception as exc:
                raise InvalidSpec(str(exc)) from None
            if count != 0 and count < 2:
                raise InvalidSpec(f"{name}: need 0 or at least 2 events")
        for name, scale in self.category_scale.items():
            try:
                Category.parse(name)
            except Exception as exc:
                raise InvalidSpec(str(exc)) from None
            if scale < 0:
                raise InvalidSpec("category scales must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["background"] = list(self.background)
        d["amplitudes"] = list(self.amplitudes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        for key in ("channels", "background", "amplitudes"):
            if key in d:
                d[key] = tuple(d[key])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown synthetic spec fields {sorted(unknown)}")
        return cls(**d)


def _event(spec: SyntheticSpec, category: Category, index: int, onset: int) -> TimeSeriesSlice:
    n = int(round(spec.slice_hours * 3600 / spec.cadence))
    rng = seeding.rng(spec.seed, category.code + 1, index)
    start = onset - n * spec.cadence
    tau = (onset - (start + spec.cadence * np.arange(n))) / 60.0
    envelope = np.exp(-spec.decay * tau)
    cat_scale = spec.category_scale.get(category.value, 0.0)

    rows = []
    for c in range(len(spec.channels)):
        level = np.log10(spec.background[c]) + spec.level_scatter * rng.standard_normal()
        # stationary AR(1): x_i = phi * x_{i-1} + e_i, started from its stationary law
        phi = spec.drift_memory
        innov = rng.standard_normal(n) * spec.drift_scale * np.sqrt(1 - phi**2)
        x0 = spec.drift_scale * rng.standard_normal()
        drift, _ = lfilter([1.0], [1.0, -phi], innov, zi=[phi * x0])
        noise = spec.noise_scale * rng.standard_normal(n)
        flux = 10.0 ** (level + drift + noise)
        amp = spec.amplitudes[c] * cat_scale * 10.0 ** (spec.amplitude_scatter * rng.standard_normal())
        rows.append(flux + amp * envelope)
    return TimeSeriesSlice(start, spec.cadence, spec.channels, np.vstack(rows))


def synthesize(spec: SyntheticSpec) -> list:
    """Generate event records in memory; fully determined by ``spec.seed``."""
    spec.validate()
    records = []
    day = 0
    for category in Category:
        for i in range(spec.n_events.get(category.value, 0)):
            onset = _EPOCH + day * 86400
            day += 1
            sl = _event(spec, category, i, onset)
            records.append(EventRecord(f"{category.value.lower()}_{i:04d}", onset, category, sl))
    if not records:
        raise InvalidSpec("spec produces no events")
    return records


def gen_synthetic(spec: SyntheticSpec, out_dir) -> Path:
    """Write a synthetic manifest and slice CSVs to ``out_dir``; returns the manifest path."""
    records = synthesize(spec)
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = write_manifest(records, out_dir)
        (out_dir / "synthetic_spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return manifest
