"""Experiment harness: scenario x observation x lag grids and explain runs.

All randomness flows from ``(seed, cell coordinates, run index)``.  A cell
is keyed by its scenario and its window lengths in seconds rather than its
position in the grid, so a cell gives the same numbers whatever grid it
belongs to and however the work is scheduled.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import seeding
from .dataset import (
    DEFAULT_CHANNELS,
    DEFAULT_LOG_FLOOR,
    LabeledInstance,
    Scenario,
    WindowSpec,
    apply_scenario,
    log_transform,
    parse_manifest,
    stratified_split,
)
from .errors import InvalidSpec, IoFailure, NoValidCells, SepMapError
from .explain import (
    accumulate,
    bootstrap_importances,
    channel_profile,
    rank_features,
    write_importance_csv,
    write_profile_csv,
)
from .features import ExtractionConfig, extract_matrix
from .forest import ForestParams, fit_forest
from .metrics import SCORE_NAMES, contingency, skill_report
from .synthetic import SyntheticSpec, synthesize

log = logging.getLogger(__name__)

DEFAULT_OBS_HOURS = (6, 8, 10)
DEFAULT_LAG_MINS = (5, 15, 30, 45, 60, 120, 180)
DEFAULT_BOOTSTRAPS = (1, 10, 100, 1000)
ALL_SCENARIOS = tuple(s.value for s in Scenario)

# stream tags under the master seed
_SPLIT, _FOREST, _EXPLAIN = 0, 1, 2


def _num(x):
    """Render integral floats as ints so reports read ``6`` not ``6.0``."""
    x = float(x)
    return int(x) if x.is_integer() else x


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple = ALL_SCENARIOS
    obs_hours: tuple = DEFAULT_OBS_HOURS
    lag_mins: tuple = DEFAULT_LAG_MINS
    runs: int = 10
    bootstraps: tuple = DEFAULT_BOOTSTRAPS
    forest: ForestParams = ForestParams()
    extraction: ExtractionConfig = ExtractionConfig()
    seed: int = 0
    threads: int = 1
    test_fraction: float = 0.5
    channels: tuple = DEFAULT_CHANNELS
    log_floor: float = DEFAULT_LOG_FLOOR
    manifest: str | None = None
    synthetic: SyntheticSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(Scenario.parse(s).value for s in self.scenarios))
        object.__setattr__(self, "obs_hours", tuple(_num(h) for h in self.obs_hours))
        object.__setattr__(self, "lag_mins", tuple(_num(m) for m in self.lag_mins))
        object.__setattr__(self, "bootstraps", tuple(int(b) for b in self.bootstraps))
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.scenarios or not self.obs_hours or not self.lag_mins:
            raise InvalidSpec("scenarios, obs_hours and lag_mins must be non-empty")
        if any(h <= 0 for h in self.obs_hours) or any(m < 0 for m in self.lag_mins):
            raise InvalidSpec("observation windows must be positive and lags non-negative")
        if self.runs < 1:
            raise InvalidSpec("runs must be >= 1")
        if any(b < 1 for b in self.bootstraps):
            raise InvalidSpec("bootstrap counts must be >= 1")
        if (self.manifest is None) == (self.synthetic is None):
            raise InvalidSpec("exactly one data source (manifest or synthetic) is required")

    @property
    def n_threads(self) -> int:
        return self.threads if self.threads and self.threads > 0 else (os.cpu_count() or 1)

    def to_dict(self) -> dict:
        """Result-relevant settings; ``threads`` is omitted since it never changes results."""
        return {
            "scenarios": list(self.scenarios),
            "obs_hours": list(self.obs_hours),
            "lag_mins": list(self.lag_mins),
            "runs": self.runs,
            "bootstraps": list(self.bootstraps),
            "forest": self.forest.to_dict(),
            "extraction": self.extraction.to_dict(),
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "channels": list(self.channels),
            "log_floor": self.log_floor,
            "manifest": self.manifest,
            "synthetic": None if self.synthetic is None else self.synthetic.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        d = dict(d)
        kw = {}
        for key in ("scenarios", "obs_hours", "lag_mins", "bootstraps", "channels"):
            if key in d:
                val = d.pop(key)
                kw[key] = tuple(val) if isinstance(val, (list, tuple)) else (val,)
        if "forest" in d:
            kw["forest"] = ForestParams(**d.pop("forest"))
        if "extraction" in d:
            kw["extraction"] = ExtractionConfig.from_dict(d.pop("extraction"))
        if d.get("synthetic") is not None:
            kw["synthetic"] = SyntheticSpec.from_dict(d.pop("synthetic"))
        else:
            d.pop("synthetic", None)
        manifest = d.pop("manifest", None)
        if manifest is not None and base_dir is not None and not Path(manifest).is_absolute():
            manifest = str(Path(base_dir) / manifest)
        kw["manifest"] = manifest
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown config fields {sorted(unknown)}")
        kw.update(d)
        try:
            return cls(**kw)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None

    def replace(self, **kw) -> "ExperimentConfig":
        current = {name: getattr(self, name) for name in self.__dataclass_fields__}
        current.update(kw)
        return ExperimentConfig(**current)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"config {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw, base_dir=path.parent)


def load_records(config: ExperimentConfig) -> list:
    if config.manifest is not None:
        return parse_manifest(config.manifest, channels=config.channels)
    records = synthesize(config.synthetic)
    if tuple(config.synthetic.channels) != config.channels:
        records = [replace(r, slice=r.slice.select(config.channels)) for r in records]
    return records


def cell_key(scenario: str, obs_hours, lag_mins) -> tuple:
    """Integer coordinates of a cell for seed derivation."""
    return (
        list(Scenario).index(Scenario.parse(scenario)),
        int(round(float(obs_hours) * 3600)),
        int(round(float(lag_mins) * 60)),
    )


def prepare_cell(records, scenario, obs_hours, lag_mins, config: ExperimentConfig):
    """Window, log-transform and featurize the instances of one cell.

    Returns ``(feature_matrix, tally, cadence)``.
    """
    spec = WindowSpec.from_units(obs_hours, lag_mins)
    instances, tally = apply_scenario(records, scenario, spec)
    logged = [LabeledInstance(i.event_id, log_transform(i.window, config.log_floor), i.label) for i in instances]
    fm = extract_matrix(logged, config.extraction)
    return fm, tally, instances[0].window.cadence


def _summarize(reports) -> dict:
    out = {}
    for name in SCORE_NAMES:
        vals = [r[name] for r in reports if r[name] is not None]
        if vals:
            out[name] = {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "n_defined": len(vals)}
        else:
            out[name] = {"mean": None, "std": None, "n_defined": 0}
    return out


def run_cell(records, scenario, obs_hours, lag_mins, config: ExperimentConfig) -> dict:
    """All runs of one grid cell; failures become a note instead of an exception."""
    cell = {"scenario": scenario, "obs_hours": obs_hours, "lag_mins": lag_mins}
    try:
        fm, tally, _ = prepare_cell(records, scenario, obs_hours, lag_mins, config)
        if np.unique(fm.y).size < 2:
            raise InvalidSpec("cell has a single class")
        key = cell_key(scenario, obs_hours, lag_mins)
        runs = []
        for r in range(config.runs):
            train, test = stratified_split(
                fm.y, config.test_fraction, seeding.derive_seed(config.seed, _SPLIT, *key, r)
            )
            params = config.forest.replace(seed=seeding.derive_seed(config.seed, _FOREST, *key, r))
            forest = fit_forest(fm.X[train], fm.y[train], params)
            table = contingency(forest.predict(fm.X[test]) == 1, fm.y[test] == 1)
            runs.append({**skill_report(table).to_dict(), "tp": table.tp, "fp": table.fp, "fn": table.fn, "tn": table.tn})
    except SepMapError as exc:
        log.warning("cell %s/%sh/%smin failed: %s", scenario, obs_hours, lag_mins, exc)
        return {**cell, "failure": f"{exc.code}: {exc}", "runs": [], "summary": _summarize([]),
                "n_instances": 0, "n_positive": 0, "n_negative": 0, "n_features": 0, "dropped": []}
    return {
        **cell,
        "failure": None,
        "n_instances": int(fm.y.size),
        "n_positive": tally.positives,
        "n_negative": tally.negatives,
        "n_features": len(fm.descriptors),
        "dropped": list(tally.cut_failures),
        "runs": runs,
        "summary": _summarize(runs),
    }


@dataclass
class GridReport:
    config: dict
    seed: int
    cells: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"format": "sepmap-grid-report", "version": 1, "seed": self.seed, "config": self.config, "cells": self.cells}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "GridReport":
        return cls(config=d["config"], seed=d["seed"], cells=d["cells"])

    @classmethod
    def from_json(cls, text: str) -> "GridReport":
        return cls.from_dict(json.loads(text))

    def cell(self, scenario, obs_hours, lag_mins) -> dict:
        for c in self.cells:
            if (c["scenario"], c["obs_hours"], c["lag_mins"]) == (Scenario.parse(scenario).value, _num(obs_hours), _num(lag_mins)):
                return c
        raise KeyError((scenario, obs_hours, lag_mins))

    def mean(self, score, scenario, obs_hours, lag_mins):
        return self.cell(scenario, obs_hours, lag_mins)["summary"][score]["mean"]


def run_grid(config: ExperimentConfig, records=None) -> GridReport:
    """Evaluate every (scenario, observation window, lag) cell."""
    if records is None:
        records = load_records(config)
    coords = list(itertools.product(config.scenarios, config.obs_hours, config.lag_mins))

    def job(c):
        return run_cell(records, *c, config)

    if config.n_threads == 1:
        cells = [job(c) for c in coords]
    else:
        with ThreadPoolExecutor(max_workers=config.n_threads) as pool:
            cells = list(pool.map(job, coords))
    if all(c["failure"] is not None for c in cells):
        notes = "; ".join(f"{c['scenario']}/{c['obs_hours']}h/{c['lag_mins']}min: {c['failure']}" for c in cells[:5])
        raise NoValidCells(f"no grid cell produced results ({notes})")
    return GridReport(config=config.to_dict(), seed=config.seed, cells=cells)


REPORT_CSV_COLUMNS = ("scenario", "obs_hours", "lag_mins", "score_name", "mean", "std", "n_defined")


def export_report(report: GridReport, out_dir, stem: str = "grid_report") -> tuple:
    """Write ``<stem>.json`` (full fidelity) and ``<stem>.csv`` (one row per cell and score)."""
    out_dir = Path(out_dir)
    json_path, csv_path = out_dir / f"{stem}.json", out_dir / f"{stem}.csv"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        json_path.write_text(report.to_json())
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_CSV_COLUMNS)
            for c in report.cells:
                for name in SCORE_NAMES:
                    s = c["summary"][name]
                    writer.writerow(
                        [
                            c["scenario"],
                            c["obs_hours"],
                            c["lag_mins"],
                            name,
                            "" if s["mean"] is None else repr(s["mean"]),
                            "" if s["std"] is None else repr(s["std"]),
                            s["n_defined"],
                        ]
                    )
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return json_path, csv_path


@dataclass(frozen=True)
class ExplainResult:
    B: int
    ranked: list
    profile: object
    cumulative: object


def run_explain(config: ExperimentConfig, B_list=None, out_dir=None, records=None) -> list:
    """Global importance mapping for the first cell of the config's grid.

    Iteration ``b`` is seeded by ``b`` alone, so the run for a smaller ``B``
    is exactly the prefix of the run for a larger one; iterations are
    computed once up to ``max(B_list)``.
    """
    B_list = sorted(set(config.bootstraps if B_list is None else B_list))
    if not B_list or B_list[0] < 1:
        raise InvalidSpec("B_list must hold positive counts")
    if records is None:
        records = load_records(config)
    scenario, obs, lag = config.scenarios[0], config.obs_hours[0], config.lag_mins[0]
    fm, _, cadence = prepare_cell(records, scenario, obs, lag, config)
    explain_seed = seeding.derive_seed(config.seed, _EXPLAIN, *cell_key(scenario, obs, lag))
    recs = bootstrap_importances(fm.X, fm.y, config.forest, B_list[-1], explain_seed, n_jobs=config.n_threads)

    results = []
    for B in B_list:
        cum = accumulate(recs[:B])
        ranked = rank_features(cum, fm.descriptors)
        profile = channel_profile(cum, fm.descriptors, cadence=cadence)
        results.append(ExplainResult(B, ranked, profile, cum))
        if out_dir is not None:
            out = Path(out_dir)
            try:
                out.mkdir(parents=True, exist_ok=True)
                write_importance_csv(ranked, out / f"importance_B{B}.csv", cadence=cadence)
                write_profile_csv(profile, out / f"profile_B{B}.csv")
            except OSError as exc:
                raise IoFailure(str(exc)) from exc
    return results
