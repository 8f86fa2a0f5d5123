"""Interval-feature random forests and global feature mapping for SEP event prediction."""

from .dataset import (
    Category,
    EventRecord,
    LabeledInstance,
    Scenario,
    TimeSeriesSlice,
    WindowSpec,
    apply_scenario,
    cut_window,
    log_transform,
    parse_manifest,
    stratified_split,
)
from .explain import accumulate, bootstrap_importances, channel_profile, rank_features
from .features import ExtractionConfig, extract, extract_matrix, generate_intervals
from .forest import Forest, ForestParams, best_split, fit_forest, fit_tree, gini, mdi_importance
from .metrics import ContingencyTable, SkillReport, contingency, skill_report

__version__ = "0.1.0"
