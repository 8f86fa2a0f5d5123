"""Contingency tables and categorical forecast skill scores.

Scores are computed in double precision directly from integer counts. A
score whose denominator vanishes is *undefined*: the scalar functions raise
:class:`~sepmap.errors.UndefinedScore`, while :func:`skill_report` stores
``None`` in its place so that undefined values can be excluded (never
zero-filled) when averaging over runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import EmptyInput, LengthMismatch, UndefinedScore

SCORE_NAMES = ("tss", "hss", "css", "gss", "precision", "recall", "f1")


@dataclass(frozen=True)
class ContingencyTable:
    """2x2 counts for a binary forecast, positive class = event."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def p(self) -> int:
        return self.tp + self.fn

    @property
    def n(self) -> int:
        return self.fp + self.tn

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def contingency(predictions, truth) -> ContingencyTable:
    """Cross-tabulate binary predictions against binary truth (1 = event)."""
    pred = np.asarray(predictions).astype(bool).ravel()
    obs = np.asarray(truth).astype(bool).ravel()
    if pred.shape != obs.shape:
        raise LengthMismatch(f"{pred.size} predictions vs {obs.size} observations")
    if pred.size == 0:
        raise EmptyInput("no forecasts to verify")
    return ContingencyTable(
        tp=int(np.sum(pred & obs)),
        fp=int(np.sum(pred & ~obs)),
        fn=int(np.sum(~pred & obs)),
        tn=int(np.sum(~pred & ~obs)),
    )


def _ratio(num, den, name):
    if den == 0:
        raise UndefinedScore(f"{name}: zero denominator")
    return num / den


def tss(t: ContingencyTable) -> float:
    """True skill statistic, POD minus POFD."""
    return _ratio(t.tp, t.tp + t.fn, "tss") - _ratio(t.fp, t.fp + t.tn, "tss")


def hss(t: ContingencyTable) -> float:
    """Heidke skill score in the P/N form."""
    den = t.p * (t.fn + t.tn) + t.n * (t.tp + t.fp)
    return _ratio(2.0 * (t.tp * t.tn - t.fn * t.fp), den, "hss")


def css(t: ContingencyTable) -> float:
    """Composite skill score: geometric mean of TSS and HSS, 0 for negative skill.

    TSS and HSS always carry the sign of ``tp*tn - fp*fn``, so their product
    is never negative; forecasts worse than chance (both scores < 0) are
    mapped to 0 rather than to the square root of a positive product.
    """
    a, b = tss(t), hss(t)
    theta = a * b
    return math.sqrt(theta) if theta >= 0 and a >= 0 and b >= 0 else 0.0


def gss(t: ContingencyTable) -> float:
    """Gilbert skill score (hits corrected for chance)."""
    if t.total == 0:
        raise UndefinedScore("gss: empty table")
    chance = (t.tp + t.fp) * (t.tp + t.fn) / t.total
    return _ratio(t.tp - chance, t.tp + t.fp + t.fn - chance, "gss")


def precision_recall_f1(t: ContingencyTable):
    """Return ``(precision, recall, f1)``; undefined components are ``None``."""
    precision = t.tp / (t.tp + t.fp) if t.tp + t.fp > 0 else None
    recall = t.tp / (t.tp + t.fn) if t.tp + t.fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass(frozen=True)
class SkillReport:
    tss: float | None
    hss: float | None
    css: float | None
    gss: float | None
    precision: float | None
    recall: float | None
    f1: float | None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SkillReport":
        return cls(**{f.name: d.get(f.name) for f in fields(cls)})


def _defined(fn, t):
    try:
        return float(fn(t))
    except UndefinedScore:
        return None


def skill_report(t: ContingencyTable) -> SkillReport:
    precision, recall, f1 = precision_recall_f1(t)
    return SkillReport(
        tss=_defined(tss, t),
        hss=_defined(hss, t),
        css=_defined(css, t),
        gss=_defined(gss, t),
        precision=precision,
        recall=recall,
        f1=f1,
    )
