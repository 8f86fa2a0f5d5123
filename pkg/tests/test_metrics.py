import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sepmap.errors import EmptyInput, LengthMismatch, UndefinedScore
from sepmap.metrics import (
    ContingencyTable,
    contingency,
    css,
    gss,
    hss,
    precision_recall_f1,
    skill_report,
    tss,
)

TOL = 1e-12
ALL_TABLES = [ContingencyTable(*c) for c in itertools.product(range(7), repeat=4)]
tables = st.builds(ContingencyTable, *[st.integers(0, 50)] * 4)


def oracle(t):
    """Direct textbook formulas in exact rational arithmetic; None where undefined."""
    tp, fp, fn, tn = (Fraction(v) for v in (t.tp, t.fp, t.fn, t.tn))
    out = {}
    out["tss"] = tp / (tp + fn) - fp / (fp + tn) if (tp + fn) and (fp + tn) else None
    den = (tp + fn) * (fn + tn) + (fp + tn) * (tp + fp)
    out["hss"] = 2 * (tp * tn - fn * fp) / den if den else None
    if out["tss"] is None or out["hss"] is None:
        out["css"] = None
    else:
        theta = out["tss"] * out["hss"]
        negative_skill = out["tss"] < 0 or out["hss"] < 0
        out["css"] = math.sqrt(theta) if theta >= 0 and not negative_skill else 0.0
    total = tp + fp + fn + tn
    if total:
        ch = (tp + fp) * (tp + fn) / total
        out["gss"] = (tp - ch) / (tp + fp + fn - ch) if tp + fp + fn - ch else None
    else:
        out["gss"] = None
    out["precision"] = tp / (tp + fp) if tp + fp else None
    out["recall"] = tp / (tp + fn) if tp + fn else None
    if out["precision"] is None or out["recall"] is None or out["precision"] + out["recall"] == 0:
        out["f1"] = None
    else:
        p, r = out["precision"], out["recall"]
        out["f1"] = 2 * p * r / (p + r)
    return out


@pytest.mark.parametrize(
    "pred, truth, expected",
    [
        ([1, 1, 0, 0], [1, 1, 0, 0], (2, 0, 0, 2)),
        ([0, 0, 1, 1], [1, 1, 0, 0], (0, 2, 2, 0)),
        ([1, 0, 1, 0, 1], [1, 1, 0, 0, 1], (2, 1, 1, 1)),
    ],
)
def test_contingency(pred, truth, expected):
    assert contingency(pred, truth) == ContingencyTable(*expected)


def test_contingency_rejects_bad_input():
    with pytest.raises(LengthMismatch):
        contingency([1, 0], [1])
    with pytest.raises(EmptyInput):
        contingency([], [])


def test_hand_computed_table():
    t = ContingencyTable(2, 1, 1, 1)
    assert tss(t) == pytest.approx(1 / 6, abs=TOL)
    assert hss(t) == pytest.approx(1 / 6, abs=TOL)
    assert css(t) == pytest.approx(1 / 6, abs=TOL)
    assert gss(t) == pytest.approx(1 / 11, abs=TOL)
    assert precision_recall_f1(t) == pytest.approx((2 / 3, 2 / 3, 2 / 3), abs=TOL)


def test_perfect_and_inverted():
    perfect = ContingencyTable(5, 0, 0, 5)
    assert (tss(perfect), hss(perfect), css(perfect), gss(perfect)) == (1.0, 1.0, 1.0, 1.0)
    inverted = ContingencyTable(0, 5, 5, 0)
    assert tss(inverted) == -1.0 and hss(inverted) == -1.0 and css(inverted) == 0.0


def test_gss_random_table_is_zero():
    assert gss(ContingencyTable(1, 1, 1, 1)) == 0.0


def test_zero_hit_boundary():
    p, r, f1 = precision_recall_f1(ContingencyTable(0, 3, 2, 4))
    assert p == 0 and r == 0 and f1 is None


def test_undefined_scores_raise_and_report_null():
    t = ContingencyTable(0, 0, 0, 4)  # no observed events
    with pytest.raises(UndefinedScore):
        tss(t)
    report = skill_report(t)
    assert report.tss is None and report.css is None
    assert json.loads(report.to_json())["tss"] is None


def test_exhaustive_against_oracle():
    for t in ALL_TABLES:
        got = skill_report(t).to_dict()
        want = oracle(t)
        for name, w in want.items():
            if w is None:
                assert got[name] is None, (t, name)
            else:
                assert got[name] == pytest.approx(float(w), abs=TOL), (t, name)


def test_tss_and_hss_share_sign():
    # so the product of the two is never negative
    for t in ALL_TABLES:
        r = skill_report(t)
        if r.tss is not None and r.hss is not None:
            assert np.sign(r.tss) == np.sign(r.hss)
            assert r.tss * r.hss >= 0


def test_css_zero_for_negative_skill():
    hits = 0
    for t in ALL_TABLES:
        r = skill_report(t)
        if r.tss is not None and r.hss is not None and min(r.tss, r.hss) < 0:
            hits += 1
            assert r.css == 0.0
    assert hits > 0


@given(tables)
def test_tss_identity_and_bounds(t):
    r = skill_report(t)
    if r.tss is None:
        return
    tnr = t.tn / (t.fp + t.tn)
    assert r.tss == pytest.approx(r.recall + tnr - 1, abs=TOL)
    assert -1 <= r.tss <= 1
    assert -1 - TOL <= r.hss <= 1 + TOL
    assert 0 <= r.css <= 1 + TOL


@given(tables)
def test_swap_symmetry(t):
    swapped = ContingencyTable(t.tn, t.fn, t.fp, t.tp)
    a, b = skill_report(t), skill_report(swapped)
    for name in ("tss", "hss"):
        if getattr(a, name) is None:
            assert getattr(b, name) is None
        else:
            assert getattr(a, name) == pytest.approx(getattr(b, name), abs=TOL)


def test_scale_invariance():
    for t in ALL_TABLES[::7]:
        base = skill_report(t).to_dict()
        for k in range(1, 6):
            scaled = skill_report(ContingencyTable(t.tp * k, t.fp * k, t.fn * k, t.tn * k)).to_dict()
            for name, v in base.items():
                if v is None:
                    assert scaled[name] is None
                else:
                    assert scaled[name] == pytest.approx(v, abs=TOL)


def test_never_non_finite():
    for t in ALL_TABLES:
        for v in skill_report(t).to_dict().values():
            assert v is None or np.isfinite(v)
