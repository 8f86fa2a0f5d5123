import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepmap.errors import InconsistentDimensions, SingleClassInput
from sepmap.explain import (
    BootstrapRecord,
    CumulativeImportance,
    accumulate,
    bootstrap_importances,
    bootstrap_iteration,
    channel_profile,
    rank_features,
    write_importance_csv,
    write_profile_csv,
)
from sepmap.features import FeatureDescriptor
from sepmap.forest import ForestParams


def rec(b, imp):
    imp = np.asarray(imp, dtype=float)
    return BootstrapRecord(b, imp, imp > 0)


def desc(channel, start, stop, n=10, stat="mean"):
    return FeatureDescriptor(channel, "w5s2", 0, stat, start=start, stop=stop, n=n)


def test_accumulate_example():
    cum = accumulate([rec(0, [0.6, 0.4]), rec(1, [0.2, 0.8])])
    np.testing.assert_allclose(cum.cumulative, [0.8, 1.2])
    assert cum.frequency.tolist() == [2, 2] and cum.iterations == 2


def test_accumulate_dimension_mismatch():
    with pytest.raises(InconsistentDimensions):
        accumulate([rec(0, [1.0, 0.0]), rec(1, [1.0, 0.0, 0.0])])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(0, 1), min_size=4, max_size=4), min_size=1, max_size=8), st.randoms())
def test_accumulate_permutation_invariant(rows, rnd):
    recs = [rec(b, r) for b, r in enumerate(rows)]
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    a, b = accumulate(recs), accumulate(shuffled)
    assert np.array_equal(a.cumulative, b.cumulative)
    assert np.array_equal(a.frequency, b.frequency)


def test_rank_example():
    cum = CumulativeImportance(np.array([3.0, 1.0, 0.0]), np.array([3, 1, 0]), 3)
    ranked = rank_features(cum, ["a", "b", "c"])
    assert [r.index for r in ranked] == [0, 1, 2]
    assert [r.share for r in ranked] == [0.75, 0.25, 0.0]


def test_rank_ties_and_zero():
    cum = CumulativeImportance(np.array([1.0, 1.0, 1.0]), np.array([1, 3, 1]), 3)
    assert [r.index for r in rank_features(cum, "abc")] == [1, 0, 2]
    zero = CumulativeImportance(np.zeros(3), np.zeros(3, dtype=int), 2)
    ranked = rank_features(zero, "abc")
    assert [r.index for r in ranked] == [0, 1, 2] and all(r.share == 0 for r in ranked)
    with pytest.raises(InconsistentDimensions):
        rank_features(zero, "ab")


@given(st.lists(st.floats(0, 10), min_size=1, max_size=10))
def test_shares_sum_to_one(vals):
    cum = CumulativeImportance(np.array(vals), np.ones(len(vals), dtype=int), 1)
    total = sum(r.share for r in rank_features(cum, list(range(len(vals)))))
    assert total == pytest.approx(1.0 if sum(vals) > 0 else 0.0, abs=1e-9)


def test_channel_profile_example():
    descs = [desc("p3", 0, 5), desc("p5", 0, 5)]
    prof = channel_profile(CumulativeImportance(np.array([1.0, 3.0]), np.array([1, 1]), 1), descs)
    assert prof.channel_share("p3") == 0.25 and prof.channel_share("p5") == 0.75
    # midpoint of samples 0..4 in a 10-sample window: 10 - 2 = 8 samples before the end
    assert prof.positions["p3"].tolist() == [8.0]


def test_channel_profile_merges_positions():
    descs = [desc("p3", 0, 5), desc("p3", 0, 5, stat="std"), desc("p3", 5, 10)]
    prof = channel_profile(CumulativeImportance(np.array([1.0, 1.0, 2.0]), np.ones(3, dtype=int), 1), descs, cadence=120)
    assert prof.positions["p3"].tolist() == [6.0, 16.0]
    assert prof.shares["p3"].tolist() == [0.5, 0.5]


def _data(n=60, d=8, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 3] > 0).astype(int)
    return X, y


def test_bootstrap_reproducible_and_thread_independent():
    X, y = _data()
    params = ForestParams(n_trees=10)
    a = bootstrap_importances(X, y, params, 4, master_seed=5, n_jobs=1)
    b = bootstrap_importances(X, y, params, 4, master_seed=5, n_jobs=3)
    for ra, rb in zip(a, b):
        assert np.array_equal(ra.importance, rb.importance)
    assert not np.array_equal(a[0].importance, a[1].importance)


def test_bootstrap_errors():
    X, _ = _data()
    with pytest.raises(SingleClassInput):
        bootstrap_importances(X, np.zeros(60), ForestParams(n_trees=2), 2, 0)
    with pytest.raises(ValueError):
        bootstrap_importances(X, np.arange(60) % 2, ForestParams(n_trees=2), 0, 0)


def test_single_iteration_is_one_forest_mdi():
    X, y = _data()
    r = bootstrap_iteration(X, y, ForestParams(n_trees=10), 0, 3)
    cum = accumulate([r])
    np.testing.assert_array_equal(cum.cumulative, r.importance)
    assert r.importance.sum() == pytest.approx(1.0)


def test_single_signal_selected():
    X, y = _data(80, 10, seed=1)
    recs = bootstrap_importances(X, y, ForestParams(n_trees=20), 10, 2)
    assert sum(r.selected[3] for r in recs) >= 9
    assert int(np.argmax(accumulate(recs).cumulative)) == 3


def test_amplification():
    # a feature important in every iteration dominates one important only once
    recs = [rec(b, [0.5, 0.5 if b == 0 else 0.0, 0.0 if b == 0 else 0.5]) for b in range(10)]
    cum = accumulate(recs)
    assert cum.cumulative[0] == 5.0 and cum.cumulative[1] == 0.5


def test_csv_writers(tmp_path):
    descs = [desc("p3", 0, 5), desc("p5", 5, 10)]
    cum = CumulativeImportance(np.array([1.0, 3.0]), np.array([1, 2]), 2)
    write_importance_csv(rank_features(cum, descs), tmp_path / "imp.csv")
    rows = list(csv.DictReader((tmp_path / "imp.csv").open()))
    assert rows[0]["channel"] == "p5" and float(rows[0]["share"]) == 0.75
    assert float(rows[1]["position_mins_before_end"]) == 8.0
    write_profile_csv(channel_profile(cum, descs), tmp_path / "prof.csv")
    assert len(list(csv.reader((tmp_path / "prof.csv").open()))) == 3
