import json

import numpy as np
import pytest

from sepmap.dataset import Category, parse_manifest
from sepmap.errors import InvalidSpec
from sepmap.synthetic import SyntheticSpec, gen_synthetic, synthesize


def test_deterministic():
    a, b = synthesize(SyntheticSpec(seed=4)), synthesize(SyntheticSpec(seed=4))
    assert all(np.array_equal(x.slice.values, y.slice.values) for x, y in zip(a, b))
    c = synthesize(SyntheticSpec(seed=5))
    assert not np.array_equal(a[0].slice.values, c[0].slice.values)


def test_counts_and_layout():
    spec = SyntheticSpec(n_events={"Strong": 3, "Weak": 2, "NoEvent": 4}, slice_hours=2)
    recs = synthesize(spec)
    assert [r.category for r in recs].count(Category.NO_EVENT) == 4
    assert len({r.event_id for r in recs}) == 9
    for r in recs:
        assert r.slice.values.shape == (3, 120)
        assert r.slice.end_time == r.sep_onset
        assert np.all(r.slice.values > 0)


def test_precursor_tracks_decay():
    base = dict(n_events={"Strong": 2, "Weak": 0}, noise_scale=0, drift_scale=0, level_scatter=0, amplitude_scatter=0)
    flux = synthesize(SyntheticSpec(**base, decay=0.01))[0].slice.values[0]
    # background 1 + 5 * exp(-0.01 * tau), tau = minutes to onset
    tau = np.arange(720, 0, -1)
    np.testing.assert_allclose(flux, 1 + 5 * np.exp(-0.01 * tau), rtol=1e-12)
    flat = synthesize(SyntheticSpec(**base, decay=0.0))[0].slice.values[0]
    np.testing.assert_allclose(flat, 6.0, rtol=1e-12)


def test_weak_events_carry_no_signal_by_default():
    spec = SyntheticSpec(noise_scale=0, drift_scale=0, level_scatter=0)
    weak = [r for r in synthesize(spec) if r.category.value == "Weak"]
    assert np.allclose(weak[0].slice.values[0], 1.0)


@pytest.mark.parametrize(
    "kw",
    [
        {"background": (1.0,)},
        {"amplitudes": (-1.0, 0, 0)},
        {"decay": -1},
        {"drift_memory": 1.0},
        {"n_events": {"Strong": 1}},
        {"n_events": {"Huge": 3}},
        {"category_scale": {"Huge": 1.0}},
    ],
)
def test_invalid_spec(kw):
    with pytest.raises(InvalidSpec):
        SyntheticSpec(**kw)


def test_gen_synthetic_round_trip(tmp_path):
    spec = SyntheticSpec(n_events={"Strong": 2, "Weak": 2}, slice_hours=3, seed=1)
    manifest = gen_synthetic(spec, tmp_path)
    back = parse_manifest(manifest, channels=None)
    orig = synthesize(spec)
    assert [r.event_id for r in back] == [r.event_id for r in orig]
    for a, b in zip(orig, back):
        np.testing.assert_allclose(a.slice.values, b.slice.values, rtol=1e-15)
    assert SyntheticSpec.from_dict(json.loads((tmp_path / "synthetic_spec.json").read_text())) == spec
