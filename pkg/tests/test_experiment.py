import csv
import json

import numpy as np
import pytest

from sepmap.cli import main
from sepmap.errors import InvalidSpec, NoValidCells
from sepmap.experiment import (
    ExperimentConfig,
    GridReport,
    export_report,
    load_config,
    load_records,
    run_explain,
    run_grid,
)
from sepmap.forest import ForestParams
from sepmap.metrics import SCORE_NAMES
from sepmap.synthetic import SyntheticSpec

SMALL = SyntheticSpec(n_events={"Strong": 6, "Weak": 6, "NoEvent": 6}, slice_hours=14, seed=3)


def small_config(**kw):
    base = dict(synthetic=SMALL, runs=1, forest=ForestParams(n_trees=5), obs_hours=(6,), lag_mins=(30,))
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_requires_one_source():
    with pytest.raises(InvalidSpec):
        ExperimentConfig()
    with pytest.raises(InvalidSpec):
        ExperimentConfig(manifest="m.json", synthetic=SMALL)
    with pytest.raises(InvalidSpec):
        small_config(runs=0)


def test_config_round_trip(tmp_path):
    cfg = small_config(threads=3, seed=9)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = load_config(path)
    assert back.to_dict() == cfg.to_dict() and back.threads == 1
    with pytest.raises(InvalidSpec):
        ExperimentConfig.from_dict({**cfg.to_dict(), "bogus": 1})


def test_full_grid_shape(tmp_path):
    report = run_grid(small_config(obs_hours=(6, 8, 10), lag_mins=(5, 15, 30, 45, 60, 120, 180)))
    assert len(report.cells) == 63
    assert all(c["failure"] is None for c in report.cells)
    _, csv_path = export_report(report, tmp_path)
    rows = list(csv.DictReader(csv_path.open()))
    assert len(rows) == 63 * len(SCORE_NAMES) == 441


def test_single_cell_grid_and_round_trip(tmp_path):
    report = run_grid(small_config(runs=3))
    assert len(report.cells) == 3
    cell = report.cell("StrongVsWeak", 6, 30)
    assert cell["n_positive"] == 6 and cell["n_negative"] == 6 and len(cell["runs"]) == 3
    back = GridReport.from_json(report.to_json())
    assert back.to_json() == report.to_json()
    for run in cell["runs"]:
        assert run["tp"] + run["fp"] + run["fn"] + run["tn"] == 6


def test_undefined_scores_excluded(tmp_path):
    # tiny forests on noise: some runs predict no positives, so precision is undefined there
    spec = SyntheticSpec(n_events={"Strong": 4, "Weak": 4}, amplitudes=(0, 0, 0), seed=1)
    report = run_grid(small_config(synthetic=spec, scenarios=("StrongVsWeak",), runs=12, forest=ForestParams(n_trees=1)))
    cell = report.cells[0]
    precision = [r["precision"] for r in cell["runs"]]
    summary = cell["summary"]["precision"]
    assert summary["n_defined"] == sum(p is not None for p in precision)
    if summary["n_defined"]:
        assert summary["mean"] == pytest.approx(np.mean([p for p in precision if p is not None]))
    _, csv_path = export_report(report, tmp_path)
    text = csv_path.read_text()
    assert "nan" not in text.lower()


def test_failed_cells_are_noted():
    cfg = small_config(scenarios=("StrongVsWeak",), obs_hours=(6, 20))
    report = run_grid(cfg)
    bad = report.cell("StrongVsWeak", 20, 30)
    assert bad["failure"] and bad["runs"] == []
    assert report.cell("StrongVsWeak", 6, 30)["failure"] is None
    with pytest.raises(NoValidCells):
        run_grid(small_config(obs_hours=(20,)))


def test_grid_thread_independent():
    a = run_grid(small_config(lag_mins=(5, 60), threads=1))
    b = run_grid(small_config(lag_mins=(5, 60), threads=4))
    assert a.to_json() == b.to_json()


def test_explain_prefixes(tmp_path):
    cfg = small_config(scenarios=("StrongVsWeak",))
    res = run_explain(cfg, B_list=[1, 3], out_dir=tmp_path)
    assert [r.B for r in res] == [1, 3]
    assert res[1].cumulative.iterations == 3
    assert (tmp_path / "importance_B3.csv").exists() and (tmp_path / "profile_B1.csv").exists()
    one = run_explain(cfg, B_list=[1])[0]
    np.testing.assert_array_equal(one.cumulative.cumulative, res[0].cumulative.cumulative)


def test_load_records_from_manifest(tmp_path):
    assert main(["gen-synthetic", "--out", str(tmp_path), "--seed", "2"]) == 0
    cfg = ExperimentConfig(manifest=str(tmp_path / "manifest.json"), channels=("P3", "P5", "P7"))
    assert len(load_records(cfg)) == 40


# -- CLI ----------------------------------------------------------------------


def test_cli_run_grid(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(small_config().to_dict()))
    out = tmp_path / "out"
    assert main(["run-grid", "--config", str(cfg), "--lag-mins", "5,60", "--out", str(out)]) == 0
    report = json.loads((out / "grid_report.json").read_text())
    assert len(report["cells"]) == 6
    assert len(list(csv.reader((out / "grid_report.csv").open()))) == 1 + 6 * 7


def test_cli_run_explain(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(small_config().to_dict()))
    assert main(["run-explain", "--config", str(cfg), "--bootstraps", "2", "--out", str(tmp_path)]) == 0
    assert "B=2:" in capsys.readouterr().out
    assert (tmp_path / "importance_B2.csv").exists()


def test_cli_error_json(tmp_path, capsys):
    assert main(["run-grid", "--manifest", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "missing_file"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run-grid", "--config", str(bad)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "invalid_spec"
