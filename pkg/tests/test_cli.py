import json
import os

import numpy as np
import pytest

from qrnn_forge.cli import DEFAULT_SETTINGS, main
from qrnn_forge.depth import DEPTH_CSV_HEADER


def write_config(tmp_path, **overrides):
    cfg = {
        "dataset": {"kind": "synthetic", "seed": 3, "n_days": 30},
        "sequence_length": 5,
        "training": {"epochs": 2, "seeds": [0, 1]},
        "model": {"n_hidden": 1},
        "enqode": {"steps": 25, "k": 3},
        "depth_scan": {"n_f": [2], "fidelity_rows": 25},
    }
    for key, value in overrides.items():
        if isinstance(value, dict):
            cfg.setdefault(key, {}).update(value)
        else:
            cfg[key] = value
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def run(args):
    return main([str(a) for a in args])


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def test_train_two_seed_summary(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert run(["train", "--config", cfg, "--out", out]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["seeds"] == [0, 1]
    assert len(summary["per_seed"]) == 2
    mses = [row["test_mse"] for row in summary["per_seed"]]
    assert summary["mean_test_mse"] == pytest.approx(float(np.mean(mses)))
    for seed in (0, 1):
        assert (out / f"curve_seed{seed}.csv").exists()
        assert (out / f"checkpoint_seed{seed}.json").exists()
    assert (out / "training_curves.png").exists()


def test_train_curve_csv_shape(tmp_path):
    cfg = write_config(tmp_path, training={"epochs": 3, "seeds": [0]})
    out = tmp_path / "run"
    assert run(["train", "--config", cfg, "--out", out]) == 0
    lines = (out / "curve_seed0.csv").read_text().strip().split("\n")
    assert lines[0] == "epoch,loss"
    assert len(lines) == 4


def test_classical_model_trains(tmp_path):
    cfg = write_config(tmp_path, model={"kind": "classical", "n_hidden": 2})
    out = tmp_path / "run"
    assert run(["train", "--config", cfg, "--out", out]) == 0
    checkpoint = json.loads((out / "checkpoint_seed0.json").read_text())
    assert checkpoint["kind"] == "classical"
    assert len(checkpoint["params"]) == 2 + 2 * 4 + 4 + 2  # U, V, W, hidden bias


def test_enqode_model_saved_for_reuse(tmp_path):
    cfg = write_config(tmp_path, model={"encoding": "enqode", "n_hidden": 1},
                       training={"epochs": 1, "seeds": [0]})
    out = tmp_path / "run"
    assert run(["train", "--config", cfg, "--out", out]) == 0
    assert (out / "enqode_model.json").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert 0.0 <= summary["enqode_mean_fidelity"] <= 1.0


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------


def test_missing_data_file_exit_2_names_path(tmp_path, capsys):
    cfg = write_config(tmp_path, dataset={"kind": "csv", "path": "/nope/data.csv"})
    assert run(["train", "--config", cfg, "--out", tmp_path / "x"]) == 2
    assert "/nope/data.csv" in capsys.readouterr().err


def test_missing_config_file_exit_2(tmp_path, capsys):
    assert run(["train", "--config", tmp_path / "absent.json"]) == 2
    assert "not found" in capsys.readouterr().err


def test_bad_enum_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, model={"encoding": "frequency"})
    assert run(["train", "--config", cfg]) == 2
    assert "encoding" in capsys.readouterr().err


def test_unknown_key_exit_2(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"sequnce_length": 4}))
    assert run(["train", "--config", path]) == 2
    assert "sequnce_length" in capsys.readouterr().err


def test_set_override_applies(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert run(["train", "--config", cfg, "--out", out, "--seeds", "5",
                "--set", "training.epochs=1"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seeds"] == [5]
    assert summary["config"]["training"]["epochs"] == 1


def test_shots_flag(tmp_path):
    cfg = write_config(tmp_path, training={"epochs": 1, "seeds": [0]})
    out = tmp_path / "run"
    assert run(["train", "--config", cfg, "--out", out, "--shots", "64"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["training"]["shots"] == 64


# ---------------------------------------------------------------------------
# ablate-preprocessing
# ---------------------------------------------------------------------------


def test_ablate_three_rows_with_unit_base_ratio(tmp_path):
    cfg = write_config(tmp_path, training={"epochs": 1, "seeds": [0]})
    out = tmp_path / "run"
    assert run(["ablate-preprocessing", "--config", cfg, "--out", out]) == 0
    lines = (out / "table.csv").read_text().strip().split("\n")
    assert lines[0] == "preprocessing,mean_mse,mse_ratio"
    assert len(lines) == 4
    none_row = lines[1].split(",")
    assert none_row[0] == "none"
    assert float(none_row[2]) == 1.0
    assert (out / "ablation.png").exists()


def test_ablate_rejects_angle_encoding(tmp_path, capsys):
    cfg = write_config(tmp_path, model={"encoding": "angle"})
    assert run(["ablate-preprocessing", "--config", cfg, "--out", tmp_path / "x"]) == 2
    assert "amplitude" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# compare-encoding
# ---------------------------------------------------------------------------


def test_compare_encoding_rows(tmp_path):
    cfg = write_config(tmp_path, training={"epochs": 1, "seeds": [0], "shots": 48})
    out = tmp_path / "run"
    assert run(["compare-encoding", "--config", cfg, "--out", out]) == 0
    lines = (out / "table.csv").read_text().strip().split("\n")
    assert lines[0] == "feature_map,noise,mean_mse,mse_ratio,enqode_mean_fidelity"
    assert len(lines) == 5
    first = lines[1].split(",")
    assert (first[0], first[1]) == ("amplitude", "none")
    assert float(first[3]) == 1.0  # noiseless exact row is the ratio baseline
    enqode_rows = [l.split(",") for l in lines[1:] if l.startswith("enqode")]
    assert all(r[4] != "" for r in enqode_rows)
    assert all(0.0 <= float(r[4]) <= 1.0 for r in enqode_rows)


# ---------------------------------------------------------------------------
# depth-scan
# ---------------------------------------------------------------------------


def test_depth_scan_outputs(tmp_path):
    cfg = write_config(tmp_path, depth_scan={"n_f": [2, 3], "fidelity_rows": 25})
    out = tmp_path / "run"
    assert run(["depth-scan", "--config", cfg, "--out", out]) == 0
    lines = (out / "table.csv").read_text().strip().split("\n")
    assert lines[0] == DEPTH_CSV_HEADER
    assert len(lines) == 1 + 2 * 2 * 2  # two structures x two encodings x two sizes
    fid_lines = (out / "enqode_fidelity.csv").read_text().strip().split("\n")
    assert fid_lines[0] == "qubits,features,layers,mean_fidelity"
    assert len(fid_lines) == 3
    assert (out / "depth_scan.png").exists()


def test_default_depth_range_mirrors_reference_table():
    assert DEFAULT_SETTINGS["depth_scan"]["n_f"] == [2, 3, 4, 5]  # 4 fidelity rows


def test_outputs_stay_inside_output_directory(tmp_path, monkeypatch):
    workdir = tmp_path / "cwd"
    workdir.mkdir()
    monkeypatch.chdir(workdir)
    cfg = write_config(tmp_path, training={"epochs": 1, "seeds": [0]})
    out = tmp_path / "run"
    assert run(["train", "--config", cfg, "--out", out]) == 0
    assert os.listdir(workdir) == []


def test_shipped_configs_validate():
    import pathlib

    from qrnn_forge.cli import DEFAULT_SETTINGS, _merge, validate_settings

    for name in ("quick.json", "full.json"):
        path = pathlib.Path(__file__).resolve().parents[1] / "configs" / name
        settings = _merge(DEFAULT_SETTINGS, json.loads(path.read_text()))
        validate_settings(settings)


def test_worker_pool_env_does_not_change_results(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, training={"epochs": 1, "seeds": [0, 1, 2]})
    out_a = tmp_path / "a"
    assert run(["train", "--config", cfg, "--out", out_a]) == 0
    monkeypatch.setenv("QRNN_FORGE_THREADS", "1")
    out_b = tmp_path / "b"
    assert run(["train", "--config", cfg, "--out", out_b]) == 0
    assert (out_a / "summary.json").read_text() == (out_b / "summary.json").read_text()
