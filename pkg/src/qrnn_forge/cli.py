"""Experiment driver.

    qrnn-forge <train|ablate-preprocessing|compare-encoding|depth-scan>
               --config <file> [--out <dir>] [--seeds a,b,c] [--exact|--shots N]
               [--set dotted.path=value ...]

Configuration is a single JSON document overlaid on the defaults below; CLI
flags override individual fields. Every subcommand writes only into its
output directory: CSV/JSON tables plus rendered PNG figures.
timings.json holds wall-clock times and is the one intentionally
non-reproducible output file; everything else is bit-identical across reruns
in exact mode. Exit codes: 0 success, 1 runtime failure, 2 invalid config.
"""
from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

from . import experiments, report
from .data import FEATURE_SPECS
from .depth import Topology, depth_rows_to_csv
from .enqode import save_model
from .qrnn import save_checkpoint
from .training import ClassicalRnn

SCHEMA_VERSION = 1

DEFAULT_SETTINGS = {
    "dataset": {
        "kind": "synthetic",
        "path": None,
        "seed": 7,
        "n_days": 260,
        "drift": 2e-4,
        "volatility": 0.01,
    },
    "features": "yahoo3",
    "sequence_length": 8,
    "test_ratio": 0.2,
    "target_feature_index": 0,
    "preprocessing": "maxmin",
    "model": {
        "kind": "qrnn",
        "n_hidden": 2,
        "encoding": "amplitude",
        "structure": "canonical",
        "ansatz_reps": 1,
        "entanglement": "full",
    },
    "training": {
        "learning_rate": 0.03,
        "spsa_step": 0.001,
        "epochs": 50,
        "shots": 1024,  # reference experiment setting; --exact for exact probabilities
        "seeds": [0, 1, 2, 3, 4],
    },
    "enqode": {
        "k": None,
        "layers": None,
        "steps": 500,
        "lr": 0.05,
        "restarts": 3,
        "seed": 11,
        "refine": True,
        "model_path": None,
    },
    "noise": None,
    "depth_scan": {
        "n_f": [2, 3, 4, 5],
        "t_steps": 2,
        "coupling": "all_to_all",
        "n_hidden": 1,
        "ansatz_reps": 1,
        "seed": 7,
        "fidelity_rows": 500,
    },
    "output_dir": "runs/latest",
}

_OPEN_VALUED = {"dataset.path", "noise", "enqode.k", "enqode.layers",
                "enqode.model_path", "training.shots"}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# settings assembly
# ---------------------------------------------------------------------------


def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        dotted = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{dotted}'")
        if isinstance(base[key], dict) and dotted not in _OPEN_VALUED:
            if not isinstance(value, dict):
                raise ConfigError(f"'{dotted}' must be an object")
            out[key] = _merge(base[key], value, prefix=f"{dotted}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_dotted(settings: dict, dotted: str, raw: str) -> None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = settings
    parts = dotted.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unknown config key '{dotted}'")
        if not isinstance(node[part], dict):
            node[part] = {}
        node = node[part]
    if parts[-1] not in node and dotted not in _OPEN_VALUED:
        raise ConfigError(f"unknown config key '{dotted}'")
    node[parts[-1]] = value


def validate_settings(settings: dict) -> None:
    ds = settings["dataset"]
    if ds["kind"] not in ("synthetic", "csv"):
        raise ConfigError(f"dataset.kind must be 'synthetic' or 'csv', got {ds['kind']!r}")
    if ds["kind"] == "csv":
        if not ds["path"]:
            raise ConfigError("dataset.kind 'csv' requires dataset.path")
        if not Path(ds["path"]).exists():
            raise ConfigError(f"data file not found: {ds['path']}")
    elif ds["n_days"] < 2:
        raise ConfigError("dataset.n_days must be >= 2")
    if settings["features"] not in FEATURE_SPECS:
        raise ConfigError(f"features must be one of {sorted(FEATURE_SPECS)}")
    if settings["preprocessing"] not in ("none", "minmax", "maxmin"):
        raise ConfigError("preprocessing must be 'none', 'minmax', or 'maxmin'")
    if settings["sequence_length"] < 1:
        raise ConfigError("sequence_length must be >= 1")
    if not 0.0 <= settings["test_ratio"] < 1.0:
        raise ConfigError("test_ratio must lie in [0, 1)")
    m = settings["model"]
    if m["kind"] not in ("qrnn", "classical"):
        raise ConfigError("model.kind must be 'qrnn' or 'classical'")
    if m["encoding"] not in ("angle", "amplitude", "enqode"):
        raise ConfigError("model.encoding must be 'angle', 'amplitude', or 'enqode'")
    if m["structure"] not in ("canonical", "alternating"):
        raise ConfigError("model.structure must be 'canonical' or 'alternating'")
    if m["entanglement"] not in ("linear", "full", "none"):
        raise ConfigError("model.entanglement must be 'linear', 'full', or 'none'")
    if m["n_hidden"] < 1 or m["ansatz_reps"] < 1:
        raise ConfigError("model.n_hidden and model.ansatz_reps must be >= 1")
    t = settings["training"]
    if t["learning_rate"] <= 0 or t["spsa_step"] <= 0:
        raise ConfigError("training.learning_rate and training.spsa_step must be positive")
    if t["epochs"] < 0:
        raise ConfigError("training.epochs must be >= 0")
    if t["shots"] is not None and t["shots"] < 1:
        raise ConfigError("training.shots must be >= 1 or null for exact mode")
    if not t["seeds"] or not all(isinstance(s, int) for s in t["seeds"]):
        raise ConfigError("training.seeds must be a non-empty list of integers")
    noise = settings["noise"]
    if noise is not None:
        if not isinstance(noise, dict) or not {"p1", "p2"} <= set(noise):
            raise ConfigError("noise must be null or an object with p1 and p2")
        if not (0 <= noise["p1"] <= 1 and 0 <= noise["p2"] <= 1):
            raise ConfigError("noise probabilities must lie in [0, 1]")
    e = settings["enqode"]
    if e["steps"] < 1 or e["restarts"] < 1 or e["lr"] <= 0:
        raise ConfigError("enqode.steps, enqode.restarts must be >= 1 and enqode.lr positive")
    if e["model_path"] is not None and not Path(e["model_path"]).exists():
        raise ConfigError(f"enqode model file not found: {e['model_path']}")
    d = settings["depth_scan"]
    if not d["n_f"] or not all(isinstance(n, int) and n >= 1 for n in d["n_f"]):
        raise ConfigError("depth_scan.n_f must be a non-empty list of positive integers")
    try:
        Topology(d["coupling"])
    except ValueError:
        raise ConfigError("depth_scan.coupling must be 'all_to_all' or 'linear_chain'") from None


def load_settings(args) -> dict:
    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        user = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    settings = _merge(DEFAULT_SETTINGS, user)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects dotted.path=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        _apply_dotted(settings, dotted, raw)
    if args.out:
        settings["output_dir"] = args.out
    if args.seeds:
        try:
            settings["training"]["seeds"] = [int(s) for s in args.seeds.split(",")]
        except ValueError:
            raise ConfigError(f"--seeds expects comma-separated integers, got {args.seeds!r}") from None
    if args.exact:
        settings["training"]["shots"] = None
    elif args.shots is not None:
        settings["training"]["shots"] = args.shots
    validate_settings(settings)
    return settings


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _outdir(settings) -> Path:
    out = Path(settings["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_echo(settings) -> dict:
    echo = copy.deepcopy(settings)
    echo.pop("output_dir", None)  # kept out so reruns into new directories match
    return echo


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: str, rows: list[list]) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(settings) -> int:
    out = _outdir(settings)
    result, prepared, enqode_model = experiments.run_train_experiment(settings)
    for run in result.seed_runs:
        _write_csv(out / f"curve_seed{run.seed}.csv", "epoch,loss",
                   [[i, loss] for i, loss in enumerate(run.curve)])
        _write_checkpoint(settings, prepared, enqode_model, run, out)
    if enqode_model is not None:
        save_model(enqode_model, out / "enqode_model.json")
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "train",
        "config": _config_echo(settings),
        "parameter_count": result.parameter_count,
        "seeds": [run.seed for run in result.seed_runs],
        "per_seed": [
            {
                "seed": run.seed,
                "train_mse": run.train_mse,
                "test_mse": run.test_mse,
                "return_space_mse": run.return_space_mse,
            }
            for run in result.seed_runs
        ],
        "mean_test_mse": result.mean_test_mse,
        "enqode_mean_fidelity": result.enqode_fidelity,
    }
    _write_json(out / "summary.json", summary)
    _write_json(out / "timings.json", {
        "wall_seconds": {str(run.seed): run.wall_seconds for run in result.seed_runs},
    })
    report.save_training_curves({run.seed: run.curve for run in result.seed_runs},
                                out / "training_curves.png")
    return 0


def _write_checkpoint(settings, prepared, enqode_model, run, out: Path) -> None:
    path = out / f"checkpoint_seed{run.seed}.json"
    factory = experiments.make_model_factory(settings, prepared, enqode_model)
    model = factory().replace_params(run.params)
    if isinstance(model, ClassicalRnn):
        _write_json(path, {
            "schema_version": SCHEMA_VERSION,
            "kind": "classical",
            "n_hidden": model.n_hidden,
            "n_features": model.n_features,
            "params": model.params.tolist(),
            "target_bounds": list(model.target_bounds),
            "seed": run.seed,
        })
    else:
        save_checkpoint(model, path, seed=run.seed)


def cmd_ablate(settings) -> int:
    if settings["model"]["kind"] != "qrnn" or settings["model"]["encoding"] == "angle":
        raise ConfigError("ablate-preprocessing requires an amplitude-family encoding")
    out = _outdir(settings)
    rows = experiments.run_preprocessing_ablation(settings)
    _write_csv(out / "table.csv", "preprocessing,mean_mse,mse_ratio",
               [[r["preprocessing"], r["mean_mse"], r["mse_ratio"]] for r in rows])
    _write_json(out / "summary.json", {
        "schema_version": SCHEMA_VERSION,
        "command": "ablate-preprocessing",
        "config": _config_echo(settings),
        "rows": [{k: r[k] for k in ("preprocessing", "mean_mse", "mse_ratio")} for r in rows],
    })
    report.save_curve_comparison(
        [(r["preprocessing"], r["curves"]) for r in rows],
        out / "ablation.png", title="amplitude-feature preprocessing",
    )
    return 0


def cmd_compare_encoding(settings) -> int:
    if settings["model"]["kind"] != "qrnn":
        raise ConfigError("compare-encoding requires model.kind 'qrnn'")
    out = _outdir(settings)
    rows = experiments.run_encoding_comparison(settings)
    _write_csv(out / "table.csv", "feature_map,noise,mean_mse,mse_ratio,enqode_mean_fidelity",
               [[r["feature_map"], r["noise"], r["mean_mse"], r["mse_ratio"],
                 r["enqode_mean_fidelity"]] for r in rows])
    _write_json(out / "summary.json", {
        "schema_version": SCHEMA_VERSION,
        "command": "compare-encoding",
        "config": _config_echo(settings),
        "rows": [{k: r[k] for k in
                  ("feature_map", "noise", "mean_mse", "mse_ratio", "enqode_mean_fidelity")}
                 for r in rows],
    })
    report.save_curve_comparison(
        [(f"{r['feature_map']} / noise={r['noise']}", r["curves"]) for r in rows],
        out / "encoding_comparison.png", title="state preparation comparison",
    )
    return 0


def cmd_depth_scan(settings) -> int:
    out = _outdir(settings)
    depth_rows, fidelity_rows = experiments.run_depth_experiment(settings)
    (out / "table.csv").write_text(depth_rows_to_csv(depth_rows))
    _write_csv(out / "enqode_fidelity.csv", "qubits,features,layers,mean_fidelity",
               [[r["qubits"], r["features"], r["layers"], r["mean_fidelity"]]
                for r in fidelity_rows])
    _write_json(out / "summary.json", {
        "schema_version": SCHEMA_VERSION,
        "command": "depth-scan",
        "config": _config_echo(settings),
        "depth_rows": depth_rows,
        "fidelity_rows": fidelity_rows,
    })
    report.save_depth_figure(depth_rows, fidelity_rows, out / "depth_scan.png")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "ablate-preprocessing": cmd_ablate,
    "compare-encoding": cmd_compare_encoding,
    "depth-scan": cmd_depth_scan,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrnn-forge",
        description="train and analyze recurrent quantum circuits on market data",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seeds", help="comma-separated seed list override")
        mode = p.add_mutually_exclusive_group()
        mode.add_argument("--exact", action="store_true", help="exact probabilities")
        mode.add_argument("--shots", type=int, help="sample with this many shots")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a dotted config field, e.g. training.epochs=10")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](settings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure -> exit 1 with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
