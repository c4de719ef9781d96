"""Experiment orchestration shared by the CLI and the acceptance suite.

Wires the pieces together: synthetic or CSV market data -> feature pipeline
(train-only scaler fit, optional amplitude-feature augmentation) -> windowed
sequences -> model construction (quantum or classical baseline) -> seeded
SPSA+Adam training runs -> tables for the preprocessing ablation, encoding
comparison, and depth scan.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import FEATURE_SPECS, compute_features, load_csv, split, synthetic, windowize
from .depth import CouplingMap, Topology, depth_scan
from .encoding import ScaleMode, apply_scaler, augment_amplitude_feature, fit_scaler
from .enqode import EnqodeModel, fit_enqode, load_model, mean_fidelity
from .qrnn import (
    Encoding,
    Entanglement,
    QrnnConfig,
    Structure,
    amplitude_register_vector,
    feature_qubits,
    make_qrnn_model,
)
from .simulator import NoiseSpec
from .training import ClassicalRnn, TrainConfig, evaluate, train

THREADS_ENV = "QRNN_FORGE_THREADS"


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_tasks, limit))


def _parallel_map(fn, items):
    workers = worker_count(len(items))
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# dataset preparation
# ---------------------------------------------------------------------------


@dataclass
class PreparedData:
    train: list
    test: list
    target_bounds: tuple[float, float]
    n_features: int  # feature count after any augmentation
    train_rows: np.ndarray  # preprocessed rows visible to training windows


def prepare_dataset(records, feature_spec: str, seq_len: int, test_ratio: float,
                    target_index: int, preprocessing: ScaleMode | None) -> PreparedData:
    """Scale on training rows only, optionally append the pre-normalization
    amplitude feature, window, and split chronologically.

    The windowed matrix is min-max scaled, so each sample's scaled target is
    its target probability; the raw-unit target is recovered through the
    target feature's training bounds.
    """
    matrix, dates = compute_features(records, feature_spec)
    n_windows = len(matrix) - seq_len
    if n_windows < 2:
        raise ValueError(f"dataset too small: only {max(n_windows, 0)} windows")
    n_train = math.ceil((1.0 - test_ratio) * n_windows)
    fit_rows = n_train + seq_len  # rows any training window or target touches
    scaler = fit_scaler(matrix[:fit_rows])
    scaled = apply_scaler(scaler, matrix)
    scaled = augment_amplitude_feature(scaled, preprocessing, n_train_rows=fit_rows)
    samples = windowize(scaled, seq_len, target_index, dates=dates)
    lo, hi = scaler.bounds(target_index)
    for s in samples:
        s.target = lo + s.target_probability * (hi - lo)
    train_samples, test_samples = split(samples, test_ratio)
    return PreparedData(
        train=train_samples,
        test=test_samples,
        target_bounds=(lo, hi),
        n_features=scaled.shape[1],
        train_rows=scaled[:fit_rows],
    )


def encoding_input_rows(prepared: PreparedData, n_qubits: int) -> np.ndarray:
    """Training rows as the unit vectors the amplitude-family encoders see."""
    return np.array([amplitude_register_vector(row, n_qubits) for row in prepared.train_rows])


def fit_encoder_model(prepared: PreparedData, n_qubits: int, layers: int | None,
                      k: int | None, seed: int, steps: int, lr: float,
                      restarts: int) -> EnqodeModel:
    rows = encoding_input_rows(prepared, n_qubits)
    return fit_enqode(rows, layers=layers, k=k, seed=seed, steps=steps, lr=lr,
                      restarts=restarts)


# ---------------------------------------------------------------------------
# seeded training runs
# ---------------------------------------------------------------------------


@dataclass
class SeedRun:
    seed: int
    curve: list[float]
    train_mse: float
    test_mse: float
    return_space_mse: float
    wall_seconds: float
    params: np.ndarray


@dataclass
class RunResult:
    seed_runs: list[SeedRun]
    parameter_count: int
    mean_test_mse: float
    enqode_fidelity: float | None = None


def run_seeded_training(model_factory, prepared: PreparedData, tcfg: TrainConfig) -> RunResult:
    def one(seed: int) -> SeedRun:
        started = time.perf_counter()
        trained, curve = train(model_factory(), prepared.train, tcfg, seed)
        train_eval = evaluate(trained, prepared.train, shots=tcfg.shots,
                              seed=seed + 1_000_003, noise=tcfg.noise)
        test_eval = evaluate(trained, prepared.test, shots=tcfg.shots,
                             seed=seed + 2_000_003, noise=tcfg.noise)
        return SeedRun(
            seed=seed,
            curve=curve,
            train_mse=train_eval.mse,
            test_mse=test_eval.mse,
            return_space_mse=test_eval.return_space_mse,
            wall_seconds=time.perf_counter() - started,
            params=trained.params,
        )

    runs = _parallel_map(one, list(tcfg.seeds))
    return RunResult(
        seed_runs=runs,
        parameter_count=model_factory().param_count,
        mean_test_mse=float(np.mean([r.test_mse for r in runs])),
    )


# ---------------------------------------------------------------------------
# model construction from experiment settings
# ---------------------------------------------------------------------------


def build_qrnn_config(model_cfg: dict, n_features: int, target_index: int) -> QrnnConfig:
    encoding = Encoding(model_cfg["encoding"])
    return QrnnConfig(
        n_hidden=model_cfg["n_hidden"],
        n_feature=feature_qubits(encoding, n_features),
        encoding=encoding,
        structure=Structure(model_cfg["structure"]),
        ansatz_reps=model_cfg["ansatz_reps"],
        entanglement=Entanglement(model_cfg["entanglement"]),
        target_feature_index=target_index,
    )


def make_model_factory(settings, prepared: PreparedData,
                       enqode_model: EnqodeModel | None = None):
    """Callable producing a fresh untrained model per seed run."""
    model_cfg = settings["model"]
    if model_cfg["kind"] == "classical":
        return lambda: ClassicalRnn(
            n_hidden=model_cfg["n_hidden"],
            n_features=prepared.n_features,
            target_bounds=prepared.target_bounds,
        )
    config = build_qrnn_config(model_cfg, prepared.n_features,
                               settings["target_feature_index"])
    refine = settings["enqode"]["refine"]
    return lambda: make_qrnn_model(config, target_bounds=prepared.target_bounds,
                                   enqode_model=enqode_model, refine=refine)


def load_records(settings) -> list:
    dataset = settings["dataset"]
    if dataset["kind"] == "csv":
        extra = FEATURE_SPECS[settings["features"]]["extra_columns"]
        return load_csv(dataset["path"], extra_columns=extra)
    return synthetic(
        seed=dataset["seed"],
        n_days=dataset["n_days"],
        spec=settings["features"],
        drift=dataset["drift"],
        volatility=dataset["volatility"],
    )


def prepare_from_settings(settings, preprocessing: ScaleMode | None = "unset") -> PreparedData:
    if preprocessing == "unset":
        preprocessing = parse_preprocessing(settings["preprocessing"])
    return prepare_dataset(
        load_records(settings),
        feature_spec=settings["features"],
        seq_len=settings["sequence_length"],
        test_ratio=settings["test_ratio"],
        target_index=settings["target_feature_index"],
        preprocessing=preprocessing,
    )


def parse_preprocessing(name: str) -> ScaleMode | None:
    if name == "none":
        return None
    return ScaleMode(name)


def train_config_from(settings, shots=None, noise=None, force=False) -> TrainConfig:
    t = settings["training"]
    return TrainConfig(
        learning_rate=t["learning_rate"],
        spsa_step=t["spsa_step"],
        epochs=t["epochs"],
        shots=shots if force else t["shots"],
        seeds=tuple(t["seeds"]),
        noise=noise,
    )


def maybe_fit_enqode(settings, prepared: PreparedData) -> EnqodeModel | None:
    model_cfg = settings["model"]
    if model_cfg["kind"] != "qrnn" or Encoding(model_cfg["encoding"]) is not Encoding.ENQODE:
        return None
    return fit_enqode_from_settings(settings, prepared)


def fit_enqode_from_settings(settings, prepared: PreparedData) -> EnqodeModel:
    e = settings["enqode"]
    n_qubits = feature_qubits(Encoding.ENQODE, prepared.n_features)
    if e.get("model_path"):
        model = load_model(e["model_path"])
        if model.ansatz.n_qubits != n_qubits:
            raise ValueError(
                f"stored encoder has {model.ansatz.n_qubits} qubits, dataset needs {n_qubits}"
            )
        return model
    return fit_encoder_model(prepared, n_qubits, layers=e["layers"], k=e["k"],
                             seed=e["seed"], steps=e["steps"], lr=e["lr"],
                             restarts=e["restarts"])


# ---------------------------------------------------------------------------
# the four experiments
# ---------------------------------------------------------------------------


def run_train_experiment(settings) -> tuple[RunResult, PreparedData, EnqodeModel | None]:
    prepared = prepare_from_settings(settings)
    enqode_model = maybe_fit_enqode(settings, prepared)
    factory = make_model_factory(settings, prepared, enqode_model)
    noise = parse_noise(settings["noise"])
    tcfg = train_config_from(settings, noise=noise,
                             shots=settings["training"]["shots"], force=True)
    result = run_seeded_training(factory, prepared, tcfg)
    if enqode_model is not None:
        rows = encoding_input_rows(prepared, enqode_model.ansatz.n_qubits)
        result.enqode_fidelity = mean_fidelity(enqode_model, rows,
                                               refine=settings["enqode"]["refine"])
    return result, prepared, enqode_model


def parse_noise(noise_cfg) -> NoiseSpec | None:
    if noise_cfg is None:
        return None
    return NoiseSpec(p1=noise_cfg["p1"], p2=noise_cfg["p2"])


def run_preprocessing_ablation(settings) -> list[dict]:
    """Mean test MSE for the no-feature / MinMax / MaxMin amplitude-feature
    variants under identical seeds, with ratios against the plain variant."""
    rows = []
    results = {}
    for name in ("none", "minmax", "maxmin"):
        prepared = prepare_from_settings(settings, preprocessing=parse_preprocessing(name))
        enqode_model = maybe_fit_enqode(settings, prepared)
        factory = make_model_factory(settings, prepared, enqode_model)
        tcfg = train_config_from(settings, noise=parse_noise(settings["noise"]),
                                 shots=settings["training"]["shots"], force=True)
        results[name] = (run_seeded_training(factory, prepared, tcfg), prepared)
    base = results["none"][0].mean_test_mse
    for name in ("none", "minmax", "maxmin"):
        result, _ = results[name]
        rows.append({
            "preprocessing": name,
            "mean_mse": result.mean_test_mse,
            "mse_ratio": result.mean_test_mse / base if base > 0 else float("nan"),
            "curves": [r.curve for r in result.seed_runs],
        })
    return rows


def run_encoding_comparison(settings) -> list[dict]:
    """Exact-QSP vs approximate encoding, noiseless and under the configured
    depolarizing channel; ratios against the noiseless exact row."""
    prepared = prepare_from_settings(settings)
    noise = parse_noise(settings["noise"])
    if noise is None:
        noise = NoiseSpec(p1=0.001, p2=0.01)
    enqode_model = fit_enqode_from_settings(settings, prepared)
    enq_rows = encoding_input_rows(prepared, enqode_model.ansatz.n_qubits)
    enq_fid = mean_fidelity(enqode_model, enq_rows, refine=settings["enqode"]["refine"])
    noisy_shots = settings["training"]["shots"] or 1024

    rows = []
    for encoding_name, enq in (("amplitude", None), ("enqode", enqode_model)):
        for noise_name, noise_spec, shots in (("none", None, settings["training"]["shots"]),
                                              ("depolarizing", noise, noisy_shots)):
            variant = dict(settings, model=dict(settings["model"], encoding=encoding_name))
            factory = make_model_factory(variant, prepared, enq)
            tcfg = train_config_from(settings, shots=shots, noise=noise_spec, force=True)
            result = run_seeded_training(factory, prepared, tcfg)
            rows.append({
                "feature_map": encoding_name,
                "noise": noise_name,
                "mean_mse": result.mean_test_mse,
                "enqode_mean_fidelity": enq_fid if encoding_name == "enqode" else "",
                "curves": [r.curve for r in result.seed_runs],
            })
    base = rows[0]["mean_mse"]
    for row in rows:
        row["mse_ratio"] = row["mean_mse"] / base if base > 0 else float("nan")
    return rows


def stacked_feature_rows(seed: int, n_rows: int, dim: int) -> np.ndarray:
    """Unit rows of power-of-two dimension from the synthetic market pipeline.

    dim <= 4 trims one augmented yahoo3 row; larger dims stack consecutive
    augmented oxford7 rows (multi-day feature blocks), trimmed to dim, before
    normalizing.
    """
    if dim <= 4:
        spec, block = "yahoo3", 1
    else:
        spec, block = "oxford7", max(1, math.ceil(dim / 8))
    records = synthetic(seed=seed, n_days=n_rows + block + 8, spec=spec)
    matrix, _ = compute_features(records, spec)
    scaler = fit_scaler(matrix)
    scaled = apply_scaler(scaler, matrix)
    scaled = augment_amplitude_feature(scaled, ScaleMode.MAXMIN)
    stacked = np.array([
        scaled[i:i + block].reshape(-1)[:dim] for i in range(n_rows)
    ])
    return np.array([amplitude_register_vector(row, int(math.log2(dim))) for row in stacked])


def run_depth_experiment(settings) -> tuple[list[dict], list[dict]]:
    """Depth-scaling rows plus the encoder fidelity-vs-qubits table."""
    d = settings["depth_scan"]
    coupling = CouplingMap(Topology(d["coupling"]))
    depth_rows = depth_scan(
        n_f_values=tuple(d["n_f"]),
        t_steps=d["t_steps"],
        coupling=coupling,
        seed=d["seed"],
        n_hidden=d["n_hidden"],
        ansatz_reps=d["ansatz_reps"],
    )
    e = settings["enqode"]
    fidelity_rows = []
    for n_f in d["n_f"]:
        rows = stacked_feature_rows(seed=d["seed"], n_rows=d["fidelity_rows"], dim=1 << n_f)
        layers = e["layers"] if e["layers"] is not None else n_f
        model = fit_enqode(rows, layers=layers, k=e["k"], seed=e["seed"],
                           steps=e["steps"], lr=e["lr"], restarts=e["restarts"])
        fidelity_rows.append({
            "qubits": n_f,
            "features": 1 << n_f,
            "layers": layers,
            "mean_fidelity": mean_fidelity(model, rows, refine=e["refine"]),
        })
    return depth_rows, fidelity_rows
