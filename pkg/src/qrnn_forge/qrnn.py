"""Recurrent quantum circuit builders and prediction extraction.

Register layout (qubit 0 = LSB):
  canonical:   [F: 0..n_feature-1][H: n_feature..n_feature+n_hidden-1]
  alternating: [Fa: 0..n_feature-1][Fb: n_feature..2*n_feature-1][H: above]

Each time step encodes one feature vector into an F register and applies a
shared efficient-SU2-style ansatz over H plus that register; consumed F
registers are reset. The final step's F register is measured, and the
outcome probability maps linearly back to data units.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .encoding import amplitude_qsp, angle_feature_map, normalize_l2
from .enqode import EnqodeModel, encode_sample
from .simulator import (
    Circuit,
    Gate,
    NoiseSpec,
    counts_to_distribution,
    cx,
    reset,
    run_exact,
    ry,
    rz,
    sample,
)
from .training import probability_to_value


class Encoding(Enum):
    ANGLE = "angle"
    AMPLITUDE = "amplitude"
    ENQODE = "enqode"


class Structure(Enum):
    CANONICAL = "canonical"
    ALTERNATING = "alternating"


class Entanglement(Enum):
    LINEAR = "linear"
    FULL = "full"
    NONE = "none"  # no entangling blocks; zero parameters give the identity


def feature_qubits(encoding: Encoding, n_features: int) -> int:
    """Qubits needed by a feature map: one per feature for angle encoding,
    ceil(log2) for the amplitude family."""
    if n_features < 1:
        raise ValueError("need at least one feature")
    if encoding is Encoding.ANGLE:
        return n_features
    return max(1, math.ceil(math.log2(n_features)))


@dataclass(frozen=True)
class QrnnConfig:
    n_hidden: int
    n_feature: int
    encoding: Encoding
    structure: Structure = Structure.CANONICAL
    ansatz_reps: int = 1
    entanglement: Entanglement = Entanglement.FULL
    target_feature_index: int = 0

    def __post_init__(self):
        if self.n_hidden < 1:
            raise ValueError("n_hidden must be >= 1")
        if self.n_feature < 1:
            raise ValueError("n_feature must be >= 1")
        if self.ansatz_reps < 1:
            raise ValueError("ansatz_reps must be >= 1")
        limit = self.n_feature if self.encoding is Encoding.ANGLE else 1 << self.n_feature
        if not 0 <= self.target_feature_index < limit:
            raise ValueError(
                f"target_feature_index {self.target_feature_index} out of range "
                f"(< {limit} for {self.encoding.value} encoding)"
            )

    @property
    def width(self) -> int:
        doubled = 2 if self.structure is Structure.ALTERNATING else 1
        return self.n_hidden + doubled * self.n_feature

    @property
    def ansatz_qubits(self) -> int:
        return self.n_hidden + self.n_feature


def param_count(config: QrnnConfig) -> int:
    """2 * (n_hidden + n_feature) * (reps + 1): the ansatz spans H plus one F
    register in both circuit structures."""
    return 2 * config.ansatz_qubits * (config.ansatz_reps + 1)


def build_ansatz(n_qubits: int, reps: int, entanglement: Entanglement,
                 params: np.ndarray, qubit_map: list[int] | None = None) -> list[Gate]:
    """Efficient-SU2-style block: (reps+1) RY+RZ rotation layers with an
    entangling CX block between consecutive layers.

    Parameters are consumed layer-major, qubit-minor: layer l takes
    params[l*2n : l*2n+n] for RY and the next n for RZ. qubit_map relocates
    logical ansatz qubits onto physical circuit qubits.
    """
    if n_qubits < 2:
        raise ValueError("ansatz needs at least 2 qubits")
    params = np.asarray(params, dtype=float)
    expected = 2 * n_qubits * (reps + 1)
    if params.shape != (expected,):
        raise ValueError(f"expected {expected} ansatz parameters, got {params.shape}")
    qmap = list(range(n_qubits)) if qubit_map is None else qubit_map
    gates: list[Gate] = []
    for layer in range(reps + 1):
        base = layer * 2 * n_qubits
        gates += [ry(qmap[q], params[base + q]) for q in range(n_qubits)]
        gates += [rz(qmap[q], params[base + n_qubits + q]) for q in range(n_qubits)]
        if layer == reps:
            break
        if entanglement is Entanglement.LINEAR:
            gates += [cx(qmap[q], qmap[q + 1]) for q in range(n_qubits - 1)]
        elif entanglement is Entanglement.FULL:
            gates += [cx(qmap[p], qmap[q]) for p in range(n_qubits) for q in range(p + 1, n_qubits)]
    return gates


# ---------------------------------------------------------------------------
# encoders: feature vector -> circuit on n_feature qubits
# ---------------------------------------------------------------------------


def amplitude_register_vector(x: np.ndarray, n_qubits: int) -> np.ndarray:
    """Scaled features -> padded non-negative unit vector for the QSP family.

    Test rows scaled with training bounds can dip below zero; those components
    are clamped to zero (amplitudes cannot be negative) with a warning.
    """
    vec = np.asarray(x, dtype=float)
    dim = 1 << n_qubits
    if len(vec) > dim:
        raise ValueError(f"{len(vec)} features do not fit in {n_qubits} feature qubits")
    if np.any(vec < 0.0):
        warnings.warn("negative scaled feature clamped to 0 for amplitude encoding", stacklevel=3)
        vec = np.maximum(vec, 0.0)
    padded = np.zeros(dim)
    padded[: len(vec)] = vec
    if not padded.any():
        # a row entirely below the training range clamps to zero; encode the
        # ground state rather than failing mid-evaluation
        warnings.warn("all-zero scaled feature row encoded as the ground state", stacklevel=3)
        padded[0] = 1.0
        return padded
    return normalize_l2(padded)


def make_encoder(config: QrnnConfig, enqode_model: EnqodeModel | None = None,
                 refine: bool = True):
    """Feature-map factory matching config.encoding."""
    if config.encoding is Encoding.ANGLE:
        def encode(x):
            x = np.asarray(x, dtype=float)
            if len(x) != config.n_feature:
                raise ValueError(f"angle encoding expects {config.n_feature} features, got {len(x)}")
            return angle_feature_map(x)
        return encode
    if config.encoding is Encoding.AMPLITUDE:
        return lambda x: amplitude_qsp(amplitude_register_vector(x, config.n_feature))
    if enqode_model is None:
        raise ValueError("enqode encoding requires a fitted EnqodeModel")
    if enqode_model.ansatz.n_qubits != config.n_feature:
        raise ValueError(
            f"enqode model has {enqode_model.ansatz.n_qubits} qubits, config wants {config.n_feature}"
        )
    return lambda x: encode_sample(enqode_model, amplitude_register_vector(x, config.n_feature), refine=refine)[0]


def _remap(gates: list[Gate], offset: int) -> list[Gate]:
    if offset == 0:
        return list(gates)
    return [Gate(g.kind, tuple(q + offset for q in g.qubits), g.angle) for g in gates]


# ---------------------------------------------------------------------------
# circuit builders
# ---------------------------------------------------------------------------


def build_canonical(model: "QrnnModel", sequence, encoder=None) -> Circuit:
    """One F register, re-encoded and reset between steps (no reset after the
    final step); the shared ansatz acts on F+H every step."""
    cfg, params = model.config, model.params
    encoder = encoder or model.encoder
    sequence = np.atleast_2d(np.asarray(sequence, dtype=float))
    if len(sequence) < 1:
        raise ValueError("sequence must contain at least one time step")
    n_f, n_h = cfg.n_feature, cfg.n_hidden
    gates: list[Gate] = []
    for t, x_t in enumerate(sequence):
        gates += _remap(encoder(x_t).gates, 0)
        gates += build_ansatz(n_f + n_h, cfg.ansatz_reps, cfg.entanglement, params)
        if t < len(sequence) - 1:
            gates += [reset(q) for q in range(n_f)]
    return Circuit(n_f + n_h, gates, list(range(n_f)))


def build_alternating(model: "QrnnModel", sequence, encoder=None) -> Circuit:
    """Two F registers used on alternating steps so the next step's feature
    map overlaps with the current ansatz; consumed registers are reset one
    step later. Distribution-identical to the canonical layout."""
    cfg, params = model.config, model.params
    encoder = encoder or model.encoder
    sequence = np.atleast_2d(np.asarray(sequence, dtype=float))
    if len(sequence) < 1:
        raise ValueError("sequence must contain at least one time step")
    n_f, n_h = cfg.n_feature, cfg.n_hidden
    t_steps = len(sequence)

    def register(t: int) -> int:  # base qubit of the register active at step t
        return 0 if t % 2 == 0 else n_f

    gates: list[Gate] = list(_remap(encoder(sequence[0]).gates, register(0)))
    for t in range(t_steps):
        if t >= 1:
            gates += [reset(register(t - 1) + q) for q in range(n_f)]
        if t + 1 < t_steps:
            gates += _remap(encoder(sequence[t + 1]).gates, register(t + 1))
        ansatz_map = list(range(register(t), register(t) + n_f)) + list(range(2 * n_f, 2 * n_f + n_h))
        gates += build_ansatz(n_f + n_h, cfg.ansatz_reps, cfg.entanglement, params, ansatz_map)
    final = register(t_steps - 1)
    return Circuit(2 * n_f + n_h, gates, list(range(final, final + n_f)))


def build_circuit(model: "QrnnModel", sequence, encoder=None) -> Circuit:
    if model.config.structure is Structure.ALTERNATING:
        return build_alternating(model, sequence, encoder)
    return build_canonical(model, sequence, encoder)


# ---------------------------------------------------------------------------
# model + prediction
# ---------------------------------------------------------------------------


@dataclass
class QrnnModel:
    """Architecture + trained parameters + the target feature's data bounds."""

    config: QrnnConfig
    target_bounds: tuple[float, float] = (0.0, 1.0)
    params: np.ndarray | None = None
    encoder: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.params is not None:
            self.params = np.asarray(self.params, dtype=float)
            if self.params.shape != (param_count(self.config),):
                raise ValueError(
                    f"expected {param_count(self.config)} parameters, got {self.params.shape}"
                )

    @property
    def param_count(self) -> int:
        return param_count(self.config)

    def replace_params(self, params: np.ndarray) -> "QrnnModel":
        return replace(self, params=np.asarray(params, dtype=float))

    def predict_probability(self, inputs, shots: int | None = None,
                            seed: int | None = None,
                            noise: NoiseSpec | None = None) -> float:
        circuit = build_circuit(self, inputs)
        if shots is None:
            probs = run_exact(circuit)
        else:
            counts = sample(circuit, shots, seed=0 if seed is None else seed, noise=noise)
            probs = counts_to_distribution(counts, len(circuit.measured_qubits))
        return extract_probability(self.config, probs)

    def predict(self, inputs, shots: int | None = None, seed: int | None = None,
                noise: NoiseSpec | None = None) -> tuple[float, float]:
        """(measured probability, predicted value in data units)."""
        p = self.predict_probability(inputs, shots=shots, seed=seed, noise=noise)
        return p, probability_to_value(p, *self.target_bounds)


def extract_probability(config: QrnnConfig, probs: np.ndarray) -> float:
    """Angle encoding reads the marginal |1> probability of the target qubit;
    the amplitude family reads the joint F-register outcome |i>."""
    i = config.target_feature_index
    if config.encoding is Encoding.ANGLE:
        outcomes = np.arange(len(probs))
        return float(probs[(outcomes >> i) & 1 == 1].sum())
    return float(probs[i])


def make_qrnn_model(config: QrnnConfig, target_bounds: tuple[float, float] = (0.0, 1.0),
                    enqode_model: EnqodeModel | None = None, params=None,
                    refine: bool = True) -> QrnnModel:
    return QrnnModel(
        config=config,
        target_bounds=target_bounds,
        params=params,
        encoder=make_encoder(config, enqode_model=enqode_model, refine=refine),
    )


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def checkpoint_to_json(model: QrnnModel, seed: int | None = None) -> str:
    return json.dumps({
        "schema_version": 1,
        "config": {
            "n_hidden": model.config.n_hidden,
            "n_feature": model.config.n_feature,
            "encoding": model.config.encoding.value,
            "structure": model.config.structure.value,
            "ansatz_reps": model.config.ansatz_reps,
            "entanglement": model.config.entanglement.value,
            "target_feature_index": model.config.target_feature_index,
        },
        "params": None if model.params is None else model.params.tolist(),
        "target_bounds": list(model.target_bounds),
        "seed": seed,
    }, indent=2)


def checkpoint_from_json(text: str, enqode_model: EnqodeModel | None = None) -> QrnnModel:
    doc = json.loads(text)
    cfg = doc["config"]
    config = QrnnConfig(
        n_hidden=cfg["n_hidden"],
        n_feature=cfg["n_feature"],
        encoding=Encoding(cfg["encoding"]),
        structure=Structure(cfg["structure"]),
        ansatz_reps=cfg["ansatz_reps"],
        entanglement=Entanglement(cfg["entanglement"]),
        target_feature_index=cfg["target_feature_index"],
    )
    params = None if doc["params"] is None else np.array(doc["params"], dtype=float)
    if config.encoding is Encoding.ENQODE and enqode_model is None:
        raise ValueError("loading an enqode checkpoint requires the fitted EnqodeModel")
    return make_qrnn_model(config, tuple(doc["target_bounds"]), enqode_model=enqode_model,
                           params=params)


def save_checkpoint(model: QrnnModel, path: str | Path, seed: int | None = None) -> None:
    Path(path).write_text(checkpoint_to_json(model, seed))


def load_checkpoint(path: str | Path, enqode_model: EnqodeModel | None = None) -> QrnnModel:
    return checkpoint_from_json(Path(path).read_text(), enqode_model)
