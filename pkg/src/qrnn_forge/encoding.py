"""Classical preprocessing and circuit-level feature maps.

Preprocessing: per-feature min-max scaling (plus the reflected max-min
variant), optional augmentation of each row with its pre-normalization
Euclidean norm, and l2 normalization.

Feature maps: angle encoding (one RY per feature) and exact amplitude
encoding via uniformly controlled RY rotations with a Gray-code CX
expansion.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .simulator import Circuit, cx, ry


class ScaleMode(Enum):
    MINMAX = "minmax"
    MAXMIN = "maxmin"


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature minima and maxima, fitted on training rows only."""

    mins: np.ndarray
    maxs: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.mins)

    def bounds(self, feature: int) -> tuple[float, float]:
        return float(self.mins[feature]), float(self.maxs[feature])


def fit_scaler(training: np.ndarray) -> MinMaxScaler:
    """Column-wise bounds of the training matrix; constant columns are rejected."""
    data = np.atleast_2d(np.asarray(training, dtype=float))
    if data.size == 0:
        raise ValueError("cannot fit a scaler on an empty matrix")
    mins = data.min(axis=0)
    maxs = data.max(axis=0)
    for i, (lo, hi) in enumerate(zip(mins, maxs)):
        if hi == lo:
            raise ValueError(f"feature {i} is constant (min == max == {lo}); cannot scale")
    return MinMaxScaler(mins, maxs)


def apply_scaler(scaler: MinMaxScaler, data: np.ndarray, mode: ScaleMode = ScaleMode.MINMAX) -> np.ndarray:
    """(x - min)/(max - min) per feature; MAXMIN is the reflection 1 - that."""
    arr = np.asarray(data, dtype=float)
    scaled = (arr - scaler.mins) / (scaler.maxs - scaler.mins)
    if mode is ScaleMode.MAXMIN:
        scaled = 1.0 - scaled
    return scaled


def invert_scaler(scaler: MinMaxScaler, scaled: np.ndarray, mode: ScaleMode = ScaleMode.MINMAX) -> np.ndarray:
    arr = np.asarray(scaled, dtype=float)
    if mode is ScaleMode.MAXMIN:
        arr = 1.0 - arr
    return scaler.mins + arr * (scaler.maxs - scaler.mins)


def augment_amplitude_feature(scaled: np.ndarray, mode: ScaleMode | None,
                              n_train_rows: int | None = None) -> np.ndarray:
    """Append each row's pre-normalization l2 norm as an extra feature.

    The appended column is itself scaled with `mode`, fitted on the first
    n_train_rows rows (all rows when None). mode None returns the input
    unchanged. Original feature order is preserved.
    """
    if mode is None:
        return scaled
    matrix = np.atleast_2d(np.asarray(scaled, dtype=float))
    if matrix.size == 0:
        raise ValueError("cannot augment an empty matrix")
    norms = np.linalg.norm(matrix, axis=1)
    fit_rows = norms if n_train_rows is None else norms[:n_train_rows]
    column_scaler = fit_scaler(fit_rows.reshape(-1, 1))
    column = apply_scaler(column_scaler, norms.reshape(-1, 1), mode)
    return np.hstack([matrix, column])


def normalize_l2(x: np.ndarray) -> np.ndarray:
    vec = np.asarray(x, dtype=float)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ValueError("cannot normalize the all-zero vector")
    return vec / norm


# ---------------------------------------------------------------------------
# feature-map circuits
# ---------------------------------------------------------------------------


def angle_feature_map(scaled_vector: np.ndarray) -> Circuit:
    """One RY(x_i) per feature on qubit i: product of cos(x/2)|0> + sin(x/2)|1>.

    Values outside [0, 1] are allowed (test data may exceed the training
    range) but trigger a warning.
    """
    vec = np.asarray(scaled_vector, dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError("angle encoding expects a non-empty 1-d vector")
    if np.any((vec < 0.0) | (vec > 1.0)):
        warnings.warn("angle feature map input outside [0, 1]; encoding anyway", stacklevel=2)
    gates = [ry(i, float(v)) for i, v in enumerate(vec)]
    return Circuit(len(vec), gates, list(range(len(vec))))


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def _multiplexed_ry(angles: np.ndarray, target: int, controls: list[int]) -> list:
    """Uniformly controlled RY: RY(angles[m]) for control pattern m.

    Bit b of the pattern index m lives on controls[b]. Expanded into 2^k RY
    gates interleaved with 2^k CX gates following the Gray-code walk.
    """
    k = len(controls)
    if k == 0:
        return [ry(target, float(angles[0]))]
    dim = 1 << k
    m = np.empty((dim, dim))
    for i in range(dim):
        g = _gray(i)
        for j in range(dim):
            m[i, j] = (-1) ** bin(j & g).count("1")
    thetas = (m @ angles) / dim
    gates = []
    for i in range(dim):
        gates.append(ry(target, float(thetas[i])))
        change_bit = k - 1 if i == dim - 1 else (i + 1 & -(i + 1)).bit_length() - 1
        gates.append(cx(controls[change_bit], target))
    return gates


def amplitude_qsp(x: np.ndarray) -> Circuit:
    """State-preparation circuit for a non-negative unit vector.

    Binary-tree angles: a node with left-subtree mass L and right-subtree
    mass R rotates by 2*atan2(sqrt(R), sqrt(L)). Dimensions that are not a
    power of two are zero-padded at the top (data occupies the first basis
    states).
    """
    vec = np.asarray(x, dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError("amplitude encoding expects a non-empty 1-d vector")
    if np.any(vec < 0.0):
        raise ValueError("amplitude encoding requires non-negative components")
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"amplitude encoding requires a unit vector (norm {norm})")
    n_qubits = max(1, math.ceil(math.log2(len(vec))))
    dim = 1 << n_qubits
    if len(vec) < dim:
        vec = np.concatenate([vec, np.zeros(dim - len(vec))])
    probs = vec**2
    gates = []
    for level in range(n_qubits):
        blocks = probs.reshape(1 << level, -1)
        half = blocks.shape[1] // 2
        left = blocks[:, :half].sum(axis=1)
        right = blocks[:, half:].sum(axis=1)
        angles = 2.0 * np.arctan2(np.sqrt(right), np.sqrt(left))
        target = n_qubits - 1 - level
        controls = list(range(target + 1, n_qubits))
        gates.extend(_multiplexed_ry(angles, target, controls))
    return Circuit(n_qubits, gates, list(range(n_qubits)))
