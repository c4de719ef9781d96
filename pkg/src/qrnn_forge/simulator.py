"""Exact statevector simulation of gate circuits with mid-circuit resets.

Two execution modes:
  - run_exact(): noiseless probabilities. Resets are handled by fresh-qubit
    purification (the reset wire is retired and a fresh |0> wire takes its
    place), so a single pure-state kernel covers the whole circuit.
  - sample(): per-shot trajectories (reset = measure + conditional X) with an
    optional per-gate depolarizing channel. Deterministic per seed.

Qubit ordering convention, used everywhere in this package: qubit 0 is the
least-significant bit of the basis-state index, so basis state |i> assigns
bit (i >> q) & 1 to qubit q. Count keys are bitstrings with measured_qubits[0]
as the rightmost character.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DEFAULT_MAX_WIDTH = 24  # purified-width cap for run_exact
_SHOT_CHUNK = 4096  # trajectory batch size; fixed so sampling is reproducible
_PROB_FLOOR = 1e-15  # probabilities below this are clamped to 0


class GateKind(Enum):
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    X = "x"
    Y = "y"
    SX = "sx"
    H = "h"
    CX = "cx"
    CY = "cy"
    CZ = "cz"
    RESET = "reset"


ROTATION_KINDS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ})
TWO_QUBIT_KINDS = frozenset({GateKind.CX, GateKind.CY, GateKind.CZ})


@dataclass(frozen=True)
class Gate:
    """One circuit operation: kind, qubit indices (control first), angle."""

    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        expected = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(self.qubits) != expected:
            raise ValueError(f"{self.kind.value} needs {expected} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"duplicate qubit indices in {self.kind.value}: {self.qubits}")
        if self.kind in ROTATION_KINDS:
            if self.angle is None:
                raise ValueError(f"{self.kind.value} requires an angle")
        elif self.angle is not None:
            raise ValueError(f"{self.kind.value} takes no angle")


def rx(q: int, angle: float) -> Gate:
    return Gate(GateKind.RX, (q,), float(angle))


def ry(q: int, angle: float) -> Gate:
    return Gate(GateKind.RY, (q,), float(angle))


def rz(q: int, angle: float) -> Gate:
    return Gate(GateKind.RZ, (q,), float(angle))


def x(q: int) -> Gate:
    return Gate(GateKind.X, (q,))


def y(q: int) -> Gate:
    return Gate(GateKind.Y, (q,))


def sx(q: int) -> Gate:
    return Gate(GateKind.SX, (q,))


def h(q: int) -> Gate:
    return Gate(GateKind.H, (q,))


def cx(control: int, target: int) -> Gate:
    return Gate(GateKind.CX, (control, target))


def cy(control: int, target: int) -> Gate:
    return Gate(GateKind.CY, (control, target))


def cz(control: int, target: int) -> Gate:
    return Gate(GateKind.CZ, (control, target))


def reset(q: int) -> Gate:
    return Gate(GateKind.RESET, (q,))


@dataclass
class Circuit:
    """Ordered gate list over n_qubits, plus the qubits read out at the end.

    Immutable after build by convention; builders assemble the gate list and
    hand it over.
    """

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    measured_qubits: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"qubit index {q} out of range for width {self.n_qubits}")
        for q in self.measured_qubits:
            if not 0 <= q < self.n_qubits:
                raise ValueError(f"measured qubit {q} out of range for width {self.n_qubits}")
        if len(set(self.measured_qubits)) != len(self.measured_qubits):
            raise ValueError("duplicate measured qubits")

    @property
    def n_resets(self) -> int:
        return sum(1 for g in self.gates if g.kind is GateKind.RESET)


@dataclass
class StateVector:
    """Complex amplitudes over 2**n_qubits basis states (qubit 0 = LSB)."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def zero_state(n_qubits: int) -> StateVector:
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


@dataclass(frozen=True)
class NoiseSpec:
    """Depolarizing error probabilities per 1-qubit (p1) and 2-qubit (p2) gate."""

    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.p1 <= 1.0 and 0.0 <= self.p2 <= 1.0):
            raise ValueError(f"noise probabilities must lie in [0, 1]: p1={self.p1}, p2={self.p2}")


# ---------------------------------------------------------------------------
# gate matrices and kernels
# ---------------------------------------------------------------------------

_SQ2 = 1.0 / math.sqrt(2.0)
_FIXED_1Q = {
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    GateKind.H: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    GateKind.SX: 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
}
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _rotation_matrix(kind: GateKind, angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    if kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)  # RZ


def gate_matrix_1q(gate: Gate) -> np.ndarray:
    if gate.kind in _FIXED_1Q:
        return _FIXED_1Q[gate.kind]
    return _rotation_matrix(gate.kind, gate.angle)


def _apply_1q(amps: np.ndarray, m: np.ndarray, q: int) -> np.ndarray:
    """Apply a 2x2 matrix on qubit q. Works for flat or (batch, dim) arrays."""
    a = amps.reshape(-1, 2, 1 << q)
    out = np.empty_like(a)
    out[:, 0, :] = m[0, 0] * a[:, 0, :] + m[0, 1] * a[:, 1, :]
    out[:, 1, :] = m[1, 0] * a[:, 0, :] + m[1, 1] * a[:, 1, :]
    return out.reshape(amps.shape)


def _view_2q(amps: np.ndarray, q_hi: int, q_lo: int) -> np.ndarray:
    # axes: (outer, hi-bit, mid, lo-bit, inner); batch dims fold into outer
    mid = 1 << (q_hi - q_lo - 1)
    return amps.reshape(-1, 2, mid, 2, 1 << q_lo)


def _apply_2q(amps: np.ndarray, kind: GateKind, control: int, target: int) -> np.ndarray:
    out = amps.copy()
    hi, lo = max(control, target), min(control, target)
    v = _view_2q(out, hi, lo)
    c_ax_hi = control > target  # control sits on the hi-bit axis?
    if kind is GateKind.CZ:
        v[:, 1, :, 1, :] *= -1.0
        return out
    if c_ax_hi:
        t0 = v[:, 1, :, 0, :].copy()
        t1 = v[:, 1, :, 1, :].copy()
    else:
        t0 = v[:, 0, :, 1, :].copy()
        t1 = v[:, 1, :, 1, :].copy()
    if kind is GateKind.CX:
        n0, n1 = t1, t0
    else:  # CY
        n0, n1 = -1j * t1, 1j * t0
    if c_ax_hi:
        v[:, 1, :, 0, :] = n0
        v[:, 1, :, 1, :] = n1
    else:
        v[:, 0, :, 1, :] = n0
        v[:, 1, :, 1, :] = n1
    return out


def _apply_unitary(amps: np.ndarray, gate: Gate, wire_of: list[int] | None = None) -> np.ndarray:
    qs = gate.qubits if wire_of is None else tuple(wire_of[q] for q in gate.qubits)
    if gate.kind in TWO_QUBIT_KINDS:
        return _apply_2q(amps, gate.kind, qs[0], qs[1])
    return _apply_1q(amps, gate_matrix_1q(gate), qs[0])


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply one unitary gate and return the new state (input untouched)."""
    if gate.kind is GateKind.RESET:
        raise ValueError("apply_gate does not take RESET; use run_exact or sample")
    for q in gate.qubits:
        if not 0 <= q < state.n_qubits:
            raise ValueError(f"qubit index {q} out of range for {state.n_qubits}-qubit state")
    return StateVector(state.n_qubits, _apply_unitary(state.amplitudes, gate))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 between two pure states of equal width."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"state widths differ: {a.n_qubits} vs {b.n_qubits}")
    return float(np.abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


# ---------------------------------------------------------------------------
# exact execution
# ---------------------------------------------------------------------------


def _marginal(probs: np.ndarray, wires: list[int], width: int) -> np.ndarray:
    """Marginal distribution over `wires`; bit j of the outcome index is wires[j]."""
    p = probs.reshape((2,) * width)
    axes = [width - 1 - w for w in reversed(wires)]
    rest = [ax for ax in range(width) if ax not in axes]
    p = np.transpose(p, axes + rest)
    return p.reshape(1 << len(wires), -1).sum(axis=1)


def _clean_distribution(p: np.ndarray) -> np.ndarray:
    p = np.where(p < _PROB_FLOOR, 0.0, p)
    return p / p.sum()


def run_exact(circuit: Circuit, max_width: int = DEFAULT_MAX_WIDTH) -> np.ndarray:
    """Exact outcome probabilities over circuit.measured_qubits.

    Each RESET retires its wire and substitutes a fresh |0> wire for all
    subsequent gates, which reproduces the trace-out channel for any later
    measurement on other qubits. Purified width = n_qubits + number of resets.
    """
    if not circuit.measured_qubits:
        raise ValueError("circuit has no measured qubits")
    width_needed = circuit.n_qubits + circuit.n_resets
    if width_needed > max_width:
        raise ValueError(
            f"purified width {width_needed} exceeds maximum {max_width} "
            f"({circuit.n_qubits} qubits + {circuit.n_resets} resets)"
        )
    amps = np.zeros(1 << circuit.n_qubits, dtype=complex)
    amps[0] = 1.0
    wire_of = list(range(circuit.n_qubits))
    width = circuit.n_qubits
    for g in circuit.gates:
        if g.kind is GateKind.RESET:
            amps = np.concatenate([amps, np.zeros_like(amps)])  # fresh MSB wire in |0>
            wire_of[g.qubits[0]] = width
            width += 1
        else:
            amps = _apply_unitary(amps, g, wire_of)
    probs = np.abs(amps) ** 2
    marg = _marginal(probs, [wire_of[q] for q in circuit.measured_qubits], width)
    return _clean_distribution(marg)


def statevector(circuit: Circuit) -> StateVector:
    """Final pure state of a reset-free circuit."""
    amps = np.zeros(1 << circuit.n_qubits, dtype=complex)
    amps[0] = 1.0
    for g in circuit.gates:
        if g.kind is GateKind.RESET:
            raise ValueError("statevector() requires a reset-free circuit")
        amps = _apply_unitary(amps, g)
    return StateVector(circuit.n_qubits, amps)


# ---------------------------------------------------------------------------
# shot sampling (trajectories)
# ---------------------------------------------------------------------------


def _reset_rows(amps: np.ndarray, q: int, rng: np.random.Generator) -> None:
    """Per-shot measurement of qubit q followed by conditional X, in place."""
    n_rows = amps.shape[0]
    a = amps.reshape(n_rows, -1, 2, 1 << q)
    p1 = np.einsum("soi->s", np.abs(a[:, :, 1, :]) ** 2)
    got_one = rng.random(n_rows) < p1
    a[got_one, :, 0, :] = a[got_one, :, 1, :]  # project onto |1>, then X
    a[:, :, 1, :] = 0.0
    keep = np.where(got_one, p1, 1.0 - p1)
    amps /= np.sqrt(np.maximum(keep, _PROB_FLOOR))[:, None]


_PAULI = [None, _FIXED_1Q[GateKind.X], _FIXED_1Q[GateKind.Y], _Z]
_PAULI_PAIRS = [(i, j) for i in range(4) for j in range(4)][1:]  # skip (I, I)


def _inject_noise(amps: np.ndarray, qubits: tuple[int, ...], p: float,
                  rng: np.random.Generator) -> None:
    """With probability p per shot, apply a uniform non-identity Pauli on `qubits`."""
    if p <= 0.0:
        return
    hit = np.flatnonzero(rng.random(amps.shape[0]) < p)
    if hit.size == 0:
        return
    n_options = 3 if len(qubits) == 1 else 15
    choice = rng.integers(n_options, size=hit.size)
    for opt in range(n_options):
        rows = hit[choice == opt]
        if rows.size == 0:
            continue
        sub = amps[rows]
        if len(qubits) == 1:
            sub = _apply_1q(sub, _PAULI[opt + 1], qubits[0])
        else:
            i, j = _PAULI_PAIRS[opt]
            if i:
                sub = _apply_1q(sub, _PAULI[i], qubits[0])
            if j:
                sub = _apply_1q(sub, _PAULI[j], qubits[1])
        amps[rows] = sub


def _marginal_rows(probs: np.ndarray, wires: list[int], n: int) -> np.ndarray:
    p = probs.reshape((-1,) + (2,) * n)
    axes = [1 + n - 1 - w for w in reversed(wires)]
    rest = [ax for ax in range(1, n + 1) if ax not in axes]
    p = np.transpose(p, [0] + axes + rest)
    return p.reshape(p.shape[0], 1 << len(wires), -1).sum(axis=2)


def sample(circuit: Circuit, shots: int, seed: int,
           noise: NoiseSpec | None = None) -> dict[str, int]:
    """Sampled counts over measured_qubits from per-shot trajectory simulation.

    Identical (circuit, shots, seed, noise) always yields identical counts.
    Keys are bitstrings with measured_qubits[0] rightmost.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not circuit.measured_qubits:
        raise ValueError("circuit has no measured qubits")
    n = circuit.n_qubits
    rng = np.random.default_rng(seed)
    k = len(circuit.measured_qubits)
    totals = np.zeros(1 << k, dtype=np.int64)
    done = 0
    while done < shots:
        rows = min(_SHOT_CHUNK, shots - done)
        amps = np.zeros((rows, 1 << n), dtype=complex)
        amps[:, 0] = 1.0
        for g in circuit.gates:
            if g.kind is GateKind.RESET:
                _reset_rows(amps, g.qubits[0], rng)
            else:
                amps = _apply_unitary(amps, g)
                if noise is not None:
                    p = noise.p2 if g.kind in TWO_QUBIT_KINDS else noise.p1
                    _inject_noise(amps, g.qubits, p, rng)
        pm = _marginal_rows(np.abs(amps) ** 2, circuit.measured_qubits, n)
        pm /= pm.sum(axis=1, keepdims=True)
        u = rng.random(rows)
        outcomes = np.minimum(
            (np.cumsum(pm, axis=1) <= u[:, None]).sum(axis=1), (1 << k) - 1
        )
        totals += np.bincount(outcomes, minlength=1 << k)
        done += rows
    return {format(i, f"0{k}b"): int(c) for i, c in enumerate(totals) if c > 0}


def counts_to_distribution(counts: dict[str, int], n_measured: int) -> np.ndarray:
    """Empirical distribution aligned with run_exact's output indexing."""
    total = sum(counts.values())
    probs = np.zeros(1 << n_measured)
    for key, c in counts.items():
        probs[int(key, 2)] = c / total
    return probs
