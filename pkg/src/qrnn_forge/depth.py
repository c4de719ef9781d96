"""Basis-gate decomposition, greedy routing, and circuit-depth metrics.

The target basis {RZ, SX, X, CZ} resembles current fixed-frequency hardware
without modeling any particular device. Rewrites are fixed rules with no
peephole optimization, so depth comparisons reflect circuit construction
methods rather than transpiler quality. RESET passes through and occupies
one depth slot on its qubit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .enqode import EnqodeAnsatz, ansatz_circuit
from .qrnn import (
    Encoding,
    Entanglement,
    QrnnConfig,
    QrnnModel,
    Structure,
    build_circuit,
    make_encoder,
    param_count,
)
from .simulator import Circuit, Gate, GateKind, cz, rz, sx, x

HARDWARE_BASIS = frozenset({GateKind.RZ, GateKind.SX, GateKind.X, GateKind.CZ})


class Topology(Enum):
    ALL_TO_ALL = "all_to_all"
    LINEAR_CHAIN = "linear_chain"


@dataclass(frozen=True)
class CouplingMap:
    topology: Topology
    n_qubits: int = 0  # informational for LINEAR_CHAIN; edges are (q, q+1)


# ---------------------------------------------------------------------------
# decomposition rules (all equivalent up to global phase)
# ---------------------------------------------------------------------------


def _rewrite_h(q: int) -> list[Gate]:
    return [rz(q, math.pi / 2), sx(q), rz(q, math.pi / 2)]


def _rewrite_ry(q: int, angle: float) -> list[Gate]:
    # RY(t) = RZ(pi) . SX . RZ(t+pi) . SX . RZ(0) as a matrix product
    return [rz(q, 0.0), sx(q), rz(q, angle + math.pi), sx(q), rz(q, math.pi)]


def _rewrite_rx(q: int, angle: float) -> list[Gate]:
    return [rz(q, math.pi / 2), sx(q), rz(q, angle + math.pi), sx(q), rz(q, math.pi / 2)]


def _rewrite_y(q: int) -> list[Gate]:
    return [rz(q, math.pi), x(q)]


def _rewrite_cx(control: int, target: int) -> list[Gate]:
    return _rewrite_h(target) + [cz(control, target)] + _rewrite_h(target)


def _rewrite_cy(control: int, target: int) -> list[Gate]:
    return [rz(target, -math.pi / 2), Gate(GateKind.CX, (control, target)), rz(target, math.pi / 2)]


_RULES = {
    GateKind.H: lambda g: _rewrite_h(g.qubits[0]),
    GateKind.RY: lambda g: _rewrite_ry(g.qubits[0], g.angle),
    GateKind.RX: lambda g: _rewrite_rx(g.qubits[0], g.angle),
    GateKind.Y: lambda g: _rewrite_y(g.qubits[0]),
    GateKind.CX: lambda g: _rewrite_cx(*g.qubits),
    GateKind.CY: lambda g: _rewrite_cy(*g.qubits),
}


def decompose(circuit: Circuit, basis: frozenset[GateKind] = HARDWARE_BASIS) -> Circuit:
    """Rewrite every gate into the basis; RESET passes through."""
    gates = list(circuit.gates)
    changed = True
    while changed:
        changed = False
        out: list[Gate] = []
        for g in gates:
            if g.kind in basis or g.kind is GateKind.RESET:
                out.append(g)
            elif g.kind in _RULES:
                out.extend(_RULES[g.kind](g))
                changed = True
            else:
                raise ValueError(f"no decomposition rule for gate kind {g.kind.value}")
        gates = out
    return Circuit(circuit.n_qubits, gates, list(circuit.measured_qubits))


# ---------------------------------------------------------------------------
# routing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoutedCircuit:
    circuit: Circuit
    layout: list[int]  # layout[logical] = physical wire after routing


def _swap_gates(a: int, b: int) -> list[Gate]:
    # SWAP = 3 CX, each already in the CZ-conjugated basis form
    return _rewrite_cx(a, b) + _rewrite_cx(b, a) + _rewrite_cx(a, b)


def route(circuit: Circuit, coupling: CouplingMap) -> RoutedCircuit:
    """Greedy nearest-neighbor routing for a linear chain; all-to-all is a no-op.

    Before each 2-qubit gate on non-adjacent wires, SWAPs move the control
    toward the target along the chain; the logical-to-physical layout is
    tracked and returned.
    """
    identity = list(range(circuit.n_qubits))
    if coupling.topology is Topology.ALL_TO_ALL:
        return RoutedCircuit(circuit, identity)
    phys_of = identity.copy()
    logical_at = identity.copy()
    gates: list[Gate] = []
    for g in circuit.gates:
        if len(g.qubits) == 1:
            gates.append(Gate(g.kind, (phys_of[g.qubits[0]],), g.angle))
            continue
        pc, pt = phys_of[g.qubits[0]], phys_of[g.qubits[1]]
        while abs(pc - pt) > 1:
            step = pc + 1 if pt > pc else pc - 1
            gates.extend(_swap_gates(pc, step))
            la, lb = logical_at[pc], logical_at[step]
            logical_at[pc], logical_at[step] = lb, la
            phys_of[la], phys_of[lb] = step, pc
            pc = step
        gates.append(Gate(g.kind, (pc, pt), g.angle))
    routed = Circuit(circuit.n_qubits, gates, [phys_of[q] for q in circuit.measured_qubits])
    return RoutedCircuit(routed, phys_of)


# ---------------------------------------------------------------------------
# depth
# ---------------------------------------------------------------------------


def circuit_depth(circuit: Circuit, count: str = "all_gates") -> int:
    """Longest qubit-wise dependency chain: each counted gate advances its
    qubits to max(current layers) + 1. count='two_qubit_only' counts only
    2-qubit kinds; everything else then advances nothing."""
    if count not in ("all_gates", "two_qubit_only"):
        raise ValueError(f"unknown depth count mode: {count}")
    two_qubit = {GateKind.CX, GateKind.CY, GateKind.CZ}
    layer = [0] * circuit.n_qubits
    for g in circuit.gates:
        if count == "two_qubit_only" and g.kind not in two_qubit:
            continue
        new = max(layer[q] for q in g.qubits) + 1
        for q in g.qubits:
            layer[q] = new
    return max(layer, default=0)


# ---------------------------------------------------------------------------
# encoding/structure scaling scan
# ---------------------------------------------------------------------------


def depth_scan(n_f_values=(2, 3, 4, 5), encodings=None, structures=None,
               t_steps: int = 2, coupling: CouplingMap | None = None,
               seed: int = 7, n_hidden: int = 1, ansatz_reps: int = 1) -> list[dict]:
    """Depth of a representative recurrent circuit per (n_f, encoding, structure).

    Fixed seeded data and parameters, decomposition to the hardware basis,
    optional routing, then both depth metrics. The approximate encoder uses
    the layers == qubits schedule; its depth does not depend on the trained
    parameter values, so untrained parameters stand in.
    """
    encodings = list(encodings) if encodings is not None else [Encoding.AMPLITUDE, Encoding.ENQODE]
    structures = list(structures) if structures is not None else [Structure.CANONICAL, Structure.ALTERNATING]
    coupling = coupling or CouplingMap(Topology.ALL_TO_ALL)
    rows = []
    for n_f in n_f_values:
        features = 1 << n_f
        rng = np.random.default_rng(seed + n_f)
        sequence = rng.random((t_steps, features)) * 0.9 + 0.05
        enqode_params = rng.uniform(-math.pi, math.pi, n_f * n_f)
        for encoding in encodings:
            for structure in structures:
                config = QrnnConfig(
                    n_hidden=n_hidden, n_feature=n_f, encoding=encoding,
                    structure=structure, ansatz_reps=ansatz_reps,
                    entanglement=Entanglement.LINEAR,
                )
                params_rng = np.random.default_rng(seed)
                params = params_rng.uniform(-math.pi, math.pi, param_count(config))
                if encoding is Encoding.ENQODE:
                    ansatz = EnqodeAnsatz(n_f, n_f)
                    encoder = lambda x_t: ansatz_circuit(ansatz, enqode_params)
                else:
                    encoder = make_encoder(config)
                model = QrnnModel(config=config, params=params, encoder=encoder)
                circuit = decompose(build_circuit(model, sequence))
                routed = route(circuit, coupling).circuit
                rows.append({
                    "n_f": n_f,
                    "features": features,
                    "encoding": encoding.value,
                    "structure": structure.value,
                    "depth": circuit_depth(routed),
                    "two_qubit_depth": circuit_depth(routed, "two_qubit_only"),
                })
    return rows


DEPTH_CSV_HEADER = "n_f,features,encoding,structure,depth,two_qubit_depth"


def depth_rows_to_csv(rows: list[dict]) -> str:
    lines = [DEPTH_CSV_HEADER]
    for r in rows:
        lines.append(f"{r['n_f']},{r['features']},{r['encoding']},{r['structure']},"
                     f"{r['depth']},{r['two_qubit_depth']}")
    return "\n".join(lines) + "\n"
