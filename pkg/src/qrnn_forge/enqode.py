"""Approximate amplitude encoding: cluster, pre-train, encode by nearest centroid.

Workflow: k-means over the normalized dataset, a shallow variational ansatz
trained per centroid with exact statevector gradients, then per-sample
encoding that reuses the nearest centroid's parameters, optionally adjusted
by one damped least-squares step against the centroid's stored Jacobian.

Ansatz layout (n qubits, L layers, one RZ angle per qubit per layer):
RY(-pi/2) and RX(-pi/2) on every qubit, then per layer an RZ column followed
by a CY ladder CY(q -> q+1), and a trailing RZ(-pi/2) column. Gate tally:
n*(L+3) rotations and (n-1)*L CY gates.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .simulator import (
    Circuit,
    StateVector,
    _apply_1q,
    _apply_2q,
    cy,
    gate_matrix_1q,
    rx,
    ry,
    rz,
    statevector,
)
from .simulator import GateKind
from .training import AdamState, adam_step

REFINE_DAMPING = 1e-3  # least-squares damping for the one-step refinement


@dataclass(frozen=True)
class EnqodeAnsatz:
    n_qubits: int
    layers: int

    def __post_init__(self):
        if self.n_qubits < 1 or self.layers < 1:
            raise ValueError("ansatz needs at least one qubit and one layer")

    @property
    def param_count(self) -> int:
        return self.n_qubits * self.layers

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


def ansatz_circuit(ansatz: EnqodeAnsatz, params: np.ndarray) -> Circuit:
    """Bind parameters (layer-major, qubit-minor) into the encoding circuit."""
    params = np.asarray(params, dtype=float)
    if params.shape != (ansatz.param_count,):
        raise ValueError(f"expected {ansatz.param_count} parameters, got {params.shape}")
    n = ansatz.n_qubits
    gates = [ry(q, -math.pi / 2) for q in range(n)]
    gates += [rx(q, -math.pi / 2) for q in range(n)]
    for layer in range(ansatz.layers):
        gates += [rz(q, params[layer * n + q]) for q in range(n)]
        gates += [cy(q, q + 1) for q in range(n - 1)]
    gates += [rz(q, -math.pi / 2) for q in range(n)]
    return Circuit(n, gates, list(range(n)))


def ansatz_state(ansatz: EnqodeAnsatz, params: np.ndarray) -> StateVector:
    return statevector(ansatz_circuit(ansatz, params))


def ansatz_fidelity(ansatz: EnqodeAnsatz, params: np.ndarray, target: np.ndarray) -> float:
    amps = ansatz_state(ansatz, params).amplitudes
    return float(np.abs(np.vdot(target, amps)) ** 2)


_RY_M = gate_matrix_1q(ry(0, -math.pi / 2))
_RX_M = gate_matrix_1q(rx(0, -math.pi / 2))
_RZ_M = gate_matrix_1q(rz(0, -math.pi / 2))


def _batch_states(ansatz: EnqodeAnsatz, params_batch: np.ndarray) -> np.ndarray:
    """Ansatz statevectors for a whole batch of parameter vectors at once.

    The fixed gates act uniformly across the batch; the parameterized RZ
    columns multiply per-row phases. This keeps the parameter-shift training
    loop out of per-circuit Python overhead.
    """
    batch = np.atleast_2d(np.asarray(params_batch, dtype=float))
    n = ansatz.n_qubits
    amps = np.zeros((len(batch), ansatz.dim), dtype=complex)
    amps[:, 0] = 1.0
    for q in range(n):
        amps = _apply_1q(amps, _RY_M, q)
    for q in range(n):
        amps = _apply_1q(amps, _RX_M, q)
    for layer in range(ansatz.layers):
        for q in range(n):
            a = amps.reshape(len(batch), -1, 2, 1 << q)
            phase = np.exp(-0.5j * batch[:, layer * n + q])[:, None, None]
            a[:, :, 0, :] *= phase
            a[:, :, 1, :] *= np.conj(phase)
        for q in range(n - 1):
            amps = _apply_2q(amps, GateKind.CY, q, q + 1)
    for q in range(n):
        amps = _apply_1q(amps, _RZ_M, q)
    return amps


def fidelity_gradient(ansatz: EnqodeAnsatz, params: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Exact parameter-shift gradient of the fidelity: [F(+pi/2) - F(-pi/2)] / 2."""
    n_params = len(params)
    batch = np.tile(np.asarray(params, dtype=float), (2 * n_params, 1))
    for j in range(n_params):
        batch[2 * j, j] += math.pi / 2
        batch[2 * j + 1, j] -= math.pi / 2
    fids = np.abs(_batch_states(ansatz, batch) @ np.conj(target)) ** 2
    return (fids[0::2] - fids[1::2]) / 2.0


def state_jacobian(ansatz: EnqodeAnsatz, params: np.ndarray) -> np.ndarray:
    """d(amplitudes)/d(theta_j), exactly: RZ's derivative is the circuit with an
    extra RZ(pi) after gate j, halved (Z = i RZ(pi) and dRZ/dtheta = -i Z RZ / 2)."""
    circuit = ansatz_circuit(ansatz, params)
    n = ansatz.n_qubits
    param_positions = []
    pos = 2 * n  # the parameterized RZ columns start after the RY and RX columns
    for _ in range(ansatz.layers):
        param_positions.extend(range(pos, pos + n))
        pos += n + (n - 1)  # RZ column + CY ladder
    jac = np.empty((ansatz.dim, ansatz.param_count), dtype=complex)
    for j, gate_index in enumerate(param_positions):
        g = circuit.gates[gate_index]
        gates = list(circuit.gates)
        gates.insert(gate_index + 1, rz(g.qubits[0], math.pi))
        jac[:, j] = 0.5 * statevector(Circuit(ansatz.n_qubits, gates)).amplitudes
    return jac


@dataclass(frozen=True)
class CentroidFit:
    params: np.ndarray
    fidelity: float
    jacobian: np.ndarray


def _train_once(centroid: np.ndarray, ansatz: EnqodeAnsatz, steps: int, lr: float,
                tol: float, params: np.ndarray) -> tuple[np.ndarray, float]:
    n_params = ansatz.param_count
    shifts = np.zeros((2 * n_params + 1, n_params))
    for j in range(n_params):
        shifts[2 * j, j] = math.pi / 2
        shifts[2 * j + 1, j] = -math.pi / 2
    adam = AdamState.fresh(n_params)
    target_conj = np.conj(centroid)
    best_params, best_fid = params.copy(), -1.0
    for _ in range(steps):
        fids = np.abs(_batch_states(ansatz, params + shifts) @ target_conj) ** 2
        if fids[-1] > best_fid:
            best_params, best_fid = params.copy(), float(fids[-1])
        if 1.0 - fids[-1] < tol:
            return best_params, best_fid
        grad = -(fids[0:-1:2] - fids[1:-1:2]) / 2.0
        params, adam = adam_step(adam, grad, params, lr)
    final = ansatz_fidelity(ansatz, params, centroid)
    if final > best_fid:
        best_params, best_fid = params, final
    return best_params, best_fid


def train_centroid(centroid: np.ndarray, ansatz: EnqodeAnsatz, steps: int = 500,
                   lr: float = 0.05, seed: int = 0, tol: float = 1e-4,
                   restarts: int = 3, warm_starts: list | None = None,
                   init_params: np.ndarray | None = None) -> CentroidFit:
    """Fit the ansatz to one centroid by full-gradient Adam on 1 - fidelity.

    Runs `restarts` independently seeded optimizations plus any warm-start
    parameter vectors (random inits land in poor local optima often enough to
    matter) and keeps the best. Stops a run early once the infidelity drops
    below tol. Deterministic per seed. When init_params is given, a single
    run starts exactly there.
    """
    centroid = np.asarray(centroid, dtype=complex)
    if centroid.shape != (ansatz.dim,):
        raise ValueError(f"centroid dimension {centroid.shape} != 2**{ansatz.n_qubits}")
    rng = np.random.default_rng(seed)
    if init_params is not None:
        inits = [np.array(init_params, dtype=float)]
    else:
        inits = [np.array(w, dtype=float) for w in (warm_starts or [])]
        inits += [rng.uniform(-math.pi, math.pi, ansatz.param_count)
                  for _ in range(max(1, restarts))]
    best_params, best_fid = None, -1.0
    for init in inits:
        params, fid = _train_once(centroid, ansatz, steps, lr, tol, init)
        if fid > best_fid:
            best_params, best_fid = params, fid
        if 1.0 - best_fid < tol:
            break
    return CentroidFit(
        params=best_params,
        fidelity=best_fid,
        jacobian=state_jacobian(ansatz, best_params),
    )


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------


def kmeans(rows: np.ndarray, k: int, seed: int = 0,
           max_iters: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iteration with k-means++ seeding over unit-norm rows.

    Centroids are re-normalized to unit norm after every update (the
    constrained minimizer for unit-norm data). Assignment ties break toward
    the lowest centroid index; empty clusters keep their previous centroid.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or len(rows) == 0:
        raise ValueError("kmeans needs a non-empty 2-d matrix")
    if not 1 <= k <= len(rows):
        raise ValueError(f"k must be in [1, {len(rows)}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = np.empty((k, rows.shape[1]))
    centroids[0] = rows[rng.integers(len(rows))]
    sq_dist = np.sum((rows - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = sq_dist.sum()
        if total <= 0.0:
            centroids[i] = rows[rng.integers(len(rows))]
        else:
            centroids[i] = rows[rng.choice(len(rows), p=sq_dist / total)]
        sq_dist = np.minimum(sq_dist, np.sum((rows - centroids[i]) ** 2, axis=1))
    assignments = np.full(len(rows), -1)
    for _ in range(max_iters):
        dists = np.sum((rows[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_assignments = np.argmin(dists, axis=1)
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for i in range(k):
            members = rows[assignments == i]
            if len(members) == 0:
                continue
            mean = members.mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 0:
                centroids[i] = mean / norm
    return centroids, assignments


def kmeans_inertia(rows: np.ndarray, centroids: np.ndarray, assignments: np.ndarray) -> float:
    return float(np.sum((rows - centroids[assignments]) ** 2))


def default_cluster_count(n_rows: int) -> int:
    return min(32, math.ceil(math.sqrt(n_rows)) * 2, n_rows)


# ---------------------------------------------------------------------------
# the fitted model
# ---------------------------------------------------------------------------


@dataclass
class EnqodeModel:
    ansatz: EnqodeAnsatz
    centroids: np.ndarray  # (k, 2**n) unit rows
    params: np.ndarray  # (k, param_count)
    train_fidelities: np.ndarray  # (k,)
    jacobians: list  # k complex (2**n, param_count) arrays

    @property
    def dim(self) -> int:
        return self.ansatz.dim

    @property
    def k(self) -> int:
        return len(self.centroids)


def fit_enqode(rows: np.ndarray, layers: int | None = None, k: int | None = None,
               seed: int = 0, steps: int = 500, lr: float = 0.05,
               restarts: int = 3) -> EnqodeModel:
    """Cluster the rows (unit vectors of power-of-two dimension) and train one
    ansatz per centroid. layers defaults to the qubit count."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or len(rows) == 0:
        raise ValueError("need a non-empty row matrix")
    dim = rows.shape[1]
    n_qubits = int(math.log2(dim))
    if 1 << n_qubits != dim:
        raise ValueError(f"row dimension {dim} is not a power of two")
    ansatz = EnqodeAnsatz(n_qubits, layers if layers is not None else max(1, n_qubits))
    if k is None:
        k = default_cluster_count(len(rows))
    centroids, _ = kmeans(rows, k, seed=seed)
    rng = np.random.default_rng(seed)
    fits: list[CentroidFit] = []
    for i, c in enumerate(centroids):
        # nearby centroids share near-optimal parameters; warm-starting from
        # the closest already-trained one rescues poor random-init basins
        warm = []
        if fits:
            dists = np.sum((centroids[:i] - c) ** 2, axis=1)
            warm = [fits[int(np.argmin(dists))].params]
        fits.append(train_centroid(c, ansatz, steps=steps, lr=lr, restarts=restarts,
                                   warm_starts=warm, seed=int(rng.integers(1 << 31))))
    return EnqodeModel(
        ansatz=ansatz,
        centroids=centroids,
        params=np.array([f.params for f in fits]),
        train_fidelities=np.array([f.fidelity for f in fits]),
        jacobians=[f.jacobian for f in fits],
    )


def nearest_centroid(model: EnqodeModel, x: np.ndarray) -> int:
    return int(np.argmin(np.sum((model.centroids - x) ** 2, axis=1)))


def encode_sample(model: EnqodeModel, x: np.ndarray,
                  refine: bool = True) -> tuple[Circuit, float]:
    """Encoding circuit and its classically computed fidelity against x.

    refine=True takes one damped least-squares step along the stored Jacobian
    toward the sample-minus-centroid offset; the step is kept only if it does
    not lower the fidelity. A sample equal to its centroid has a zero offset,
    so its parameters are untouched.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dim,):
        raise ValueError(f"sample dimension {x.shape} != model dimension {model.dim}")
    idx = nearest_centroid(model, x)
    params = model.params[idx]
    fid = ansatz_fidelity(model.ansatz, params, x)
    if refine:
        jac = model.jacobians[idx]
        # express the sample-minus-centroid offset in the gauge of the trained
        # state, whose global phase against the real centroid is arbitrary
        state = ansatz_state(model.ansatz, params).amplitudes
        overlap = np.vdot(model.centroids[idx], state)
        phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
        offset = phase * (x - model.centroids[idx])
        lhs = np.real(jac.conj().T @ jac) + REFINE_DAMPING * np.eye(model.ansatz.param_count)
        rhs = np.real(jac.conj().T @ offset)
        refined = params + np.linalg.solve(lhs, rhs)
        refined_fid = ansatz_fidelity(model.ansatz, refined, x)
        if refined_fid >= fid:
            params, fid = refined, refined_fid
    return ansatz_circuit(model.ansatz, params), fid


def mean_fidelity(model: EnqodeModel, rows: np.ndarray, refine: bool = True) -> float:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or len(rows) == 0:
        raise ValueError("need a non-empty row matrix")
    return float(np.mean([encode_sample(model, row, refine=refine)[1] for row in rows]))


# ---------------------------------------------------------------------------
# serialization (jacobians are recomputed on load; they are exact functions
# of the stored parameters)
# ---------------------------------------------------------------------------


def model_to_json(model: EnqodeModel) -> str:
    return json.dumps({
        "n_qubits": model.ansatz.n_qubits,
        "layers": model.ansatz.layers,
        "centroids": model.centroids.tolist(),
        "params": model.params.tolist(),
        "train_fidelities": model.train_fidelities.tolist(),
    })


def model_from_json(text: str) -> EnqodeModel:
    doc = json.loads(text)
    ansatz = EnqodeAnsatz(doc["n_qubits"], doc["layers"])
    params = np.array(doc["params"], dtype=float)
    return EnqodeModel(
        ansatz=ansatz,
        centroids=np.array(doc["centroids"], dtype=float),
        params=params,
        train_fidelities=np.array(doc["train_fidelities"], dtype=float),
        jacobians=[state_jacobian(ansatz, p) for p in params],
    )


def save_model(model: EnqodeModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model))


def load_model(path: str | Path) -> EnqodeModel:
    return model_from_json(Path(path).read_text())
