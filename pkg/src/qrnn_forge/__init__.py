"""Quantum recurrent neural networks with amplitude encoding.

Library + CLI: a statevector simulator with purified resets, angle /
exact-amplitude / approximate amplitude encoders, recurrent circuit builders
with canonical and alternating feature-register layouts, SPSA+Adam training,
and a circuit-depth analyzer. See README.md for the tour.
"""

from .data import OhlcRecord, SequenceSample, compute_features, load_csv, split, synthetic, windowize
from .depth import CouplingMap, Topology, circuit_depth, decompose, depth_scan, route
from .encoding import (
    MinMaxScaler,
    ScaleMode,
    amplitude_qsp,
    angle_feature_map,
    apply_scaler,
    augment_amplitude_feature,
    fit_scaler,
    invert_scaler,
    normalize_l2,
)
from .enqode import (
    EnqodeAnsatz,
    EnqodeModel,
    encode_sample,
    fit_enqode,
    kmeans,
    mean_fidelity,
    train_centroid,
)
from .qrnn import (
    Encoding,
    Entanglement,
    QrnnConfig,
    QrnnModel,
    Structure,
    build_alternating,
    build_ansatz,
    build_canonical,
    feature_qubits,
    load_checkpoint,
    make_encoder,
    make_qrnn_model,
    param_count,
    save_checkpoint,
)
from .simulator import (
    Circuit,
    Gate,
    GateKind,
    NoiseSpec,
    StateVector,
    apply_gate,
    fidelity,
    run_exact,
    sample,
    statevector,
    zero_state,
)
from .training import (
    AdamState,
    ClassicalRnn,
    TrainConfig,
    adam_step,
    evaluate,
    mse_loss,
    probability_to_value,
    spsa_gradient,
    target_probability,
    train,
)

__version__ = "0.1.0"
