"""Probability-space loss, SPSA gradient estimation, Adam, and the training loop.

The loop is model-agnostic: anything exposing `params`, `param_count`,
`replace_params()` and `predict_probability()` can be trained, which keeps the
quantum models and the classical recurrent baseline on the same optimizer
path. Gradients come from SPSA (one random +/-1 direction, two full-batch loss
evaluations); updates from bias-corrected Adam.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .simulator import NoiseSpec


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings. Defaults follow the reference setup: Adam at 0.03
    with SPSA step 0.001, 1024 shots when sampling, five seeds."""

    learning_rate: float = 0.03
    spsa_step: float = 0.001
    epochs: int = 50
    shots: int | None = None  # None = exact probabilities
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    noise: NoiseSpec | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.spsa_step <= 0:
            raise ValueError("spsa_step must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params: int) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params))


def adam_step(state: AdamState, grad: np.ndarray, params: np.ndarray,
              lr: float) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns (new params, new state)."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape or grad.shape != state.m.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grad {grad.shape}")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad**2
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, t=t)


def spsa_gradient(loss_fn, params: np.ndarray, c: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Two-point simultaneous-perturbation estimate along a Rademacher direction.

    delta has +/-1 components, so the componentwise inverse equals delta itself.
    Exactly two loss evaluations per call.
    """
    if c <= 0:
        raise ValueError("perturbation step c must be positive")
    delta = rng.integers(0, 2, size=len(params)) * 2.0 - 1.0
    diff = loss_fn(params + c * delta) - loss_fn(params - c * delta)
    return (diff / (2.0 * c)) * delta


def target_probability(x_next: float, x_min: float, x_max: float) -> float:
    """Measurement probability that maps to the known next value."""
    if x_max <= x_min:
        raise ValueError(f"degenerate bounds: min {x_min}, max {x_max}")
    return (x_next - x_min) / (x_max - x_min)


def probability_to_value(p: float, x_min: float, x_max: float) -> float:
    """Inverse of target_probability: x_min + p * (x_max - x_min)."""
    return x_min + p * (x_max - x_min)


def mse_loss(predicted: np.ndarray, targets: np.ndarray) -> float:
    predicted = np.asarray(predicted, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predicted.shape != targets.shape or predicted.ndim != 1 or len(predicted) == 0:
        raise ValueError(f"need equal-length non-empty arrays, got {predicted.shape} and {targets.shape}")
    return float(np.mean((predicted - targets) ** 2))


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def _batch_loss(model, params, samples, config: TrainConfig, rng) -> float:
    candidate = model.replace_params(params)
    predicted = np.empty(len(samples))
    for i, s in enumerate(samples):
        seed = int(rng.integers(1 << 31)) if config.shots is not None else None
        predicted[i] = candidate.predict_probability(
            s.inputs, shots=config.shots, seed=seed, noise=config.noise
        )
    return mse_loss(predicted, np.array([s.target_probability for s in samples]))


def train(model, samples, config: TrainConfig, seed: int):
    """Full-batch SPSA+Adam training; returns (trained model, per-epoch loss curve).

    Per epoch: one loss evaluation over every training sequence (recorded on
    the curve), one SPSA gradient (two more evaluations), one Adam step.
    Deterministic given (seed, config, data), in exact and in shot mode alike.
    """
    if len(samples) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    if model.params is not None:
        params = np.array(model.params, dtype=float)
    else:
        params = rng.uniform(-math.pi, math.pi, model.param_count)
    adam = AdamState.fresh(len(params))
    curve = []
    for _ in range(config.epochs):
        curve.append(_batch_loss(model, params, samples, config, rng))
        grad = spsa_gradient(
            lambda p: _batch_loss(model, p, samples, config, rng),
            params, config.spsa_step, rng,
        )
        params, adam = adam_step(adam, grad, params, config.learning_rate)
    return model.replace_params(params), curve


@dataclass(frozen=True)
class EvalResult:
    mse: float  # probability space
    return_space_mse: float  # probability-space MSE * (x_max - x_min)^2


def evaluate(model, samples, shots: int | None = None, seed: int | None = None,
             noise: NoiseSpec | None = None) -> EvalResult:
    """Probability-space test MSE, plus the rescaled data-unit figure."""
    if len(samples) == 0:
        raise ValueError("empty test set")
    rng = np.random.default_rng(seed)
    predicted = np.empty(len(samples))
    for i, s in enumerate(samples):
        shot_seed = int(rng.integers(1 << 31)) if shots is not None else None
        predicted[i] = model.predict_probability(s.inputs, shots=shots, seed=shot_seed, noise=noise)
    mse = mse_loss(predicted, np.array([s.target_probability for s in samples]))
    lo, hi = model.target_bounds
    return EvalResult(mse=mse, return_space_mse=mse * (hi - lo) ** 2)


# ---------------------------------------------------------------------------
# classical recurrent baseline
# ---------------------------------------------------------------------------


def _sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


@dataclass
class ClassicalRnn:
    """tanh recurrent network with a logistic output head.

    h_t = tanh(V x_t + W h_{t-1} + b), h_0 = 0; p = logistic(U h_T).
    Parameters are packed flat as [U, V (row-major), W (row-major), b], the
    only bias being the hidden one. Trained with the same SPSA+Adam loop as
    the quantum models so optimizer effects stay comparable.
    """

    n_hidden: int
    n_features: int
    target_bounds: tuple[float, float] = (0.0, 1.0)
    params: np.ndarray | None = None

    @property
    def param_count(self) -> int:
        nh, nf = self.n_hidden, self.n_features
        return nh + nh * nf + nh * nh + nh

    def replace_params(self, params: np.ndarray) -> "ClassicalRnn":
        if len(params) != self.param_count:
            raise ValueError(f"expected {self.param_count} parameters, got {len(params)}")
        return replace(self, params=np.asarray(params, dtype=float))

    def _unpack(self):
        nh, nf = self.n_hidden, self.n_features
        p = self.params
        u = p[:nh]
        v = p[nh:nh + nh * nf].reshape(nh, nf)
        w = p[nh + nh * nf:nh + nh * nf + nh * nh].reshape(nh, nh)
        b = p[nh + nh * nf + nh * nh:]
        return u, v, w, b

    def predict_probability(self, inputs, shots=None, seed=None, noise=None) -> float:
        # shots/seed/noise accepted for interface parity; the baseline is deterministic
        if self.params is None:
            raise ValueError("model has no parameters; train or set them first")
        u, v, w, b = self._unpack()
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        if inputs.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {inputs.shape[1]}")
        hidden = np.zeros(self.n_hidden)
        for x_t in inputs:
            hidden = np.tanh(v @ x_t + w @ hidden + b)
        return _sigmoid(float(u @ hidden))

    def predict(self, inputs, shots=None, seed=None, noise=None) -> tuple[float, float]:
        p = self.predict_probability(inputs, shots=shots, seed=seed, noise=noise)
        return p, probability_to_value(p, *self.target_bounds)


def classical_forward(rnn: ClassicalRnn, sequence) -> float:
    """Output probability of the baseline for one sequence."""
    return rnn.predict_probability(sequence)
