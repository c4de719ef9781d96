import numpy as np
import pytest

from qrnn_forge.enqode import (
    EnqodeAnsatz,
    ansatz_circuit,
    ansatz_fidelity,
    ansatz_state,
    default_cluster_count,
    encode_sample,
    fidelity_gradient,
    fit_enqode,
    kmeans,
    kmeans_inertia,
    mean_fidelity,
    model_from_json,
    model_to_json,
    state_jacobian,
    train_centroid,
)
from qrnn_forge.simulator import GateKind


def random_unit_rows(rng, m, dim):
    rows = rng.random((m, dim)) + 0.05
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# ansatz structure
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n,layers", [(1, 1), (2, 2), (3, 3), (4, 2), (5, 5)])
def test_ansatz_gate_counts(n, layers):
    ansatz = EnqodeAnsatz(n, layers)
    assert ansatz.param_count == n * layers
    circ = ansatz_circuit(ansatz, np.zeros(ansatz.param_count))
    rotations = [g for g in circ.gates if g.kind in (GateKind.RX, GateKind.RY, GateKind.RZ)]
    entanglers = [g for g in circ.gates if g.kind is GateKind.CY]
    assert len(rotations) == n * (layers + 3)
    assert len(entanglers) == (n - 1) * layers


def test_ansatz_param_count_validation():
    with pytest.raises(ValueError):
        ansatz_circuit(EnqodeAnsatz(2, 2), np.zeros(3))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def test_train_fixed_point_fidelity_one():
    rng = np.random.default_rng(0)
    ansatz = EnqodeAnsatz(2, 2)
    theta_star = rng.uniform(-np.pi, np.pi, ansatz.param_count)
    centroid = ansatz_state(ansatz, theta_star).amplitudes
    fit = train_centroid(centroid, ansatz, init_params=theta_star)
    assert fit.fidelity == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(fit.params, theta_star)  # early stop before any step


def test_parameter_shift_matches_finite_differences():
    rng = np.random.default_rng(1)
    h = 1e-5
    for _ in range(50):
        n = int(rng.integers(1, 4))
        ansatz = EnqodeAnsatz(n, int(rng.integers(1, 4)))
        params = rng.uniform(-np.pi, np.pi, ansatz.param_count)
        target = random_unit_rows(rng, 1, ansatz.dim)[0]
        grad = fidelity_gradient(ansatz, params, target)
        for j in range(ansatz.param_count):
            p = params.copy()
            p[j] += h
            plus = ansatz_fidelity(ansatz, p, target)
            p[j] -= 2 * h
            minus = ansatz_fidelity(ansatz, p, target)
            assert abs((plus - minus) / (2 * h) - grad[j]) < 1e-5


def test_state_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    ansatz = EnqodeAnsatz(3, 2)
    params = rng.uniform(-np.pi, np.pi, ansatz.param_count)
    jac = state_jacobian(ansatz, params)
    h = 1e-6
    for j in range(ansatz.param_count):
        p = params.copy()
        p[j] += h
        plus = ansatz_state(ansatz, p).amplitudes
        p[j] -= 2 * h
        minus = ansatz_state(ansatz, p).amplitudes
        np.testing.assert_allclose((plus - minus) / (2 * h), jac[:, j], atol=1e-6)


def test_uniform_centroid_trains_to_high_fidelity():
    fit = train_centroid(np.full(4, 0.5), EnqodeAnsatz(2, 2), steps=500, seed=0)
    assert fit.fidelity >= 0.99


def test_train_deterministic():
    rng = np.random.default_rng(3)
    centroid = random_unit_rows(rng, 1, 4)[0]
    a = train_centroid(centroid, EnqodeAnsatz(2, 2), steps=50, seed=7)
    b = train_centroid(centroid, EnqodeAnsatz(2, 2), steps=50, seed=7)
    np.testing.assert_array_equal(a.params, b.params)
    assert a.fidelity == b.fidelity


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------


def test_kmeans_k_equals_rows_gives_zero_inertia():
    rng = np.random.default_rng(4)
    rows = random_unit_rows(rng, 6, 4)
    centroids, labels = kmeans(rows, k=6, seed=0)
    assert kmeans_inertia(rows, centroids, labels) == pytest.approx(0.0, abs=1e-18)


def test_kmeans_two_separated_pairs():
    a = np.array([1.0, 0.0, 0.0, 0.0])
    b = np.array([0.95, 0.3122, 0.0, 0.0])
    c = np.array([0.0, 0.0, 1.0, 0.0])
    d = np.array([0.0, 0.0, 0.95, 0.3122])
    rows = np.array([v / np.linalg.norm(v) for v in (a, b, c, d)])
    centroids, labels = kmeans(rows, k=2, seed=1)
    # brute-force oracle: best 2-partition is {a,b} vs {c,d}; centroids are
    # the normalized pair means
    expected = {tuple(np.round((rows[0] + rows[1]) / np.linalg.norm(rows[0] + rows[1]), 9)),
                tuple(np.round((rows[2] + rows[3]) / np.linalg.norm(rows[2] + rows[3]), 9))}
    got = {tuple(np.round(c, 9)) for c in centroids}
    assert got == expected
    assert labels[0] == labels[1] and labels[2] == labels[3] and labels[0] != labels[2]


def test_kmeans_deterministic():
    rng = np.random.default_rng(5)
    rows = random_unit_rows(rng, 40, 8)
    c1, l1 = kmeans(rows, 5, seed=9)
    c2, l2 = kmeans(rows, 5, seed=9)
    np.testing.assert_array_equal(c1, c2)
    np.testing.assert_array_equal(l1, l2)


def test_kmeans_inertia_non_increasing_over_iterations():
    rng = np.random.default_rng(6)
    rows = random_unit_rows(rng, 60, 4)
    inertias = []
    for iters in range(1, 8):
        centroids, labels = kmeans(rows, 6, seed=2, max_iters=iters)
        inertias.append(kmeans_inertia(rows, centroids, labels))
    assert all(b <= a + 1e-12 for a, b in zip(inertias, inertias[1:]))


def test_kmeans_validation():
    rows = random_unit_rows(np.random.default_rng(0), 3, 4)
    with pytest.raises(ValueError):
        kmeans(rows, 0)
    with pytest.raises(ValueError):
        kmeans(np.zeros((0, 4)), 1)


def test_default_cluster_count():
    assert default_cluster_count(500) == 32
    assert default_cluster_count(25) == 10
    assert default_cluster_count(3) == 3


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_model():
    rng = np.random.default_rng(7)
    rows = random_unit_rows(rng, 30, 4)
    return fit_enqode(rows, layers=2, k=4, seed=0, steps=200), rows


def test_encode_at_centroid_matches_train_fidelity(small_model):
    model, _ = small_model
    for i, centroid in enumerate(model.centroids):
        _, fid = encode_sample(model, centroid, refine=False)
        assert fid == pytest.approx(model.train_fidelities[i], abs=1e-12)


def test_refine_at_centroid_leaves_parameters_unchanged(small_model):
    model, _ = small_model
    for i, centroid in enumerate(model.centroids):
        circuit, _ = encode_sample(model, centroid, refine=True)
        expected = ansatz_circuit(model.ansatz, model.params[i])
        got_angles = [g.angle for g in circuit.gates if g.angle is not None]
        want_angles = [g.angle for g in expected.gates if g.angle is not None]
        np.testing.assert_allclose(got_angles, want_angles, atol=1e-9)


def test_refine_never_lowers_fidelity(small_model):
    model, rows = small_model
    rng = np.random.default_rng(8)
    for _ in range(30):
        base = rows[rng.integers(len(rows))]
        x = base + rng.normal(0, 0.03, size=4)
        x = np.abs(x) / np.linalg.norm(x)
        _, refined = encode_sample(model, x, refine=True)
        _, raw = encode_sample(model, x, refine=False)
        assert refined >= raw - 1e-9


def test_encode_dimension_mismatch(small_model):
    model, _ = small_model
    with pytest.raises(ValueError):
        encode_sample(model, np.ones(8) / np.sqrt(8))


def test_mean_fidelity_on_centroids_is_mean_train_fidelity(small_model):
    model, _ = small_model
    got = mean_fidelity(model, model.centroids, refine=False)
    assert got == pytest.approx(float(model.train_fidelities.mean()), abs=1e-12)


def test_mean_fidelity_single_row(small_model):
    model, rows = small_model
    _, fid = encode_sample(model, rows[0])
    assert mean_fidelity(model, rows[:1]) == pytest.approx(fid)


def test_fit_rejects_non_power_of_two():
    rng = np.random.default_rng(9)
    with pytest.raises(ValueError, match="power of two"):
        fit_enqode(random_unit_rows(rng, 10, 3))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_model_json_roundtrip(small_model):
    model, rows = small_model
    restored = model_from_json(model_to_json(model))
    np.testing.assert_array_equal(restored.centroids, model.centroids)
    np.testing.assert_array_equal(restored.params, model.params)
    np.testing.assert_array_equal(restored.train_fidelities, model.train_fidelities)
    for a, b in zip(restored.jacobians, model.jacobians):
        np.testing.assert_allclose(a, b, atol=1e-12)
    x = rows[3]
    assert encode_sample(restored, x)[1] == pytest.approx(encode_sample(model, x)[1])
