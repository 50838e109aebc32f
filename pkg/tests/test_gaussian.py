import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minn import gaussian as g
from minn import oracle
from minn.gaussian import GateAngles, ImpossibleOutcomeError


def random_angles(rng, n_gates):
    return rng.uniform(-np.pi, np.pi, (n_gates, 6))


def random_state(rng, n, depth=3):
    """Covariance and statevector after a few random layers on |0...0>."""
    gamma = g.initial_covariance(n)
    psi = oracle.basis_state(np.ones(n))
    for l in range(1, depth + 1):
        parity = g.layer_parity(l)
        ang = random_angles(rng, g.gates_in_layer(n, parity))
        gamma = g.apply_layer(gamma, g.assemble_layer(ang, parity, n))
        psi = oracle.apply_layer(psi, ang, parity)
    return gamma, psi


def test_initial_covariance_single_qubit():
    assert np.array_equal(g.initial_covariance(1), [[0.0, -1.0], [1.0, 0.0]])


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_initial_covariance_is_pure(n):
    d = g.covariance_defects(g.initial_covariance(n))
    assert d["antisymmetry"] == 0 and d["purity"] == 0


def test_initial_covariance_rejects_zero():
    with pytest.raises(ValueError):
        g.initial_covariance(0)


def test_initial_state_measures_plus():
    gamma = g.initial_covariance(1)
    assert g.measurement_probability(gamma, 0, +1) == 1.0
    assert g.measurement_probability(gamma, 0, -1) == 0.0
    psi = oracle.basis_state([1])
    assert oracle.project(psi, 0, +1)[0] == pytest.approx(1.0)


def test_generator_zero_and_zi_entry():
    assert np.array_equal(g.build_generator(GateAngles()), np.zeros((4, 4)))
    h = g.build_generator(GateAngles(zi=np.pi))
    expected = np.zeros((4, 4))
    expected[0, 1], expected[1, 0] = -np.pi / 4, np.pi / 4
    assert np.array_equal(h, expected)


def test_generator_entries_match_layout():
    t = GateAngles(xx=1.0, xy=2.0, yx=3.0, yy=4.0, zi=5.0, iz=6.0)
    h = g.build_generator(t)
    # (row, col) in 0-based Majorana order and the expected value
    want = {(0, 1): -5 / 4, (0, 2): 3 / 4, (0, 3): 4 / 4, (1, 2): -1 / 4, (1, 3): -2 / 4, (2, 3): -6 / 4}
    for (i, j), v in want.items():
        assert h[i, j] == pytest.approx(v)
        assert h[j, i] == pytest.approx(-v)


def test_generator_rejects_nonfinite():
    with pytest.raises(ValueError):
        GateAngles(xx=np.nan)
    with pytest.raises(ValueError):
        g.build_generator(np.array([0, 0, np.inf, 0, 0, 0]))


@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_generator_antisymmetric(vals):
    h = g.build_generator(np.array(vals))
    assert np.array_equal(h, -h.T)


def test_gate_rotation_identity_and_zi_block():
    assert np.allclose(g.gate_rotation(np.zeros((4, 4))), np.eye(4))
    r = g.gate_rotation(g.build_generator(GateAngles(zi=np.pi / 2)))
    want = np.eye(4)
    want[:2, :2] = [[0, -1], [1, 0]]
    assert np.allclose(r, want, atol=1e-14)


def test_gate_rotation_orthogonal():
    rng = np.random.default_rng(1)
    for _ in range(50):
        r = g.gate_rotation(g.build_generator(rng.uniform(-5, 5, 6)))
        assert np.abs(r.T @ r - np.eye(4)).max() < 1e-10
        assert np.linalg.det(r) == pytest.approx(1.0)


def test_gate_rotation_rejects_non_antisymmetric():
    with pytest.raises(ValueError):
        g.gate_rotation(np.eye(4))


def test_assemble_identity_layer():
    layer = g.assemble_layer(np.zeros((2, 6)), "odd", 4)
    assert np.allclose(layer.matrix(), np.eye(8))


def test_assemble_even_layer_layout():
    rng = np.random.default_rng(2)
    layer = g.assemble_layer(random_angles(rng, 1), "even", 4)
    r = layer.matrix()
    assert np.allclose(r[:2, :2], np.eye(2)) and np.allclose(r[6:, 6:], np.eye(2))
    assert not np.allclose(r[2:6, 2:6], np.eye(4))
    off = r.copy()
    off[2:6, 2:6] = 0
    off[:2, :2] = 0
    off[6:, 6:] = 0
    assert np.all(off == 0)


def test_gate_counts_three_qubits():
    assert g.gates_in_layer(3, "odd") == 1 and g.gates_in_layer(3, "even") == 1
    assert g.assemble_layer(np.zeros((1, 6)), "odd", 3).block_slices() == [slice(0, 4)]
    assert g.assemble_layer(np.zeros((1, 6)), "even", 3).block_slices() == [slice(2, 6)]


def test_assemble_rejects_count_mismatch():
    with pytest.raises(ValueError):
        g.assemble_layer(np.zeros((2, 6)), "even", 4)


def test_assemble_accepts_gate_angle_list():
    layer = g.assemble_layer([GateAngles(xx=0.3), GateAngles(iz=1.1)], "odd", 4)
    assert layer.n_gates == 2


def test_apply_layer_identity():
    rng = np.random.default_rng(3)
    gamma, _ = random_state(rng, 4)
    out = g.apply_layer(gamma, g.assemble_layer(np.zeros((2, 6)), "odd", 4))
    assert np.allclose(out, gamma, atol=1e-15)


def test_apply_layer_matches_oracle():
    rng = np.random.default_rng(4)
    for _ in range(10):
        gamma, psi = random_state(rng, 4, depth=1)
        assert np.abs(gamma - oracle.covariance_from_state(psi)).max() < 1e-9


def test_two_layers_compose():
    rng = np.random.default_rng(5)
    l1 = g.assemble_layer(random_angles(rng, 2), "odd", 4)
    l2 = g.assemble_layer(random_angles(rng, 1), "even", 4)
    gamma = g.initial_covariance(4)
    r = l2.matrix() @ l1.matrix()
    assert np.abs(g.apply_layer(g.apply_layer(gamma, l1), l2) - r @ gamma @ r.T).max() < 1e-10


def test_apply_layer_dimension_mismatch():
    with pytest.raises(ValueError):
        g.apply_layer(g.initial_covariance(3), g.assemble_layer(np.zeros((2, 6)), "odd", 4))


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(6)
    gamma, _ = random_state(rng, 5)
    for j in range(5):
        assert g.measurement_probability(gamma, j, 1) + g.measurement_probability(gamma, j, -1) == 1.0


def test_half_probability_after_xx_gate():
    # exp(-i pi/4 XX) |00> is an equal superposition of |00> and |11>
    ang = GateAngles(xx=np.pi / 2).as_array()[None]
    gamma = g.apply_layer(g.initial_covariance(2), g.assemble_layer(ang, "odd", 2))
    psi = oracle.apply_layer(oracle.basis_state([1, 1]), ang, "odd")
    assert abs(gamma[0, 1]) < 1e-15
    assert g.measurement_probability(gamma, 0, 1) == pytest.approx(0.5)
    assert oracle.project(psi, 0, 1)[0] == pytest.approx(0.5)


def test_measure_zero_state_unchanged():
    gamma = g.initial_covariance(3)
    assert np.allclose(g.apply_measurement(gamma, 1, +1), gamma)


def test_measurement_matches_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        gamma, psi = random_state(rng, 4)
        j = int(rng.integers(4))
        mu = int(rng.choice([-1, 1]))
        p_g = float(g.measurement_probability(gamma, j, mu))
        p_o, post = oracle.project(psi, j, mu)
        assert p_g == pytest.approx(p_o, abs=1e-12)
        out = g.apply_measurement(gamma, j, mu)
        assert np.abs(out - oracle.covariance_from_state(post)).max() < 1e-9
        assert out[2 * j, 2 * j + 1] == pytest.approx(-mu, abs=1e-8)
        d = g.covariance_defects(out)
        assert d["antisymmetry"] < 1e-12 and d["purity"] < 1e-8


def test_impossible_outcome_raises():
    with pytest.raises(ImpossibleOutcomeError):
        g.apply_measurement(g.initial_covariance(2), 0, -1)


def test_batched_measurement_skips_zero_outcomes():
    rng = np.random.default_rng(8)
    gamma = np.stack([random_state(rng, 3)[0] for _ in range(3)])
    out = g.apply_measurement(gamma, 1, np.array([1.0, 0.0, -1.0]))
    assert np.array_equal(out[1], gamma[1])
    assert out[0, 2, 3] == pytest.approx(-1) and out[2, 2, 3] == pytest.approx(1)


def test_sample_zero_site_always_plus():
    rng = np.random.default_rng(9)
    for _ in range(20):
        event, _ = g.sample_site_measurement(g.initial_covariance(2), 1, rng)
        assert event.outcome == 1 and event.probability == 1.0


def test_sample_reproducible():
    gamma, _ = random_state(np.random.default_rng(10), 3)
    a = [g.sample_site_measurement(gamma, j, np.random.default_rng(11))[0] for j in range(3)]
    b = [g.sample_site_measurement(gamma, j, np.random.default_rng(11))[0] for j in range(3)]
    assert a == b


def test_sample_frequency_at_half():
    ang = GateAngles(xx=np.pi / 2).as_array()[None]
    gamma = g.apply_layer(g.initial_covariance(2), g.assemble_layer(ang, "odd", 2))
    rng = np.random.default_rng(12)
    plus = sum(g.sample_site_measurement(gamma, 0, rng)[0].outcome == 1 for _ in range(100_000))
    assert abs(plus / 100_000 - 0.5) < 0.01


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_invariants_under_random_circuits(n, seed):
    rng = np.random.default_rng(seed)
    gamma = g.initial_covariance(n)
    for l in range(1, 4):
        parity = g.layer_parity(l)
        gamma = g.apply_layer(gamma, g.assemble_layer(random_angles(rng, g.gates_in_layer(n, parity)), parity, n))
        for j in range(n):
            if rng.random() < 0.5:
                _, gamma = g.sample_site_measurement(gamma, j, rng)
    d = g.covariance_defects(gamma)
    assert d["antisymmetry"] <= 1e-10
    assert d["purity"] <= 1e-8
    assert d["bound"] <= 1e-10
