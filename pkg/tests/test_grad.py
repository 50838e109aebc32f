import numpy as np
import pytest

from minn import gaussian as g
from minn import grad
from minn import network as nw
from minn.gaussian import MeasurementEvent
from minn.verify import finite_difference_score, random_params, sample_instance
from tests.test_gaussian import random_angles, random_state


def chain_log_prob(gamma, events):
    """Sum of log Born probabilities for sequential measurements ``events`` = [(site, mu), ...].

    Uses the unclipped Born formula: once three of four sites are fixed, parity
    makes the last outcome certain and the clipped probability would only be
    one-sided differentiable off the physical manifold.
    """
    total = 0.0
    for site, mu in events:
        total += np.log(0.5 * (1.0 - mu * gamma[2 * site, 2 * site + 1]))
        gamma = g.apply_measurement(gamma, site, mu)
    return total


def chain_adjoint(gamma, events):
    snaps = []
    for site, mu in events:
        snaps.append(gamma)
        gamma = g.apply_measurement(gamma, site, mu)
    adj = np.zeros_like(gamma)
    for (site, mu), pre in zip(reversed(events), reversed(snaps)):
        adj = grad.backprop_measurement(adj, pre, site, mu)
    return adj


def fd_wrt_gamma(f, gamma, eps=1e-6):
    """Central differences along antisymmetric unit perturbations, as an antisymmetric matrix."""
    dim = gamma.shape[0]
    out = np.zeros_like(gamma)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros_like(gamma)
            e[i, j], e[j, i] = eps, -eps
            out[i, j] = (f(gamma + e) - f(gamma - e)) / (2 * eps)
            out[j, i] = -out[i, j]
    return out


def sampled_events(rng, gamma, sites):
    events = []
    for j in sites:
        ev, gamma = g.sample_site_measurement(gamma, j, rng)
        events.append((j, ev.outcome))
    return events


def assert_close(a, b, rtol):
    assert np.all(np.abs(a - b) <= rtol * np.abs(b) + 1e-9), np.abs(a - b).max()


def test_seed_adjoint_entries():
    a = grad.seed_adjoint(MeasurementEvent(layer=1, site=0, outcome=1, probability=1.0), 2)
    want = np.zeros((4, 4))
    want[1, 0], want[0, 1] = 0.5, -0.5
    assert np.array_equal(a, want)
    b = grad.seed_adjoint(MeasurementEvent(layer=1, site=0, outcome=-1, probability=1.0), 2)
    assert np.array_equal(b, -want)
    assert np.array_equal(grad.seed_adjoint(None, 3), np.zeros((6, 6)))


def test_seed_adjoint_matches_finite_differences():
    rng = np.random.default_rng(0)
    gamma, _ = random_state(rng, 3)
    (site, mu), = sampled_events(rng, gamma, [1])
    p = float(g.measurement_probability(gamma, site, mu))
    adj = grad.seed_adjoint(MeasurementEvent(1, site, mu, p), 3)
    fd = fd_wrt_gamma(lambda x: chain_log_prob(x, [(site, mu)]), gamma)
    assert_close(adj, fd, 1e-5)


def test_backprop_zero_adjoint_gives_local_term():
    rng = np.random.default_rng(1)
    gamma, _ = random_state(rng, 3)
    p = float(g.measurement_probability(gamma, 2, -1))
    out = grad.backprop_measurement(np.zeros((6, 6)), gamma, 2, -1)
    assert np.allclose(out, grad.measurement_adjoint(3, 2, -1, p))


@pytest.mark.parametrize("seed", range(5))
def test_backprop_measurement_matches_fd(seed):
    rng = np.random.default_rng(seed + 10)
    gamma, _ = random_state(rng, 3)
    events = sampled_events(rng, gamma, [1, 2])
    # adjoint of the whole chain w.r.t. the covariance before the first event
    fd = fd_wrt_gamma(lambda x: chain_log_prob(x, events), gamma)
    assert_close(chain_adjoint(gamma, events), fd, 1e-5)


def test_backprop_full_layer_chain():
    rng = np.random.default_rng(20)
    gamma, _ = random_state(rng, 4)
    events = sampled_events(rng, gamma, range(4))
    fd = fd_wrt_gamma(lambda x: chain_log_prob(x, events), gamma)
    assert_close(chain_adjoint(gamma, events), fd, 1e-5)


def test_backprop_passes_unmeasured_through():
    rng = np.random.default_rng(21)
    gamma, _ = random_state(rng, 3)
    adj = rng.normal(size=(6, 6))
    adj = adj - adj.T
    assert np.array_equal(grad.backprop_measurement(adj, gamma, 0, 0), adj)


def test_backprop_unitary_identity_and_norm():
    rng = np.random.default_rng(22)
    adj = rng.normal(size=(8, 8))
    adj = adj - adj.T
    ident = g.assemble_layer(np.zeros((2, 6)), "odd", 4)
    assert np.allclose(grad.backprop_unitary(adj, ident), adj)
    layer = g.assemble_layer(random_angles(rng, 2), "odd", 4)
    out = grad.backprop_unitary(adj, layer)
    assert abs(np.linalg.norm(out) - np.linalg.norm(adj)) < 1e-10


def test_backprop_unitary_matches_fd():
    rng = np.random.default_rng(23)
    gamma0, _ = random_state(rng, 4, depth=2)
    layer = g.assemble_layer(random_angles(rng, 1), "even", 4)
    gamma1 = g.apply_layer(gamma0, layer)
    events = sampled_events(rng, gamma1, [0, 1, 3])
    adj0 = grad.backprop_unitary(chain_adjoint(gamma1, events), layer)
    fd = fd_wrt_gamma(lambda x: chain_log_prob(g.apply_layer(x, layer), events), gamma0)
    assert_close(adj0, fd, 1e-5)


def test_frechet_at_zero():
    rng = np.random.default_rng(24)
    dh = rng.normal(size=(4, 4))
    dh = dh - dh.T
    assert np.allclose(grad.frechet_rotation_derivative(np.zeros((4, 4)), dh), 4 * dh)


def test_frechet_commuting_direction():
    h = g.build_generator(np.random.default_rng(25).normal(size=6))
    dr = grad.frechet_rotation_derivative(h, 0.3 * h)
    assert np.allclose(dr, 4 * 0.3 * h @ g.gate_rotation(h))


def test_frechet_matches_central_difference():
    rng = np.random.default_rng(26)
    for _ in range(10):
        h = g.build_generator(rng.normal(size=6))
        dh = g.build_generator(rng.normal(size=6))
        eps = 1e-6
        fd = (g.gate_rotation(h + eps * dh) - g.gate_rotation(h - eps * dh)) / (2 * eps)
        dr = grad.frechet_rotation_derivative(h, dh)
        assert np.abs(dr - fd).max() <= 1e-6 * np.abs(fd).max()


def test_angle_gradient_zero_adjoint():
    rng = np.random.default_rng(27)
    gamma, _ = random_state(rng, 4)
    layer = g.assemble_layer(random_angles(rng, 2), "odd", 4)
    assert np.all(grad.angle_gradient(np.zeros((8, 8)), gamma, layer) == 0)


@pytest.mark.parametrize("method", ["adjoint", "direct"])
def test_angle_gradient_matches_fd(method):
    rng = np.random.default_rng(28)
    gamma0, _ = random_state(rng, 4, depth=1)
    parity = "even"
    angles = random_angles(rng, 1)
    layer = g.assemble_layer(angles, parity, 4)
    gamma1 = g.apply_layer(gamma0, layer)
    events = sampled_events(rng, gamma1, range(4))
    got = grad.angle_gradient(chain_adjoint(gamma1, events), gamma1, layer, method=method)
    eps = 1e-5
    for k in range(6):
        d = np.zeros_like(angles)
        d[0, k] = eps
        up = chain_log_prob(g.apply_layer(gamma0, g.assemble_layer(angles + d, parity, 4)), events)
        dn = chain_log_prob(g.apply_layer(gamma0, g.assemble_layer(angles - d, parity, 4)), events)
        fd = (up - dn) / (2 * eps)
        assert abs(got[0, k] - fd) <= 1e-4 * abs(fd) + 1e-8


def test_score_zero_without_measurements():
    p = random_params(np.random.default_rng(29), 4, 2)
    tape = nw.forward_trajectory(p, np.ones(4), nw.CircuitConfig(4, 2, 0.0), np.random.default_rng(0))
    assert np.all(grad.score(p, tape) == 0)


def test_score_zero_for_saturated_layer():
    rng = np.random.default_rng(30)
    p = random_params(rng, 4, 2)
    p.weights[0][:] *= 0.01
    p.biases[0][:] = np.where(rng.random(p.biases[0].size) < 0.5, -5.0, 5.0)
    tape = nw.forward_trajectory(p, np.ones(4), nw.CircuitConfig(4, 2, 1.0), rng)
    s = grad.score(p, tape)[0]
    n0 = p.weights[0].size + p.biases[0].size
    assert np.all(s[:n0] == 0)
    assert np.all(s[p.head_slice()] == 0)


def test_score_matches_fd_n4_l2():
    rng = np.random.default_rng(31)
    for _ in range(3):
        params, x, tape = sample_instance(rng, 4, 2, scale=0.5, width=2.0)
        s = grad.score(params, tape)[0]
        fd = finite_difference_score(params, x, tape.record)
        assert np.all(np.abs(s - fd) <= 1e-4 * np.abs(fd) + 1e-8)


def test_score_needs_snapshots():
    p = random_params(np.random.default_rng(32), 3, 1)
    u = np.random.default_rng(0).random((2, 2, 1, 3))
    tape = nw.sample_trajectories(p, np.ones((2, 3)), nw.CircuitConfig(3, 1, 0.5), u, keep_snapshots=False)
    with pytest.raises(ValueError):
        grad.score(p, tape)


def test_log_prob_deterministic_chain_is_zero():
    p = random_params(np.random.default_rng(33), 3, 1)
    p.weights[0][:] = 0
    p.biases[0][:] = 10.0
    tape = nw.replay(p, np.ones((1, 3)), np.ones((1, 1, 3)))
    assert grad.log_prob(tape)[0] == 0.0


def test_optimal_baseline_cases():
    s = np.array([[1.0, 0.0, 2.0], [-1.0, 0.0, 0.5]])
    assert np.allclose(grad.optimal_baseline([4.0, 4.0], s), [4.0, 0.0, 4.0])
    assert np.allclose(grad.optimal_baseline([3.0], s[:1]), [3.0, 0.0, 3.0])
    assert np.allclose(grad.optimal_baseline([1.0, 3.0], np.array([[1.0], [-1.0]])), [2.0])


def test_reinforce_cost_equal_baseline():
    rng = np.random.default_rng(34)
    s = rng.normal(size=(5, 4))
    g0 = grad.reinforce_gradient(np.full(5, 2.5), s, np.zeros_like(s), 2.5)
    assert np.all(g0 == 0)


def test_reinforce_adds_pathwise():
    s = np.zeros((3, 2))
    pw = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    assert np.allclose(grad.reinforce_gradient([1.0, 2.0, 3.0], s, pw), [3.0, 4.0])
