"""Self-checks against the statevector oracle and finite differences.

Used by the ``verify`` subcommand and by the acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from minn import grad, network, oracle
from minn.gaussian import gates_in_layer, layer_parity
from minn.network import CircuitConfig, NetworkParams

KINK_MARGIN = 1e-3


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    n_instances: int

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: worst {self.worst:.3g} (tol {self.tolerance:g}, {self.n_instances} instances)"


def random_params(rng, n_qubits, n_layers, out_dim=2, scale=1.0, width=1.0) -> NetworkParams:
    """Gaussian weights and biases of standard deviation ``scale``."""
    weights, biases = [], []
    for l in range(n_layers):
        rows = 6 * gates_in_layer(n_qubits, layer_parity(l + 1))
        weights.append(rng.normal(0.0, scale, (rows, n_qubits)))
        biases.append(rng.normal(0.0, scale, rows))
    return NetworkParams(weights, biases, rng.normal(size=(out_dim, n_qubits)), rng.normal(size=out_dim), width)


def sample_instance(rng, n_qubits, n_layers, measurement_prob=0.6, scale=1.0, width=1.0):
    """Random parameters, input and one sampled trajectory tape."""
    params = random_params(rng, n_qubits, n_layers, scale=scale, width=width)
    config = CircuitConfig(n_qubits, n_layers, measurement_prob)
    x = rng.choice([-1.0, 1.0], n_qubits)
    return params, x, network.forward_trajectory(params, x, config, rng)


def oracle_check(rng, n_instances=200, qubits=(2, 6), layers=(1, 4), tol=1e-9) -> CheckResult:
    """Compare trajectory probabilities from the covariance simulator with the statevector oracle."""
    worst = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(qubits[0], qubits[1] + 1))
        n_layers = int(rng.integers(layers[0], layers[1] + 1))
        params, x, tape = sample_instance(rng, n, n_layers, measurement_prob=rng.uniform(0.2, 1.0), scale=2.0)
        exact = oracle.trajectory_probability(params, x, tape.record[0])
        worst = max(worst, abs(float(np.exp(tape.log_prob[0])) - exact))
    return CheckResult("oracle equivalence", worst <= tol, worst, tol, n_instances)


def _away_from_kinks(tape, width) -> bool:
    return all(np.all(np.abs(np.abs(lt.pre_activation) - width) > KINK_MARGIN) for lt in tape.layers)


def finite_difference_score(params: NetworkParams, x, record, step=1e-6) -> np.ndarray:
    """Central differences of ``log p`` under forced replay for every hidden parameter."""
    vec = params.to_vector()
    fd = np.zeros_like(vec)
    for i in range(params.head_slice().start):
        e = np.zeros_like(vec)
        e[i] = step
        up = network.replay(params.from_vector(vec + e), x[None], record, keep_snapshots=False).log_prob[0]
        down = network.replay(params.from_vector(vec - e), x[None], record, keep_snapshots=False).log_prob[0]
        fd[i] = (up - down) / (2 * step)
    return fd


def gradient_check(rng, n_instances=50, max_qubits=4, max_layers=3, rtol=1e-4, atol=1e-8) -> CheckResult:
    """Score vector against finite differences. ``worst`` is the largest error in units of tolerance."""
    worst = 0.0
    done = 0
    while done < n_instances:
        n = int(rng.integers(2, max_qubits + 1))
        n_layers = int(rng.integers(1, max_layers + 1))
        width = 2.0
        params, x, tape = sample_instance(rng, n, n_layers, scale=0.6, width=width)
        if not _away_from_kinks(tape, width):
            continue
        s = grad.score(params, tape)[0]
        fd = finite_difference_score(params, x, tape.record)
        err = np.abs(s - fd) / np.maximum(rtol * np.abs(fd), atol)
        worst = max(worst, float(err.max()))
        done += 1
    return CheckResult("score vs finite differences", worst <= 1.0, worst, 1.0, n_instances)


def run_all(seed=0, quick=False) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    if quick:
        return [oracle_check(rng, 20), gradient_check(rng, 5)]
    return [oracle_check(rng), gradient_check(rng)]
