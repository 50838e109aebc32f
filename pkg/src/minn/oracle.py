"""Dense statevector reference for small circuits (N <= 10).

Independent of the covariance-matrix code: gates are built from the Pauli
Hamiltonian, states are full amplitude vectors, and measurements are explicit
projectors. Only the classical angle map is shared with :mod:`minn.network`.
Qubit 0 is the most significant tensor factor.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from minn.gaussian import GateAngles, ImpossibleOutcomeError, layer_parity
from minn.network import NetworkParams, angles_from_record

MAX_QUBITS = 10
MAX_MEASUREMENTS = 20
EPS_PROB = 1e-14

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

_EVEN = [0, 3]  # |00>, |11>
_ODD = [1, 2]  # |01>, |10>


def matchgate_hamiltonian(angles) -> np.ndarray:
    if isinstance(angles, GateAngles):
        angles = angles.as_array()
    t = np.asarray(angles, dtype=float)
    terms = [np.kron(X, X), np.kron(X, Y), np.kron(Y, X), np.kron(Y, Y), np.kron(Z, I2), np.kron(I2, Z)]
    return 0.5 * sum(c * m for c, m in zip(t, terms))


def matchgate_unitary(angles) -> np.ndarray:
    """``exp(-iH)`` by diagonalising the even- and odd-parity 2x2 blocks of H."""
    h = matchgate_hamiltonian(angles)
    u = np.zeros((4, 4), dtype=complex)
    for idx in (_EVEN, _ODD):
        block = h[np.ix_(idx, idx)]
        evals, evecs = np.linalg.eigh(block)
        u[np.ix_(idx, idx)] = (evecs * np.exp(-1j * evals)) @ evecs.conj().T
    return u


def basis_state(spins) -> np.ndarray:
    """Computational basis state with Z eigenvalues ``spins`` (+1 -> |0>)."""
    spins = np.asarray(spins)
    if spins.size > MAX_QUBITS:
        raise ValueError(f"oracle supports at most {MAX_QUBITS} qubits")
    index = int("".join("0" if s > 0 else "1" for s in spins), 2)
    psi = np.zeros(2**spins.size, dtype=complex)
    psi[index] = 1.0
    return psi


def _n_qubits(state: np.ndarray) -> int:
    return int(np.log2(state.size))


def apply_gate(state: np.ndarray, gate: np.ndarray, qubits: tuple[int, int]) -> np.ndarray:
    """Apply a two-qubit gate to adjacent qubits ``(j, j+1)``."""
    j, k = qubits
    if k != j + 1:
        raise ValueError(f"matchgates act on adjacent qubits, got {qubits}")
    n = _n_qubits(state)
    if not 0 <= j < n - 1:
        raise ValueError(f"qubit pair {qubits} out of range for {n} qubits")
    psi = state.reshape(2**j, 4, 2 ** (n - j - 2))
    return np.einsum("ab,ibk->iak", gate, psi).reshape(-1)


def project(state: np.ndarray, site: int, outcome: int):
    """Return ``(probability, normalised post-measurement state)`` for ``Z_site = outcome``."""
    n = _n_qubits(state)
    psi = state.reshape(2**site, 2, 2 ** (n - site - 1)).copy()
    keep = 0 if outcome > 0 else 1
    psi[:, 1 - keep, :] = 0.0
    prob = float(np.vdot(psi, psi).real)
    if prob < EPS_PROB:
        raise ImpossibleOutcomeError(f"outcome {outcome} on site {site} has probability {prob:.3g}")
    return prob, psi.reshape(-1) / np.sqrt(prob)


def apply_layer(state: np.ndarray, angles: np.ndarray, parity: str) -> np.ndarray:
    """Apply a brick-wall layer given per-gate angles of shape ``(n_gates, 6)``."""
    first = 0 if parity == "odd" else 1
    for k, theta in enumerate(np.asarray(angles).reshape(-1, 6)):
        j = first + 2 * k
        state = apply_gate(state, matchgate_unitary(theta), (j, j + 1))
    return state


def majorana_operators(n_qubits: int) -> list[np.ndarray]:
    """Dense Jordan-Wigner Majoranas ``[c_0, ..., c_{2N-1}]``."""
    ops = []
    for j in range(n_qubits):
        for p in (X, Y):
            factors = [Z] * j + [p] + [I2] * (n_qubits - j - 1)
            ops.append(reduce(np.kron, factors))
    return ops


def covariance_from_state(state: np.ndarray) -> np.ndarray:
    """``gamma[a, b] = i <psi| c_a c_b |psi>`` for a != b."""
    n = _n_qubits(state)
    cs = [c @ state for c in majorana_operators(n)]
    dim = 2 * n
    gamma = np.zeros((dim, dim))
    for a in range(dim):
        for b in range(dim):
            if a != b:
                # <psi| c_a c_b |psi> = <c_a psi | c_b psi> since c_a is Hermitian
                gamma[a, b] = (1j * np.vdot(cs[a], cs[b])).real
    return gamma


def _layer_angles(params: NetworkParams, l: int, mu_prev: np.ndarray) -> np.ndarray:
    theta = angles_from_record(params.weights[l], params.biases[l], mu_prev, params.activation_width)
    return theta.reshape(-1, 6)


def trajectory_probability(params: NetworkParams, x, record) -> float:
    """``Tr(rho_tau)`` for the forced record ``record`` of shape ``(L, N)``."""
    x = np.asarray(x, dtype=float)
    record = np.asarray(record, dtype=float)
    n = params.n_qubits
    if n > MAX_QUBITS:
        raise ValueError(f"oracle supports at most {MAX_QUBITS} qubits")
    state = basis_state(x)
    mu_prev = x
    total = 1.0
    for l in range(params.n_layers):
        state = apply_layer(state, _layer_angles(params, l, mu_prev), layer_parity(l + 1))
        for j in range(n):
            if record[l, j] != 0:
                p, state = project(state, j, int(record[l, j]))
                total *= p
        mu_prev = record[l]
    return total


def enumerate_trajectories(params: NetworkParams, x, sites) -> list[tuple[np.ndarray, float]]:
    """All records on the fixed ``(L, N)`` site mask with their probabilities.

    Zero-probability branches are dropped.
    """
    x = np.asarray(x, dtype=float)
    sites = np.asarray(sites, dtype=bool)
    n, n_layers = params.n_qubits, params.n_layers
    if sites.shape != (n_layers, n):
        raise ValueError(f"site mask must have shape {(n_layers, n)}")
    if sites.sum() > MAX_MEASUREMENTS:
        raise ValueError(f"enumeration capped at {MAX_MEASUREMENTS} measurements")
    out: list[tuple[np.ndarray, float]] = []

    def measure(state, l, j, record, prob):
        if j == n:
            record_l = record[l]
            if l + 1 == n_layers:
                out.append((record.copy(), prob))
            else:
                unitary(state, l + 1, record_l, record, prob)
            return
        if not sites[l, j]:
            measure(state, l, j + 1, record, prob)
            return
        for mu in (1, -1):
            try:
                p, post = project(state, j, mu)
            except ImpossibleOutcomeError:
                continue
            record[l, j] = mu
            measure(post, l, j + 1, record, prob * p)
        record[l, j] = 0

    def unitary(state, l, mu_prev, record, prob):
        parity = layer_parity(l + 1)
        state = apply_layer(state, _layer_angles(params, l, mu_prev), parity)
        measure(state, l, 0, record, prob)

    unitary(basis_state(x), 0, x, np.zeros((n_layers, n)), 1.0)
    return out
